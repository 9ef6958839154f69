"""Scratch: randomized cross-validation of lemmas/theorems before freezing tests."""
import random
import sys

from txnrobust import lang, membership, movers, robustness, transform
from txnrobust.lang import (AssumeInstr, BinOp, Const, Program, Process, ReadInstr, Reg,
                            Transaction, WriteInstr)
from txnrobust.models import Model, ROBUST, VIOLATION


def random_program(rng: random.Random) -> Program:
    nvars = rng.choice([1, 2])
    variables = ["x", "y"][:nvars]
    domain = (0, 1) if rng.random() < 0.8 else (0, 1, 2)
    nproc = rng.choice([1, 2, 2])
    procs = []
    tid = 0
    for pi in range(nproc):
        ntxn = rng.choice([1, 2])
        txns = []
        regs = []
        for _ in range(ntxn):
            tid += 1
            body = []
            read_regs = []
            for v in variables:
                if rng.random() < 0.5:
                    r = f"r{tid}{v}"
                    regs.append(r)
                    read_regs.append(r)
                    body.append(ReadInstr(r, v))
            if read_regs and rng.random() < 0.35:
                r = rng.choice(read_regs)
                body.append(AssumeInstr(BinOp(rng.choice(["==", "!="]), Reg(r), Const(rng.choice(domain)))))
            for v in variables:
                if rng.random() < 0.5:
                    if read_regs and rng.random() < 0.4:
                        expr = Reg(rng.choice(read_regs))
                        if rng.random() < 0.3 and len(domain) > 2:
                            expr = BinOp("+", expr, Const(1))
                    else:
                        expr = Const(rng.choice(domain))
                    body.append(WriteInstr(v, expr))
            txns.append(Transaction(f"T{tid}", tuple(body)))
        procs.append(Process(f"P{pi+1}", tuple(regs), tuple(txns)))
    return Program(tuple(procs), domain)


def check_one(p: Program, idx: int) -> list[str]:
    problems = []
    norm = lang.normalize(p)
    cands = list(robustness.candidate_traces(norm))
    chain = [Model.SER, Model.SI, Model.PC, Model.CC]
    for t in cands:
        flags = {m: membership.member(t, m) for m in chain}
        for hi, lo in zip(chain, chain[1:]):
            if flags[hi] and not flags[lo]:
                problems.append(f"{idx}: chain broken {hi}->{lo}")
        # (b) Lemma 3
        if membership.member_cc(t) != membership.member_cc(transform.split_trace(t)):
            problems.append(f"{idx}: lemma3 mismatch")
        # (g) Lemma 7
        if flags[Model.PC] and not membership.lemma7_cycle_shapes_ok(t):
            problems.append(f"{idx}: lemma7 violated")
        # oracle vs fast (criterion 3 style)
        for m in chain:
            if membership.oracle_member(t, m) != flags[m]:
                problems.append(f"{idx}: oracle/fast mismatch {m} on {t!r}")
    # (d) Theorem 1
    v1 = robustness.brute_force_robust(norm, Model.CC, Model.PC, membership="fast")
    v2 = robustness.brute_force_robust(transform.split(norm).program, Model.CC, Model.SER, membership="fast")
    if v1.result != v2.result:
        problems.append(f"{idx}: theorem1 {v1.result} vs {v2.result}")
    # (e) Theorem 4
    v3 = robustness.brute_force_robust(norm, Model.PC, Model.SI, membership="fast")
    v4 = transform.check_robust_pc_si_via_monitor(norm)
    if v3.result != v4.result:
        problems.append(f"{idx}: theorem4 bf={v3.result} monitor={v4.result}")
    # (f) Theorem 7
    v5 = robustness.brute_force_robust(norm, Model.CC, Model.SI, membership="fast")
    both = ROBUST if (v1.result == ROBUST and v3.result == ROBUST) else VIOLATION
    if v5.result != both:
        problems.append(f"{idx}: theorem7 {v5.result} vs legs {v1.result},{v3.result}")
    # (h) movers soundness
    g = movers.build_graph(transform.split(norm))
    if movers.prove_robust_cc_pc(g).result == "robust" and v1.result == VIOLATION:
        problems.append(f"{idx}: movers cc-pc unsound")
    if movers.prove_robust_pc_si(g).result == "robust" and v3.result == VIOLATION:
        problems.append(f"{idx}: movers pc-si unsound")
    return problems


def main(n: int, seed: int):
    rng = random.Random(seed)
    bad = 0
    for i in range(n):
        p = random_program(rng)
        probs = check_one(p, i)
        if probs:
            bad += 1
            print("PROGRAM", i)
            print(lang.print_program(p))
            for q in probs[:6]:
                print("  ", q)
            if bad >= 3:
                break
    print(f"done: {n} programs, {bad} with problems")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 200,
         int(sys.argv[2]) if len(sys.argv) > 2 else 12345)

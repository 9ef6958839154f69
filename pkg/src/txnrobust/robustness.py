"""Robustness deciders: brute force, the reachability reductions, movers.

A program is robust against a weaker model X relative to a stronger model Y
when its trace sets under the two models coincide; a violation witness is a
trace in the difference.  The brute-force route enumerates every candidate
trace (a read-from source per read plus a store-order orientation per pair
of writers, with transaction-local evaluation fixing the values) and filters
it through trace membership; the reduction route goes through the read/write
split (CC vs PC) and the monitor instrumentation (PC vs SI); the movers
route is the commutativity-dependency-graph sufficient condition.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterator, Optional

from . import movers as movers_mod
from .interp import ScheduleBudgetExceeded
from .lang import Program, normalize, eval_assume, eval_expr
from .membership import MEMBER_FAST, ORACLE_TXN_GUARD, oracle_member
from .models import (
    ROBUST,
    UNKNOWN,
    VIOLATION,
    Model,
    RobustnessVerdict,
    SizeGuardExceeded,
)
from .trace import INIT_TID, Event, Trace, is_acyclic, merge_split_trace
from .transform import check_robust_pc_si_via_monitor, split

DEFAULT_CANDIDATE_BUDGET = 500_000


def candidate_traces(
    program: Program, budget: int = DEFAULT_CANDIDATE_BUDGET, prefixes: bool = False
) -> Iterator[Trace]:
    """All candidate traces of a normalized program over the declarative
    trace space: any read-from assignment consistent with transaction-local
    evaluation, and any store-order orientation total per variable.

    With ``prefixes`` the enumeration ranges over every per-process prefix
    of committed transactions (an assume may block a process forever while
    the others keep running, so executions need not commit everything);
    robustness comparisons use this prefix-closed space, which is the one
    the reachability-based reductions decide.

    Candidates whose po+rf is cyclic are skipped: no consistency model in
    the chain admits them (visibility must embed po and rf in a strict
    partial order), and their values have no well-founded evaluation.
    """
    if not program.is_normal():
        raise ValueError("candidate enumeration requires a normalized program")
    if prefixes:
        from .lang import Process

        cuts = [range(len(p.transactions) + 1) for p in program.processes]
        subs = []
        total = 0
        for cut in itertools.product(*cuts):
            sub = Program(
                tuple(
                    Process(p.pid, p.regs, p.transactions[:k])
                    for p, k in zip(program.processes, cut)
                ),
                program.domain,
                program.initial,
            )
            total += _enumeration_size(sub)
            subs.append(sub)
        if total > budget:
            raise SizeGuardExceeded(
                f"{total} candidate traces exceed the enumeration budget {budget}"
            )
        for sub in subs:
            yield from candidate_traces(sub, budget)
        return
    txns = [(p.pid, t) for p in program.processes for t in p.transactions]
    tids = [t.tid for _, t in txns]
    by_tid = {t.tid: (pid, t) for pid, t in txns}
    variables = sorted(program.var_names)

    writers: dict[str, list[str]] = {
        x: [INIT_TID] + sorted(t.tid for _, t in txns if x in t.write_vars) for x in variables
    }
    po = set()
    for tid in tids:
        po.add((INIT_TID, tid))
    for p in program.processes:
        order = [t.tid for t in p.transactions]
        for i, a in enumerate(order):
            for b in order[i + 1 :]:
                po.add((a, b))
    po = frozenset(po)

    read_slots = [(t.tid, var) for _, t in txns for _, var in t.reads]
    options = [[w for w in writers[var] if w != tid] for tid, var in read_slots]
    shared_pairs = sorted(
        (a, b)
        for i, a in enumerate(tids)
        for b in tids[i + 1 :]
        if by_tid[a][1].write_vars & by_tid[b][1].write_vars
    )
    if _enumeration_size(program) > budget:
        raise SizeGuardExceeded(
            f"{_enumeration_size(program)} candidate traces exceed the enumeration budget {budget}"
        )

    init_events = tuple(
        Event("write", INIT_TID, x, program.initial_value(x)) for x in variables
    )
    all_nodes = frozenset(tids) | {INIT_TID}

    for sources in itertools.product(*options):
        rf = frozenset(
            (src, tid, var) for (tid, var), src in zip(read_slots, sources)
        )
        rf_pairs = frozenset((a, b) for a, b, _ in rf)
        if not is_acyclic(po | rf_pairs, all_nodes):
            continue
        evaluated = _evaluate(program, txns, rf, po | rf_pairs)
        if evaluated is None:
            continue
        events, _ = evaluated
        events = {INIT_TID: init_events, **events}
        for orientation in itertools.product((False, True), repeat=len(shared_pairs)):
            ws = set()
            for tid in tids:
                if by_tid[tid][1].write_vars:
                    ws.add((INIT_TID, tid))
            for (a, b), flip in zip(shared_pairs, orientation):
                ws.add((b, a) if flip else (a, b))
            if not _ws_total_per_var(program, ws):
                continue
            yield Trace(events, po, rf, frozenset(ws))


def _enumeration_size(program: Program) -> int:
    """Upper bound on the candidate count of the complete enumeration."""
    txns = [t for p in program.processes for t in p.transactions]
    writer_count = {
        x: 1 + sum(1 for t in txns if x in t.write_vars) for x in program.var_names
    }
    total = 1
    for t in txns:
        for _, var in t.reads:
            total *= writer_count[var] - (1 if var in t.write_vars else 0)
    pairs = sum(
        1
        for i, a in enumerate(txns)
        for b in txns[i + 1 :]
        if a.write_vars & b.write_vars
    )
    return total * 2**pairs


def _evaluate(program, txns, rf, dep_pairs):
    """Transaction-local evaluation under guessed reads, in a topological
    order of po+rf; None when some assume fails (the candidate is not a
    completed execution)."""
    order = _topo([t.tid for _, t in txns], dep_pairs)
    src_of = {(tid, var): src for src, tid, var in rf}
    regs = {p.pid: {r: 0 for r in p.regs} for p in program.processes}
    written: dict[str, dict[str, int]] = {INIT_TID: {x: program.initial_value(x) for x in program.var_names}}
    events: dict[str, list[Event]] = {}
    by_tid = {t.tid: (pid, t) for pid, t in txns}
    for tid in order:
        pid, t = by_tid[tid]
        env = regs[pid]
        evs: list[Event] = []
        for reg, var in t.reads:
            val = written[src_of[(tid, var)]][var]
            env[reg] = val
            evs.append(Event("read", tid, var, val))
        for cond in t.assumes:
            if not eval_assume(cond, env):
                return None
        written[tid] = {}
        for var, expr in t.writes:
            val = eval_expr(expr, env)
            written[tid][var] = val
            evs.append(Event("write", tid, var, val))
        events[tid] = tuple(evs)
    return events, written


def _topo(tids, pairs):
    succ: dict[str, set[str]] = {t: set() for t in tids}
    indeg = {t: 0 for t in tids}
    for a, b in pairs:
        if a in succ and b in indeg and b not in succ[a]:
            succ[a].add(b)
            indeg[b] += 1
    ready = sorted(t for t in tids if indeg[t] == 0)
    out = []
    while ready:
        t = ready.pop(0)
        out.append(t)
        for s in sorted(succ[t]):
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
        ready.sort()
    assert len(out) == len(tids)
    return out


def _ws_total_per_var(program, ws) -> bool:
    for x in program.var_names:
        writer_list = [
            t.tid for p in program.processes for t in p.transactions if x in t.write_vars
        ]
        pairs = frozenset(
            (a, b) for a, b in ws if a in writer_list and b in writer_list
        )
        if not is_acyclic(pairs, frozenset(writer_list)):
            return False
    return True


# ---------------------------------------------------------------------------
# trace-set semantics per model


def trace_set(
    program: Program,
    model: Model,
    membership: str = "oracle",
    candidate_budget: int = DEFAULT_CANDIDATE_BUDGET,
    guard: int = ORACLE_TXN_GUARD,
    prefixes: bool = True,
) -> frozenset[Trace]:
    """Tr_model of a program, via candidate enumeration + membership;
    prefix-closed by default (the robustness semantics)."""
    member = _member_fn(membership, guard)
    return frozenset(
        t
        for t in candidate_traces(normalize(program), candidate_budget, prefixes)
        if member(t, model)
    )


def _member_fn(membership: str, guard: int) -> Callable[[Trace, Model], bool]:
    if membership == "oracle":
        return lambda t, m: oracle_member(t, m, guard)
    if membership == "fast":
        return lambda t, m: MEMBER_FAST[m](t)
    raise ValueError(f"unknown membership route {membership!r}")


def brute_force_robust(
    program: Program,
    frm: Model,
    to: Model,
    membership: str = "oracle",
    candidate_budget: int = DEFAULT_CANDIDATE_BUDGET,
    guard: int = ORACLE_TXN_GUARD,
    prefixes: bool = True,
) -> RobustnessVerdict:
    """Compare the prefix-closed Tr_frm and Tr_to by exhaustive candidate
    enumeration; a violation carries the canonically smallest witness."""
    if not to.stronger_than(frm):
        raise ValueError(f"{to.value} is not stronger than {frm.value}")
    prog = normalize(program)
    n = len(prog.transactions)
    if membership == "oracle" and n > guard:
        return RobustnessVerdict(
            frm, to, UNKNOWN, "bruteforce", reason=f"{n} transactions exceed oracle guard {guard}"
        )
    member = _member_fn(membership, guard)
    violations: list[Trace] = []
    counts = {"candidates": 0, "in_from": 0, "in_to": 0}
    try:
        for t in candidate_traces(prog, candidate_budget, prefixes):
            counts["candidates"] += 1
            if not member(t, frm):
                continue
            counts["in_from"] += 1
            if member(t, to):
                counts["in_to"] += 1
            else:
                violations.append(t)
    except SizeGuardExceeded as e:
        return RobustnessVerdict(frm, to, UNKNOWN, "bruteforce", reason=str(e))
    stats = tuple(sorted(counts.items()))
    if violations:
        witness = min(violations, key=lambda t: t.sort_key())
        return RobustnessVerdict(frm, to, VIOLATION, "bruteforce", witness_trace=witness, stats=stats)
    return RobustnessVerdict(frm, to, ROBUST, "bruteforce", stats=stats)


# ---------------------------------------------------------------------------
# reductions


def reduction_robust_cc_pc(program: Program, **kw) -> RobustnessVerdict:
    """CC-vs-PC robustness equals CC-vs-SER robustness of the split program;
    the split's CC-vs-SER leg is decided brute-force here (the dedicated
    monitor for that pair lives in prior work and is out of scope)."""
    sp = split(normalize(program))
    inner = brute_force_robust(sp.program, Model.CC, Model.SER, **kw)
    witness = None
    if inner.witness_trace is not None:
        witness = merge_split_trace(inner.witness_trace)
    return RobustnessVerdict(
        Model.CC,
        Model.PC,
        inner.result,
        "reduction",
        witness_trace=witness,
        reason=inner.reason,
        stats=inner.stats,
    )


def reduction_robust_pc_si(program: Program, budget: int = 10**6) -> RobustnessVerdict:
    return check_robust_pc_si_via_monitor(program, budget)


def robust_cc_si(program: Program, method: str = "bruteforce", **kw) -> RobustnessVerdict:
    """CC-vs-SI robustness is the conjunction of CC-vs-PC and PC-vs-SI."""
    legs = {
        "bruteforce": (
            lambda: brute_force_robust(program, Model.CC, Model.PC, **kw),
            lambda: brute_force_robust(program, Model.PC, Model.SI, **kw),
        ),
        "reduction": (
            lambda: reduction_robust_cc_pc(program, **kw),
            lambda: reduction_robust_pc_si(program),
        ),
        "movers": (
            lambda: movers_verdict(program, Model.CC, Model.PC),
            lambda: movers_verdict(program, Model.PC, Model.SI),
        ),
    }[method]
    for leg in legs:
        v = leg()
        if v.result == VIOLATION:
            return RobustnessVerdict(
                Model.CC, Model.SI, VIOLATION, method,
                witness_trace=v.witness_trace, witness_schedule=v.witness_schedule,
                reason=f"{v.pair} leg fails", stats=v.stats,
            )
        if v.result == UNKNOWN:
            return RobustnessVerdict(Model.CC, Model.SI, UNKNOWN, method, reason=v.reason)
    return RobustnessVerdict(Model.CC, Model.SI, ROBUST, method)


def movers_verdict(program: Program, frm: Model, to: Model) -> RobustnessVerdict:
    """Movers prove robustness or stay inconclusive; inconclusive maps to
    the unknown verdict (the condition is sufficient, not complete)."""
    graph = movers_mod.build_graph(split(normalize(program)))
    if (frm, to) == (Model.CC, Model.PC):
        proof = movers_mod.prove_robust_cc_pc(graph)
    elif (frm, to) == (Model.PC, Model.SI):
        proof = movers_mod.prove_robust_pc_si(graph)
    elif (frm, to) == (Model.CC, Model.SI):
        return robust_cc_si(program, method="movers")
    else:
        return RobustnessVerdict(frm, to, UNKNOWN, "movers", reason="no mover condition for this pair")
    if proof.result == "robust":
        return RobustnessVerdict(frm, to, ROBUST, "movers")
    return RobustnessVerdict(
        frm, to, UNKNOWN, "movers",
        reason="inconclusive: " + movers_mod.describe_cycle(proof.cycle),
    )


METHODS = ("bruteforce", "reduction", "movers")

_REDUCTIONS = {
    (Model.CC, Model.PC): reduction_robust_cc_pc,
    (Model.PC, Model.SI): lambda p, **kw: reduction_robust_pc_si(p),
    (Model.CC, Model.SI): lambda p, **kw: robust_cc_si(p, method="reduction"),
}


def check_robustness(
    program: Program, frm: Model, to: Model, method: str = "bruteforce", **kw
) -> RobustnessVerdict:
    if method == "bruteforce":
        return brute_force_robust(program, frm, to, **kw)
    if method == "reduction":
        fn = _REDUCTIONS.get((frm, to))
        if fn is None:
            return RobustnessVerdict(
                frm, to, UNKNOWN, "reduction", reason="no reduction for this pair"
            )
        return fn(program, **kw)
    if method == "movers":
        return movers_verdict(program, frm, to)
    raise ValueError(f"unknown method {method!r}")

"""Command-line front end.

Exit codes for verdict-producing verbs: 0 robust, 1 violation, 2 unknown,
3 usage or parse error.  ``ROBUST_BUDGET`` overrides the schedule budget.
Machine output (``--json``) is JSON lines without color codes; every report
embeds the tool version, the budgets and the method behind each verdict.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from . import __version__, corpus, movers, robustness, transform
from .lang import NormalizeError, ParseError, normalize, parse, print_program, well_formed
from .membership import MEMBER_FAST, oracle_member
from .models import ROBUST, UNKNOWN, VIOLATION, Model, SizeGuardExceeded
from .trace import from_json, to_json
from .robustness import trace_set

EXIT_ROBUST, EXIT_VIOLATION, EXIT_UNKNOWN, EXIT_USAGE = 0, 1, 2, 3


def _load_program(path: str, domain: str | None):
    with open(path, encoding="utf-8") as fh:
        program = parse(fh.read())
    if domain:
        vals = tuple(sorted({int(v) for v in domain.replace(",", " ").split()}))
        program = replace(program, domain=vals)
    diags = well_formed(program)
    if diags:
        raise ParseError("; ".join(str(d) for d in diags), 0, 0)
    return program


def _budgets(args) -> dict:
    schedules = int(os.environ.get("ROBUST_BUDGET", 0)) or args.budget_schedules
    return {"schedules": schedules, "cycles": args.budget_cycles}


def _emit(args, doc: dict, human: str) -> None:
    if args.json:
        print(json.dumps(doc, sort_keys=True))
    else:
        print(human)


def _verdict_doc(v, budgets) -> dict:
    doc = {
        "pair": v.pair,
        "verdict": v.result,
        "method": v.method,
        "version": __version__,
        "budgets": budgets,
        "stats": dict(v.stats),
    }
    if v.reason:
        doc["reason"] = v.reason
    if v.witness_trace is not None:
        doc["witness"] = json.loads(to_json(v.witness_trace))
    if v.witness_schedule is not None:
        doc["witness_schedule"] = [list(step) for step in v.witness_schedule]
    return doc


def cmd_parse(args) -> int:
    program = _load_program(args.file, args.domain)
    norm = normalize(program)
    if args.json:
        print(json.dumps({
            "processes": len(program.processes),
            "transactions": len(program.transactions),
            "variables": sorted(program.var_names),
            "normalized": print_program(norm),
            "version": __version__,
        }, sort_keys=True))
    else:
        print(print_program(norm), end="")
    return EXIT_ROBUST


def cmd_check_trace(args) -> int:
    with open(args.file, encoding="utf-8") as fh:
        trace = from_json(fh.read())
    models = [Model.parse(args.model)] if args.model else list(Model)
    out = {}
    for m in models:
        if args.oracle:
            out[m.value] = oracle_member(trace, m)
        else:
            out[m.value] = MEMBER_FAST[m](trace)
    doc = {"membership": out, "route": "oracle" if args.oracle else "fast", "version": __version__}
    _emit(args, doc, " ".join(f"{k}={'yes' if v else 'no'}" for k, v in out.items()))
    return EXIT_ROBUST


_EXITS = {ROBUST: EXIT_ROBUST, VIOLATION: EXIT_VIOLATION, UNKNOWN: EXIT_UNKNOWN}


def cmd_check_robustness(args) -> int:
    program = _load_program(args.file, args.domain)
    frm, to = Model.parse(args.frm), Model.parse(args.to)
    if not to.stronger_than(frm):
        print(f"error: --to {to.value} is not stronger than --from {frm.value}", file=sys.stderr)
        return EXIT_USAGE
    budgets = _budgets(args)
    methods = list(robustness.METHODS) if args.method == "all" else [args.method]
    verdicts = []
    for method in methods:
        v = robustness.check_robustness(program, frm, to, method)
        verdicts.append(v)
    answered = [v for v in verdicts if v.result != UNKNOWN]
    decisive = {v.result for v in answered}
    if len(decisive) > 1:
        print("error: methods disagree: " + ", ".join(f"{v.method}={v.result}" for v in verdicts),
              file=sys.stderr)
        return EXIT_USAGE
    final = answered[0] if answered else verdicts[0]
    doc = {"reports": [_verdict_doc(v, budgets) for v in verdicts], "verdict": final.result}
    human = "; ".join(f"{v.method}: {v.result}" for v in verdicts)
    _emit(args, doc, f"{final.pair}: {human}")
    return _EXITS[final.result]


def cmd_prove_robustness(args) -> int:
    program = _load_program(args.file, args.domain)
    graph = movers.build_graph(transform.split(normalize(program)))
    prover = {"cc-pc": movers.prove_robust_cc_pc, "pc-si": movers.prove_robust_pc_si}[args.pair]
    proof = prover(graph, args.budget_cycles)
    doc = {
        "pair": args.pair,
        "result": proof.result,
        "version": __version__,
        "method": "movers",
    }
    if proof.cycle:
        doc["cycle"] = movers.describe_cycle(proof.cycle)
    _emit(args, doc, f"{args.pair}: {proof.result}"
          + (f"\n  matched cycle: {movers.describe_cycle(proof.cycle)}" if proof.cycle else ""))
    return EXIT_ROBUST if proof.result == "robust" else EXIT_UNKNOWN


def cmd_transform(args) -> int:
    program = _load_program(args.file, args.domain)
    norm = normalize(program)
    if args.split:
        print(print_program(transform.split(norm).program), end="")
    elif args.instrument:
        print(transform.print_instrumented(transform.instrument(norm)), end="")
    else:
        print("error: choose --split or --instrument", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_ROBUST


def cmd_export(args) -> int:
    program = _load_program(args.file, args.domain)
    norm = normalize(program)
    wrote = []

    def out(name: str, text: str):
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            path = os.path.join(args.out, name)
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
            wrote.append(path)
        else:
            print(text, end="")

    if args.traces:
        model = Model.parse(args.traces)
        try:
            traces = sorted(trace_set(norm, model), key=lambda t: t.sort_key())
        except SizeGuardExceeded as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_UNKNOWN
        docs = [json.loads(to_json(t)) for t in traces]
        out(f"traces-{model.value}.json", json.dumps(docs, indent=2, sort_keys=True) + "\n")
    if args.graph:
        graph = movers.build_graph(transform.split(norm))
        out("graph.dot", movers.to_dot(graph))
    if args.split:
        out("split.txn", print_program(transform.split(norm).program))
    if args.instrument:
        out("instrumented.txt", transform.print_instrumented(transform.instrument(norm)))
    if not (args.traces or args.graph or args.split or args.instrument):
        print("error: nothing to export", file=sys.stderr)
        return EXIT_USAGE
    for path in wrote:
        print(path)
    return EXIT_ROBUST


def cmd_corpus(args) -> int:
    entries = [corpus.entry(args.entry)] if args.entry else list(corpus.ENTRIES)
    budgets = _budgets(args)
    mismatch = unknown = False
    rows = []
    for e in entries:
        program = e.load()
        cells = {}
        for pair in corpus.PAIR_NAMES:
            frm, to = (Model.parse(x) for x in pair.split("-"))
            v = robustness.brute_force_robust(program, frm, to)
            got = {ROBUST: "yes", VIOLATION: "no", UNKNOWN: "unknown"}[v.result]
            cells[pair] = {"got": got, "expected": e.expected_for(pair), "method": v.method}
            if got == "unknown":
                unknown = True
            elif got != e.expected_for(pair):
                mismatch = True
        rows.append({"name": e.name, "cells": cells, "provenance": e.provenance})
    if args.json:
        print(json.dumps({"rows": rows, "version": __version__, "budgets": budgets}, sort_keys=True))
    else:
        width = max(len(r["name"]) for r in rows)
        print(f"{'':{width}}  " + "  ".join(f"{p:>7}" for p in corpus.PAIR_NAMES))
        for r in rows:
            marks = []
            for p in corpus.PAIR_NAMES:
                cell = r["cells"][p]
                mark = cell["got"] + ("" if cell["got"] == cell["expected"] else "!")
                marks.append(f"{mark:>7}")
            print(f"{r['name']:{width}}  " + "  ".join(marks))
    if mismatch:
        return EXIT_VIOLATION
    if unknown:
        return EXIT_UNKNOWN
    return EXIT_ROBUST


def _add_common(sp, domain=True):
    sp.add_argument("--json", action="store_true", help="machine-readable output")
    sp.add_argument("--budget-schedules", type=int, default=10**6)
    sp.add_argument("--budget-cycles", type=int, default=10**5)
    if domain:
        sp.add_argument("--domain", help="override the value domain, e.g. '0 1 2'")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="txnrobust", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("parse", help="parse, validate and print the normalized program")
    p.add_argument("file")
    _add_common(p)
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("check-trace", help="membership of a traces.json trace under each model")
    p.add_argument("file")
    p.add_argument("--model", help="cc|pc|si|ser (default: all)")
    p.add_argument("--oracle", action="store_true", help="use the witness-search oracle")
    _add_common(p, domain=False)
    p.set_defaults(fn=cmd_check_trace)

    p = sub.add_parser("check-robustness", help="decide robustness for a model pair")
    p.add_argument("file")
    p.add_argument("--from", dest="frm", required=True)
    p.add_argument("--to", required=True)
    p.add_argument("--method", choices=("bruteforce", "reduction", "movers", "all"),
                   default="bruteforce")
    _add_common(p)
    p.set_defaults(fn=cmd_check_robustness)

    p = sub.add_parser("prove-robustness", help="commutativity-graph sufficient condition")
    p.add_argument("file")
    p.add_argument("--pair", choices=("cc-pc", "pc-si"), required=True)
    _add_common(p)
    p.set_defaults(fn=cmd_prove_robustness)

    p = sub.add_parser("transform", help="print the split or instrumented program")
    p.add_argument("file")
    p.add_argument("--split", action="store_true")
    p.add_argument("--instrument", action="store_true")
    _add_common(p)
    p.set_defaults(fn=cmd_transform)

    p = sub.add_parser("export", help="emit traces.json, graph.dot or transformed programs")
    p.add_argument("file")
    p.add_argument("--traces", metavar="MODEL")
    p.add_argument("--graph", action="store_true")
    p.add_argument("--split", action="store_true")
    p.add_argument("--instrument", action="store_true")
    p.add_argument("-o", "--out", help="output directory (default: stdout)")
    _add_common(p)
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("corpus", help="run the bundled corpus against its expected matrix")
    p.add_argument("--entry", help="run a single corpus entry")
    _add_common(p, domain=False)
    p.set_defaults(fn=cmd_corpus)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ParseError, NormalizeError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

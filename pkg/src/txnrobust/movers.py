"""Commutativity dependency graphs and the mover-based robustness proofs.

A transaction of the split program fails to move right past an adjacent
transaction of another process when swapping the two in some serial
execution is invalid or changes the end state; the blocking dependency
classifies the edge: write-read gives MRF, write-write gives MWW and
read-write gives MRW.  Program-order edges and the undirected STO edges
pairing the two halves of one original transaction complete the graph.

The provers search simple cycles for the violation-abstracting patterns;
absence of a match proves robustness (the condition is sufficient only, so
a match is reported as inconclusive, never as a violation).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import networkx as nx

from .interp import AssertionViolated, ScheduleBudgetExceeded, StoreState, _exec_txn
from .transform import SplitProgram

MRF, MWW, MRW, PO, STO = "MRF", "MWW", "MRW", "PO", "STO"


@dataclass(frozen=True)
class CommutativityDependencyGraph:
    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str, str]]  # (src, dst, kind); STO stored one way
    overflow: bool = False

    def labels(self, a: str, b: str) -> frozenset[str]:
        out = {k for (s, d, k) in self.edges if (s, d) == (a, b)}
        out |= {STO for (s, d, k) in self.edges if k == STO and (d, s) == (a, b)}
        return frozenset(out)

    @property
    def directed_edges(self) -> frozenset[tuple[str, str, str]]:
        return frozenset(e for e in self.edges if e[2] != STO)

    @property
    def sto_pairs(self) -> frozenset[tuple[str, str]]:
        return frozenset((s, d) for s, d, k in self.edges if k == STO)


class CycleBudgetExceeded(RuntimeError):
    pass


def _dep_kinds(a, b) -> tuple[str, ...]:
    """Dependency kinds that can block swapping a right past b."""
    kinds = []
    if a.write_vars & b.read_vars:
        kinds.append(MRF)
    if a.write_vars & b.write_vars:
        kinds.append(MWW)
    if a.read_vars & b.write_vars:
        kinds.append(MRW)
    return tuple(kinds)


def non_mover_relations(sp: SplitProgram, budget: int = 10**6) -> tuple[frozenset, bool]:
    """Bounded-domain commutativity oracle; returns (edges, overflow).

    For each ordered pair of transactions from distinct processes that carry
    a write-read, write-write or read-write dependency, the edge is added
    when the pair can run back to back at all: some pre-state over the
    finite domain (the variables and registers either transaction touches)
    lets the first and then the second complete.  An adjacent run with a
    dependency always realizes the corresponding trace edge, and robustness
    compares traces, so two writes of equal values still count as a
    write-write non-mover even though they commute state-wise (end-state
    comparison alone would lose exactly those edges and make the sufficient
    condition unsound).  Quantifying over all bounded pre-states rather than
    client-reachable ones only adds edges, which is the safe direction.

    On budget overflow every syntactically possible edge is added
    (conservative, never unsound) and the flag is set.
    """
    prog = sp.program
    domain = sorted(prog.domain)
    pid_of = {t.tid: p.pid for p in prog.processes for t in p.transactions}
    txn_of = {t.tid: t for p in prog.processes for t in p.transactions}
    tids = [t.tid for p in prog.processes for t in p.transactions]
    edges: set[tuple[str, str, str]] = set()
    checked = 0
    try:
        for a in tids:
            for b in tids:
                if a == b or pid_of[a] == pid_of[b]:
                    continue
                kinds = _dep_kinds(txn_of[a], txn_of[b])
                if not kinds:
                    continue
                coenabled, checked = _adjacent_run_exists(
                    txn_of[a], pid_of[a], txn_of[b], pid_of[b], domain, checked, budget
                )
                if coenabled:
                    edges.update((a, b, k) for k in kinds)
    except ScheduleBudgetExceeded:
        for a in tids:
            for b in tids:
                if a != b and pid_of[a] != pid_of[b]:
                    edges.update((a, b, k) for k in _dep_kinds(txn_of[a], txn_of[b]))
        return frozenset(edges), True
    return frozenset(edges), False


def _adjacent_run_exists(ta, pa, tb, pb, domain, checked, budget):
    variables = sorted(ta.read_vars | ta.write_vars | tb.read_vars | tb.write_vars)
    regs_a = sorted(_input_regs(ta) | {r for r, _ in ta.reads})
    regs_b = sorted(_input_regs(tb) | {r for r, _ in tb.reads})
    free = [("shared", v) for v in variables]
    free += [(pa, r) for r in regs_a]
    free += [(pb, r) for r in regs_b]
    for values in itertools.product(domain, repeat=len(free)):
        checked += 1
        if checked > budget:
            raise ScheduleBudgetExceeded(f"more than {budget} commutativity states")
        state = dict(zip(free, values))
        if _run_pair(state, ta, pa, tb, pb) is not None:
            return True, checked
    return False, checked


def _input_regs(txn) -> set[str]:
    from .lang import expr_regs

    out: set[str] = set()
    for cond in txn.assumes:
        out |= expr_regs(cond)
    for _, e in txn.writes:
        out |= expr_regs(e)
    return out


def _run_pair(state0, t1, p1, t2, p2):
    """End state of running t1 then t2 atomically from state0, or None when
    an assume blocks."""
    shared = {v: val for (kind, v), val in state0.items() if kind == "shared"}
    regs = {p1: {}, p2: {}}
    for (kind, r), val in state0.items():
        if kind != "shared":
            regs.setdefault(kind, {})[r] = val
    st = StoreState(shared, regs)
    for txn, pid in ((t1, p1), (t2, p2)):
        try:
            if _exec_txn(txn, pid, st) is not None:
                return None
        except AssertionViolated:
            pass
    return (
        tuple(sorted(st.shared.items())),
        tuple(sorted(st.regs[p1].items())),
        tuple(sorted(st.regs[p2].items())),
    )


def build_graph(sp: SplitProgram, budget: int = 10**6) -> CommutativityDependencyGraph:
    nodes = tuple(t.tid for p in sp.program.processes for t in p.transactions)
    edges, overflow = non_mover_relations(sp, budget)
    edges = set(edges)
    for p in sp.program.processes:
        order = [t.tid for t in p.transactions]
        for i, a in enumerate(order):
            for b in order[i + 1 :]:
                edges.add((a, b, PO))
    for r, w in sp.sto_pairs:
        edges.add((r, w, STO))
    return CommutativityDependencyGraph(nodes, frozenset(edges), overflow)


# ---------------------------------------------------------------------------
# cycle-pattern provers


@dataclass(frozen=True)
class MoverProof:
    result: str  # "robust" | "inconclusive"
    cycle: Optional[tuple[tuple[str, str, frozenset[str]], ...]] = None
    reason: Optional[str] = None


def describe_cycle(cycle) -> str:
    if not cycle:
        return "cycle budget exceeded"
    return " ; ".join(f"{a} -[{'|'.join(sorted(ls))}]-> {b}" for a, b, ls in cycle)


def _simple_cycles(graph: CommutativityDependencyGraph, budget: int):
    g = nx.DiGraph()
    g.add_nodes_from(graph.nodes)
    for a, b, _ in sorted(graph.edges):
        g.add_edge(a, b)
    for a, b, k in sorted(graph.edges):
        if k == STO:
            g.add_edge(b, a)
    count = 0
    for cyc in nx.simple_cycles(g):
        count += 1
        if count > budget:
            raise CycleBudgetExceeded(f"more than {budget} simple cycles")
        k = cyc.index(min(cyc))
        yield tuple(cyc[k:] + cyc[:k])


def _edge_labels(graph, nodes):
    n = len(nodes)
    return [graph.labels(nodes[j], nodes[(j + 1) % n]) for j in range(n)]


def prove_robust_cc_pc(
    graph: CommutativityDependencyGraph, budget: int = 10**5
) -> MoverProof:
    """No simple cycle may close with an MRW edge into a program-order/MRF
    prefix that reaches an MRW-or-MWW edge, the rest staying inside the
    non-mover and program-order relations; at least three distinct
    transactions are involved."""
    try:
        for nodes in _simple_cycles(graph, budget):
            n = len(nodes)
            if n < 3:
                continue
            for rot in range(n):
                rotated = nodes[rot:] + nodes[:rot]
                labels = _edge_labels(graph, rotated)
                if MRW not in labels[n - 1]:
                    continue
                # pivot position, 1-indexed; the program-order/read-from
                # prefix before it may be empty (the pivot can be the first
                # transaction itself)
                for i in range(1, n):
                    if not labels[i - 1] & {MRW, MWW}:
                        continue
                    if not all(labels[j] & {PO, MRF} for j in range(i - 1)):
                        continue
                    if not all(labels[j] & {MRW, MWW, MRF, PO} for j in range(i, n - 1)):
                        continue
                    return MoverProof("inconclusive", _witness(graph, rotated))
    except CycleBudgetExceeded as e:
        return MoverProof("inconclusive", None, str(e))
    return MoverProof("robust")


def prove_robust_pc_si(
    graph: CommutativityDependencyGraph, budget: int = 10**5
) -> MoverProof:
    """No simple cycle may run STO then MRW out of a transaction pair whose
    write half is MWW-reachable from the cycle end, under the successor
    constraints that forbid two merged conflict edges in a row and require a
    store edge before any STO-then-MRW step."""
    try:
        for nodes in _simple_cycles(graph, budget):
            n = len(nodes)
            if n < 3:
                continue
            for rot in range(n):
                rotated = nodes[rot:] + nodes[:rot]
                L = _edge_labels(graph, rotated)  # L[j-1] is edge_j, 1-indexed
                if STO not in L[0] or MRW not in L[1] or MWW not in L[n - 1]:
                    continue
                if not all(L[j - 1] & {MRW, MWW, MRF, PO, STO} for j in range(3, n)):
                    continue
                ok = True
                for j in range(2, n - 1):  # 1-indexed j in [2, n-2]
                    if MRW in L[j - 1] and not L[j] & {MRF, PO, MWW}:
                        ok = False
                    if MRW in L[j] and not L[j - 1] & {MRF, PO}:
                        ok = False
                for j in range(3, n - 2):  # 1-indexed j in [3, n-3]
                    if STO in L[j] and MRW in L[j + 1] and MWW not in L[j - 1]:
                        ok = False
                if ok:
                    return MoverProof("inconclusive", _witness(graph, rotated))
    except CycleBudgetExceeded as e:
        return MoverProof("inconclusive", None, str(e))
    return MoverProof("robust")


def _witness(graph, nodes):
    n = len(nodes)
    return tuple(
        (nodes[j], nodes[(j + 1) % n], graph.labels(nodes[j], nodes[(j + 1) % n]))
        for j in range(n)
    )


# ---------------------------------------------------------------------------
# DOT export


def to_dot(graph: CommutativityDependencyGraph, name: str = "cdg") -> str:
    lines = [f"digraph {name} {{"]
    for node in graph.nodes:
        lines.append(f'  "{node}";')
    for a, b, k in sorted(graph.edges):
        if k == STO:
            lines.append(f'  "{a}" -> "{b}" [label="STO", dir=none, style=dashed];')
        else:
            lines.append(f'  "{a}" -> "{b}" [label="{k}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"

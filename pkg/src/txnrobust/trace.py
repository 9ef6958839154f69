"""Trace model: events, dependency relations, happens-before, cycles.

A trace records a set of transactions (including a fictitious init
transaction that writes every shared variable and is program-order before
everything), per-transaction event sequences, the program order ``po``, the
read-from relation ``rf`` and the store order ``ws``.  The conflict order
``cf`` is always derived per variable as ``rf^-1 ; ws`` and never stored.

``rf`` is kept per variable internally (writer, reader, var) since the
derived ``cf`` composes read-from and store order on the same variable;
the JSON interchange schema projects it to transaction pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Optional

import networkx as nx

INIT_TID = "_init"

PO, RF, WS, CF = "PO", "RF", "WS", "CF"


@dataclass(frozen=True)
class Event:
    kind: str  # "read" | "write"
    tid: str
    var: str
    value: int


class Trace:
    """Immutable; equality and hashing follow trace identity: transaction
    set plus rf plus ws (po and events are determined by the program)."""

    def __init__(
        self,
        events: dict[str, tuple[Event, ...]],
        po: frozenset[tuple[str, str]],
        rf: frozenset[tuple[str, str, str]],
        ws: frozenset[tuple[str, str]],
        init_tid: str = INIT_TID,
    ):
        self.events = {t: tuple(evs) for t, evs in events.items()}
        self.tids = frozenset(self.events)
        self.po = frozenset(po)
        self.rf = frozenset(rf)
        self.ws = frozenset(ws)
        self.init_tid = init_tid
        if init_tid not in self.tids:
            raise ValueError(f"init transaction {init_tid} missing from events")

    # -- identity ----------------------------------------------------------

    def _key(self):
        return (self.tids, self.rf, self.ws)

    def __eq__(self, other) -> bool:
        return isinstance(other, Trace) and self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __repr__(self) -> str:
        return f"Trace(tids={sorted(self.tids)}, rf={sorted(self.rf)}, ws={sorted(self.ws)})"

    def sort_key(self):
        return (sorted(self.tids), sorted(self.rf), sorted(self.ws))

    # -- derived relations --------------------------------------------------

    @cached_property
    def rf_pairs(self) -> frozenset[tuple[str, str]]:
        return frozenset((w, r) for w, r, _ in self.rf)

    @cached_property
    def cf(self) -> frozenset[tuple[str, str]]:
        """cf = rf^-1 ; ws, composed per variable, between distinct txns."""
        out = set()
        for w, r, x in self.rf:
            for a, b in self.ws:
                if a == w and b != r and self._writes(b, x) and self._writes(a, x):
                    out.add((r, b))
        return frozenset(out)

    def _writes(self, tid: str, var: str) -> bool:
        return any(e.kind == "write" and e.var == var for e in self.events[tid])

    def writers(self, var: str) -> list[str]:
        return sorted(t for t in self.tids if self._writes(t, var))

    def last_write_value(self, tid: str, var: str) -> Optional[int]:
        for e in reversed(self.events[tid]):
            if e.kind == "write" and e.var == var:
                return e.value
        return None

    @cached_property
    def vis0(self) -> frozenset[tuple[str, str]]:
        return self.po | self.rf_pairs

    @cached_property
    def arb0(self) -> frozenset[tuple[str, str]]:
        return self.po | self.rf_pairs | self.ws


def transitive_closure(pairs: frozenset[tuple[str, str]], nodes) -> frozenset[tuple[str, str]]:
    idx = {t: i for i, t in enumerate(sorted(nodes))}
    names = sorted(nodes)
    n = len(names)
    rows = [0] * n
    for a, b in pairs:
        rows[idx[a]] |= 1 << idx[b]
    for k in range(n):
        bit = 1 << k
        row_k = rows[k]
        for i in range(n):
            if rows[i] & bit:
                rows[i] |= row_k
    out = set()
    for i in range(n):
        row = rows[i]
        j = 0
        while row:
            if row & 1:
                out.add((names[i], names[j]))
            row >>= 1
            j += 1
    return frozenset(out)


def is_acyclic(pairs: frozenset[tuple[str, str]], nodes) -> bool:
    closure = transitive_closure(pairs, nodes)
    return all(a != b for a, b in closure)


# ---------------------------------------------------------------------------
# happens-before


class HbGraph:
    """Nodes are transaction ids; each ordered pair carries the subset of
    {PO, RF, WS, CF} labels it holds in the source trace."""

    def __init__(self, trace: Trace):
        self.nodes = frozenset(trace.tids)
        self.init_tid = trace.init_tid
        labels: dict[tuple[str, str], set[str]] = {}
        for rel, tag in ((trace.po, PO), (trace.rf_pairs, RF), (trace.ws, WS), (trace.cf, CF)):
            for pair in rel:
                labels.setdefault(pair, set()).add(tag)
        self.edges = {pair: frozenset(tags) for pair, tags in labels.items()}

    @cached_property
    def closure(self) -> frozenset[tuple[str, str]]:
        return transitive_closure(frozenset(self.edges), self.nodes)

    def acyclic(self) -> bool:
        return all(a != b for a, b in self.closure)

    def reaches(self, a: str, b: str) -> bool:
        return (a, b) in self.closure

    def digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(sorted(self.nodes))
        for (a, b), tags in sorted(self.edges.items()):
            g.add_edge(a, b, labels=tags)
        return g


def hb(trace: Trace) -> HbGraph:
    return HbGraph(trace)


def member_ser(trace: Trace) -> bool:
    """A trace is serializable iff its happens-before is acyclic."""
    return hb(trace).acyclic()


# ---------------------------------------------------------------------------
# cycles


class CycleBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class CyclePattern:
    """A simple cycle with one dependency label chosen per edge.

    ``nodes[i] -> nodes[i+1]`` carries ``labels[i]``; the last edge closes
    back to ``nodes[0]``.  The flags wrap around the cycle.
    """

    nodes: tuple[str, ...]
    labels: tuple[str, ...]

    @property
    def has_two_successive_cf(self) -> bool:
        n = len(self.labels)
        return any(self.labels[i] == CF and self.labels[(i + 1) % n] == CF for i in range(n))

    @property
    def has_ws_then_cf(self) -> bool:
        n = len(self.labels)
        return any(self.labels[i] == WS and self.labels[(i + 1) % n] == CF for i in range(n))


def node_cycles(g: HbGraph, budget: int = 10**5) -> Iterator[tuple[str, ...]]:
    """Elementary circuits of the underlying digraph, init excluded (it can
    never be on a cycle: nothing happens-before init)."""
    assert not any(b == g.init_tid for _, b in g.edges), "init acquired an incoming edge"
    count = 0
    for cyc in nx.simple_cycles(g.digraph()):
        count += 1
        if count > budget:
            raise CycleBudgetExceeded(f"more than {budget} simple cycles")
        # canonical rotation: start at the smallest node
        k = cyc.index(min(cyc))
        yield tuple(cyc[k:] + cyc[:k])


def simple_cycles(g: HbGraph, budget: int = 10**5) -> Iterator[CyclePattern]:
    """All label assignments of all elementary circuits, flags included."""
    count = 0
    for nodes in node_cycles(g, budget):
        n = len(nodes)
        edge_labels = [sorted(g.edges[(nodes[i], nodes[(i + 1) % n])]) for i in range(n)]
        stack: list[tuple[str, ...]] = [()]
        while stack:
            prefix = stack.pop()
            if len(prefix) == n:
                count += 1
                if count > budget:
                    raise CycleBudgetExceeded(f"more than {budget} labelled cycles")
                yield CyclePattern(nodes, prefix)
                continue
            for lab in reversed(edge_labels[len(prefix)]):
                stack.append(prefix + (lab,))


def exists_cycle_without_two_successive_cf(g: HbGraph, budget: int = 10**5) -> bool:
    """Decides whether some labelled simple cycle avoids two successive cf.

    Per edge, a non-cf label is preferred whenever available, so only edges
    whose sole label is CF are forced; a qualifying labelling exists iff no
    two forced-cf edges are cyclically adjacent.
    """
    for nodes in node_cycles(g, budget):
        n = len(nodes)
        forced = [g.edges[(nodes[i], nodes[(i + 1) % n])] == frozenset((CF,)) for i in range(n)]
        if not any(forced[i] and forced[(i + 1) % n] for i in range(n)):
            return True
    return False


# ---------------------------------------------------------------------------
# merging split traces


def split_half_tids(tid: str) -> tuple[str, str]:
    return f"{tid}.r", f"{tid}.w"


def base_tid(tid: str) -> str:
    return tid[:-2] if tid.endswith((".r", ".w")) else tid


def merge_split_trace(t_rw: Trace) -> Trace:
    """Merge read/write halves back into whole transactions, projecting the
    dependency relations; inverse of splitting on its image.

    Halves are recognised by the ``.r``/``.w`` tid tagging used by the split
    transformation; untagged transactions pass through unchanged (they were
    singletons, for which splitting is the identity).
    """
    for tid in t_rw.tids:
        if tid.endswith((".r", ".w")) and base_tid(tid) in t_rw.tids:
            raise ValueError(f"tid {base_tid(tid)} collides with split half {tid}")
    events: dict[str, list[Event]] = {}
    order: dict[str, int] = {}
    for tid in sorted(t_rw.tids, key=lambda t: (base_tid(t), not t.endswith(".r"))):
        b = base_tid(tid)
        events.setdefault(b, [])
        events[b] += [Event(e.kind, b, e.var, e.value) for e in t_rw.events[tid]]
    def proj(pair):
        return (base_tid(pair[0]), base_tid(pair[1]))
    po = frozenset(p for p in map(proj, t_rw.po) if p[0] != p[1])
    rf = frozenset(
        (base_tid(w), base_tid(r), x) for w, r, x in t_rw.rf if base_tid(w) != base_tid(r)
    )
    ws = frozenset(p for p in map(proj, t_rw.ws) if p[0] != p[1])
    return Trace({t: tuple(evs) for t, evs in events.items()}, po, rf, ws, t_rw.init_tid)


# ---------------------------------------------------------------------------
# JSON interchange


def to_json(trace: Trace) -> str:
    """Canonical traces.json text; field order fixed, keys sorted, so files
    round-trip bit-exactly."""
    txns = []
    for tid in sorted(trace.tids):
        txns.append(
            {
                "tid": tid,
                "process": "" if tid == trace.init_tid else tid.split(".")[0],
                "events": [
                    {"kind": e.kind, "var": e.var, "value": e.value} for e in trace.events[tid]
                ],
            }
        )
    doc = {
        "transactions": txns,
        "po": sorted([a, b] for a, b in trace.po),
        "rf": sorted([a, b] for a, b in trace.rf_pairs),
        "ws": sorted([a, b] for a, b in trace.ws),
        "init": trace.init_tid,
    }
    return json.dumps(doc, indent=2) + "\n"


def from_json(text: str) -> Trace:
    doc = json.loads(text)
    events: dict[str, tuple[Event, ...]] = {}
    for t in doc["transactions"]:
        events[t["tid"]] = tuple(
            Event(e["kind"], t["tid"], e["var"], int(e["value"])) for e in t["events"]
        )
    init_tid = doc["init"]
    po = frozenset((a, b) for a, b in doc["po"])
    ws = frozenset((a, b) for a, b in doc["ws"])
    rf_pairs = frozenset((a, b) for a, b in doc["rf"])
    rf = _resolve_rf(events, rf_pairs, init_tid)
    t = Trace(events, po, rf, ws, init_tid)
    _validate(t)
    return t


def _resolve_rf(
    events: dict[str, tuple[Event, ...]],
    rf_pairs: frozenset[tuple[str, str]],
    init_tid: str,
) -> frozenset[tuple[str, str, str]]:
    """Recover per-variable read sources from the pairwise schema.

    Each read event picks the unique justifying writer where possible; when
    several writers in ``rf_pairs`` wrote the same value to the same
    variable, the lexicographically smallest consistent assignment is used.
    Fails if some pair cannot be justified by any read.
    """
    triples: set[tuple[str, str, str]] = set()
    used: set[tuple[str, str]] = set()
    for tid in sorted(events):
        for e in events[tid]:
            if e.kind != "read":
                continue
            cands = sorted(
                w
                for (w, r) in rf_pairs
                if r == tid
                and any(
                    we.kind == "write" and we.var == e.var and we.value == e.value
                    for we in events[w]
                )
                and _last_write(events[w], e.var) == e.value
            )
            if not cands:
                raise ValueError(f"no rf source for read {e} in {tid}")
            triples.add((cands[0], tid, e.var))
            used.add((cands[0], tid))
    unjustified = rf_pairs - frozenset((w, r) for w, r, _ in triples)
    for w, r in sorted(unjustified):
        # pair present but its obvious read already taken: attach to any read
        # of a variable w wrote with a matching value
        hit = False
        for e in events[r]:
            if e.kind == "read" and _last_write(events[w], e.var) == e.value:
                triples.add((w, r, e.var))
                hit = True
                break
        if not hit:
            raise ValueError(f"rf pair ({w}, {r}) not justified by any read")
    return frozenset(triples)


def _last_write(evs: tuple[Event, ...], var: str) -> Optional[int]:
    for e in reversed(evs):
        if e.kind == "write" and e.var == var:
            return e.value
    return None


def _validate(t: Trace) -> None:
    for w, r, x in t.rf:
        if _last_write(t.events[w], x) is None:
            raise ValueError(f"rf source {w} does not write {x}")
    for a, b in t.ws:
        common = {e.var for e in t.events[a] if e.kind == "write"} & {
            e.var for e in t.events[b] if e.kind == "write"
        }
        if not common:
            raise ValueError(f"ws pair ({a}, {b}) shares no written variable")
    for x in {e.var for evs in t.events.values() for e in evs}:
        ws_x = [(a, b) for a, b in t.ws if t._writes(a, x) and t._writes(b, x)]
        writers = t.writers(x)
        for i, a in enumerate(writers):
            for b in writers[i + 1 :]:
                if (a, b) not in t.ws and (b, a) not in t.ws:
                    raise ValueError(f"ws not total on {x}-writers: {a}, {b} unordered")
        if not is_acyclic(frozenset(ws_x), writers):
            raise ValueError(f"ws restricted to {x}-writers is cyclic")

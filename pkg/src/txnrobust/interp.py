"""Bounded exhaustive execution under serializability.

Transactions are atomic; an execution is a total order over them respecting
program order.  ``run_serial`` replays one schedule, ``enumerate_ser_traces``
explores every po-respecting interleaving of a program and collects the
traces of the completed ones, and ``check_assertion_reachable`` searches for
an assertion violation (used by the monitor instrumentation, whose processes
carry branching between transactions and so run as "slotted" programs).

Blocked schedules (a failed assume) contribute no trace: a blocked process
never commits, and robustness compares completed-trace sets.  Exceeding a
budget raises; it is never silently truncated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .lang import Program, Transaction, eval_assume, eval_expr
from .trace import INIT_TID, Event, Trace, transitive_closure


class ScheduleBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Blocked:
    tid: str


@dataclass
class StoreState:
    shared: dict[str, int]
    regs: dict[str, dict[str, int]]  # pid -> register valuation

    def snapshot(self):
        return (
            tuple(sorted(self.shared.items())),
            tuple((p, tuple(sorted(r.items()))) for p, r in sorted(self.regs.items())),
        )


def _initial_state(program) -> StoreState:
    shared = {v: program.initial_value(v) for v in sorted(program.var_names)}
    regs = {p.pid: {r: 0 for r in p.regs} for p in program.processes}
    return StoreState(shared, regs)


class AssertionViolated(Exception):
    def __init__(self, tid: str):
        self.tid = tid


def _exec_txn(txn: Transaction, pid: str, state: StoreState, recorder=None) -> Optional[Blocked]:
    """Execute one transaction atomically against ``state``.

    Returns Blocked when an assume fails (state unchanged is not guaranteed
    for registers already read, matching the log semantics where a blocked
    transaction never commits its writes).  Raises AssertionViolated when an
    assert evaluates false.
    """
    regs = state.regs[pid]
    for reg, var in txn.reads:
        val = state.shared[var]
        regs[reg] = val
        if recorder is not None:
            recorder.on_read(txn.tid, var, val)
    for cond in txn.assumes:
        if not eval_assume(cond, regs):
            return Blocked(txn.tid)
    for cond in txn.asserts:
        if not eval_expr(cond, regs):
            if recorder is not None:
                recorder.on_commit(txn.tid)
            raise AssertionViolated(txn.tid)
    for var, expr in txn.writes:
        val = eval_expr(expr, regs)
        state.shared[var] = val
        if recorder is not None:
            recorder.on_write(txn.tid, var, val)
    if recorder is not None:
        recorder.on_commit(txn.tid)
    return None


class _TraceRecorder:
    """Accumulates events, read sources and per-variable writer order."""

    def __init__(self, program: Program):
        self.program = program
        self.events: dict[str, list[Event]] = {INIT_TID: []}
        for v in sorted(program.var_names):
            self.events[INIT_TID].append(Event("write", INIT_TID, v, program.initial_value(v)))
        self.last_writer: dict[str, str] = {v: INIT_TID for v in program.var_names}
        self.rf: set[tuple[str, str, str]] = set()
        self.writer_seq: dict[str, list[str]] = {v: [INIT_TID] for v in program.var_names}
        self.pending: dict[str, list[Event]] = {}

    def on_read(self, tid: str, var: str, val: int) -> None:
        self.pending.setdefault(tid, []).append(Event("read", tid, var, val))
        self.rf.add((self.last_writer[var], tid, var))

    def on_write(self, tid: str, var: str, val: int) -> None:
        self.pending.setdefault(tid, []).append(Event("write", tid, var, val))

    def on_commit(self, tid: str) -> None:
        evs = self.pending.pop(tid, [])
        self.events[tid] = evs
        for e in evs:
            if e.kind == "write":
                self.last_writer[e.var] = tid
                self.writer_seq[e.var].append(tid)

    def build(self) -> Trace:
        program = self.program
        po = set()
        tids = [t for t in self.events if t != INIT_TID]
        for t in tids:
            po.add((INIT_TID, t))
        for p in program.processes:
            order = [t.tid for t in p.transactions if t.tid in self.events]
            for i, a in enumerate(order):
                for b in order[i + 1 :]:
                    po.add((a, b))
        ws = set()
        for var, seq in self.writer_seq.items():
            for i, a in enumerate(seq):
                for b in seq[i + 1 :]:
                    if a != b:
                        ws.add((a, b))
        return Trace(
            {t: tuple(evs) for t, evs in self.events.items()},
            frozenset(po),
            frozenset(self.rf),
            frozenset(ws),
        )


def po_respecting(program: Program, schedule: tuple[str, ...]) -> bool:
    pos = {tid: i for i, tid in enumerate(schedule)}
    if sorted(pos) != sorted(t.tid for t in program.transactions):
        return False
    for p in program.processes:
        order = [pos[t.tid] for t in p.transactions]
        if order != sorted(order):
            return False
    return True


def run_serial(program: Program, schedule: tuple[str, ...]) -> Union[tuple[StoreState, Trace], Blocked]:
    """Replay one complete po-respecting schedule; asserts are ignored by
    trace construction (they only matter to reachability)."""
    if not po_respecting(program, schedule):
        raise ValueError("schedule is not a po-respecting permutation of the program")
    state = _initial_state(program)
    rec = _TraceRecorder(program)
    by_tid = {t.tid: (p.pid, t) for p in program.processes for t in p.transactions}
    for tid in schedule:
        pid, txn = by_tid[tid]
        try:
            blocked = _exec_txn(txn, pid, state, rec)
        except AssertionViolated:
            blocked = None
        if blocked is not None:
            return blocked
    return state, rec.build()


def enumerate_schedules(program: Program, budget: int = 10**6):
    """Yield every complete po-respecting schedule, pruning at blocked
    prefixes; each yielded schedule comes with its final state and trace."""
    procs = [(p.pid, [t for t in p.transactions]) for p in program.processes]
    count = 0

    def walk(state: StoreState, rec: _TraceRecorder, positions: tuple[int, ...], prefix: tuple[str, ...]):
        nonlocal count
        if all(positions[i] == len(procs[i][1]) for i in range(len(procs))):
            count += 1
            if count > budget:
                raise ScheduleBudgetExceeded(f"more than {budget} schedules")
            yield prefix, state, rec.build()
            return
        for i, (pid, txns) in enumerate(procs):
            if positions[i] == len(txns):
                continue
            txn = txns[positions[i]]
            branch_state = StoreState(dict(state.shared), {p: dict(r) for p, r in state.regs.items()})
            branch_rec = _clone_recorder(rec)
            try:
                blocked = _exec_txn(txn, pid, branch_state, branch_rec)
            except AssertionViolated:
                blocked = None
            if blocked is not None:
                count += 1
                if count > budget:
                    raise ScheduleBudgetExceeded(f"more than {budget} schedules")
                continue
            new_pos = positions[:i] + (positions[i] + 1,) + positions[i + 1 :]
            yield from walk(branch_state, branch_rec, new_pos, prefix + (txn.tid,))

    state = _initial_state(program)
    rec = _TraceRecorder(program)
    yield from walk(state, rec, tuple(0 for _ in procs), ())


def _clone_recorder(rec: _TraceRecorder) -> _TraceRecorder:
    c = _TraceRecorder.__new__(_TraceRecorder)
    c.program = rec.program
    c.events = {t: list(evs) for t, evs in rec.events.items()}
    c.last_writer = dict(rec.last_writer)
    c.rf = set(rec.rf)
    c.writer_seq = {v: list(seq) for v, seq in rec.writer_seq.items()}
    c.pending = {t: list(evs) for t, evs in rec.pending.items()}
    return c


def enumerate_ser_traces(program: Program, budget: int = 10**6) -> frozenset[Trace]:
    """Traces of all completed serial interleavings, deduplicated by trace
    identity; deterministic for a fixed program and budget."""
    out: set[Trace] = set()
    for _, _, trace in enumerate_schedules(program, budget):
        out.add(trace)
    return frozenset(out)


# ---------------------------------------------------------------------------
# slotted programs (branching between transactions, used by the monitor)


@dataclass(frozen=True)
class TxnStep:
    txn: Transaction


@dataclass(frozen=True)
class ChoiceStep:
    options: tuple[Transaction, ...]


@dataclass(frozen=True)
class HaltStep:
    """The process is disabled from here on (an ``assume false``)."""


Step = Union[TxnStep, ChoiceStep, HaltStep]


@dataclass(frozen=True)
class SlotAlternative:
    name: str
    steps: tuple[Step, ...]


@dataclass(frozen=True)
class Slot:
    name: str  # original transaction id
    alternatives: tuple[SlotAlternative, ...]


@dataclass(frozen=True)
class SlottedProcess:
    pid: str
    regs: tuple[str, ...]
    slots: tuple[Slot, ...]


@dataclass(frozen=True)
class SlottedProgram:
    processes: tuple[SlottedProcess, ...]
    domain: tuple[int, ...]
    initial: tuple[tuple[str, int], ...]

    @property
    def var_names(self) -> frozenset[str]:
        names = set(v for v, _ in self.initial)
        for p in self.processes:
            for slot in p.slots:
                for alt in slot.alternatives:
                    for step in alt.steps:
                        for txn in _step_txns(step):
                            names |= txn.read_vars | txn.write_vars
        return frozenset(names)

    def initial_value(self, var: str) -> int:
        return dict(self.initial).get(var, 0)


def _step_txns(step: Step) -> tuple[Transaction, ...]:
    if isinstance(step, TxnStep):
        return (step.txn,)
    if isinstance(step, ChoiceStep):
        return step.options
    return ()


def as_slotted(program: Program) -> SlottedProgram:
    procs = []
    for p in program.processes:
        slots = tuple(
            Slot(t.tid, (SlotAlternative("base", (TxnStep(t),)),)) for t in p.transactions
        )
        procs.append(SlottedProcess(p.pid, p.regs, slots))
    return SlottedProgram(tuple(procs), program.domain, program.initial)


@dataclass(frozen=True)
class Reachable:
    schedule: tuple[tuple[str, str], ...]  # (pid, tid) of each executed txn
    failing_tid: str


@dataclass(frozen=True)
class Unreachable:
    pass


UNREACHABLE = Unreachable()


def check_assertion_reachable(
    target: Union[Program, SlottedProgram], budget: int = 10**6
) -> Union[Reachable, Unreachable]:
    """Depth-first search over serial interleavings for a schedule prefix
    whose last transaction violates an assert.

    States are memoised, so unreachable verdicts are exact for the finite
    state space; the budget bounds explored transitions.
    """
    prog = as_slotted(target) if isinstance(target, Program) else target
    shared0 = tuple(sorted((v, prog.initial_value(v)) for v in prog.var_names))
    procs = prog.processes
    regs0 = tuple(tuple((r, 0) for r in p.regs) for p in procs)
    # position per process: (slot_idx, alt_idx | -1, step_idx, option_committed)
    pos0 = tuple((0, -1, 0) for _ in procs)
    seen: set = set()
    steps_used = 0

    def moves(shared, regs, pos, i):
        """Enabled successor transactions of process i with their new local
        position; pure enumeration, no state change."""
        slot_idx, alt_idx, step_idx = pos[i]
        p = procs[i]
        if slot_idx >= len(p.slots):
            return
        slot = p.slots[slot_idx]
        if alt_idx < 0:
            for ai, alt in enumerate(slot.alternatives):
                step = alt.steps[0]
                for txn in _step_txns(step):
                    yield txn, _advance(p, slot_idx, ai, 0)
        else:
            alt = slot.alternatives[alt_idx]
            step = alt.steps[step_idx]
            if isinstance(step, HaltStep):
                return
            for txn in _step_txns(step):
                yield txn, _advance(p, slot_idx, alt_idx, step_idx)

    def _advance(p: SlottedProcess, slot_idx: int, alt_idx: int, step_idx: int):
        alt = p.slots[slot_idx].alternatives[alt_idx]
        if step_idx + 1 < len(alt.steps):
            return (slot_idx, alt_idx, step_idx + 1)
        return (slot_idx + 1, -1, 0)

    def search(shared, regs, pos, schedule):
        nonlocal steps_used
        key = (shared, regs, pos)
        if key in seen:
            return None
        seen.add(key)
        for i in range(len(procs)):
            for txn, newpos_i in moves(shared, regs, pos, i):
                steps_used += 1
                if steps_used > budget:
                    raise ScheduleBudgetExceeded(f"more than {budget} transitions")
                state = StoreState(dict(shared), {procs[i].pid: dict(regs[i])})
                try:
                    blocked = _exec_txn(txn, procs[i].pid, state)
                except AssertionViolated:
                    return Reachable(schedule + ((procs[i].pid, txn.tid),), txn.tid)
                if blocked is not None:
                    continue
                new_shared = tuple(sorted(state.shared.items()))
                new_regs = regs[:i] + (tuple(sorted(state.regs[procs[i].pid].items())),) + regs[i + 1 :]
                new_pos = pos[:i] + (newpos_i,) + pos[i + 1 :]
                hit = search(new_shared, new_regs, new_pos, schedule + ((procs[i].pid, txn.tid),))
                if hit is not None:
                    return hit
        return None

    shared0d = dict(shared0)
    for p in procs:
        for slot in p.slots:
            for alt in slot.alternatives:
                for step in alt.steps:
                    for txn in _step_txns(step):
                        for _, var in txn.reads:
                            shared0d.setdefault(var, 0)
    shared0 = tuple(sorted(shared0d.items()))
    regs_start = tuple(dict(r) for r in regs0)
    hit = search(shared0, tuple(tuple(sorted(r.items())) for r in regs_start), pos0, ())
    return hit if hit is not None else UNREACHABLE

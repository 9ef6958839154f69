"""Program-to-program transforms.

``split`` rewrites every transaction into a read half followed by a write
half (transactions that only read or only write stay as they are), which
lets serializability simulate prefix-consistent behaviour.  ``split_trace``
is the same operation on traces and ``merge_split_trace`` its inverse.

``instrument`` builds the PC-vs-SI monitor: each transaction is replaced by
a slot of alternatives — run untracked before a candidate is chosen, become
the candidate (execute only reads, pick a written variable as the store
witness, then disable the process), run tracked afterwards, or be skipped.
Tracked halves maintain the happens-before summary variables over the
lattice {bot=3, 0, 1, 2} and assert at commit that no path from the
candidate without two successive conflict edges reaches a transaction that
writes the candidate's chosen variable.  An assertion violation under SER
is exactly a PC-vs-SI robustness violation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .interp import (
    ChoiceStep,
    HaltStep,
    Reachable,
    Slot,
    SlotAlternative,
    SlottedProcess,
    SlottedProgram,
    TxnStep,
    Unreachable,
    _exec_txn,
    check_assertion_reachable,
    AssertionViolated,
    ScheduleBudgetExceeded,
    StoreState,
)
from .lang import (
    AssertInstr,
    AssumeInstr,
    BinOp,
    Const,
    Expr,
    Ite,
    Program,
    Process,
    ReadInstr,
    Reg,
    Transaction,
    WriteInstr,
    eval_expr,
)
from .models import ROBUST, UNKNOWN, VIOLATION, Model, RobustnessVerdict
from .trace import INIT_TID, Event, Trace, split_half_tids, transitive_closure

BOT = 3  # encodes the instrumentation's "undefined" lattice value


# ---------------------------------------------------------------------------
# read/write split


@dataclass(frozen=True)
class SplitProgram:
    program: Program
    origin_of: tuple[tuple[str, tuple[str, str]], ...]  # tid -> (original, half)

    def origin(self, tid: str) -> tuple[str, str]:
        return dict(self.origin_of)[tid]

    @property
    def sto_pairs(self) -> frozenset[tuple[str, str]]:
        """Read/write half pairs that came from one original transaction."""
        halves: dict[str, dict[str, str]] = {}
        for tid, (orig, half) in self.origin_of:
            halves.setdefault(orig, {})[half] = tid
        return frozenset(
            (h["read"], h["write"]) for h in halves.values() if len(h) == 2
        )


def split(program: Program) -> SplitProgram:
    """Split every mixed transaction of a normalized program; read-only and
    write-only transactions are kept unchanged (splitting them is the
    identity), and empty halves are dropped."""
    if not program.is_normal():
        raise ValueError("split requires a normalized program")
    origin: list[tuple[str, tuple[str, str]]] = []
    procs: list[Process] = []
    for p in program.processes:
        txns: list[Transaction] = []
        for t in p.transactions:
            has_r = bool(t.reads or t.assumes or t.asserts)
            has_w = bool(t.writes)
            if has_r and has_w:
                rid, wid = split_half_tids(t.tid)
                rbody = tuple(i for i in t.body if not isinstance(i, WriteInstr))
                wbody = tuple(i for i in t.body if isinstance(i, WriteInstr))
                txns.append(Transaction(rid, rbody))
                txns.append(Transaction(wid, wbody))
                origin.append((rid, (t.tid, "read")))
                origin.append((wid, (t.tid, "write")))
            else:
                txns.append(t)
                origin.append((t.tid, (t.tid, "write" if has_w else "read")))
        procs.append(Process(p.pid, p.regs, tuple(txns)))
    return SplitProgram(
        Program(tuple(procs), program.domain, program.initial), tuple(origin)
    )


def split_trace(t: Trace) -> Trace:
    """Trace-level split, matching ``split`` on programs: relations move to
    the half that carries the events (rf and ws to write halves, reads to
    read halves), with program order threading read half before write half."""
    mixed = {
        tid
        for tid in t.tids
        if tid != t.init_tid
        and any(e.kind == "read" for e in t.events[tid])
        and any(e.kind == "write" for e in t.events[tid])
    }

    def rhalf(tid: str) -> str:
        return split_half_tids(tid)[0] if tid in mixed else tid

    def whalf(tid: str) -> str:
        return split_half_tids(tid)[1] if tid in mixed else tid

    events: dict[str, tuple[Event, ...]] = {}
    for tid in t.tids:
        if tid in mixed:
            rid, wid = split_half_tids(tid)
            events[rid] = tuple(
                Event(e.kind, rid, e.var, e.value) for e in t.events[tid] if e.kind == "read"
            )
            events[wid] = tuple(
                Event(e.kind, wid, e.var, e.value) for e in t.events[tid] if e.kind == "write"
            )
        else:
            events[tid] = t.events[tid]
    po = set()
    for tid in mixed:
        po.add(split_half_tids(tid))
    for a, b in t.po:
        po.add((whalf(a), rhalf(b)))
    po = transitive_closure(frozenset(po), frozenset(events))
    rf = frozenset((whalf(w), rhalf(r), x) for w, r, x in t.rf)
    ws = frozenset((whalf(a), whalf(b)) for a, b in t.ws)
    return Trace(events, po, rf, ws, t.init_tid)


# ---------------------------------------------------------------------------
# Figure-style monitor instrumentation

DONE = "__done"
VARW = "__varW"
RDSET = "__rdSet"
WRSET = "__wrSet"


def _hbr(var: str) -> str:
    return f"__hbR_{var}"


def _hbw(var: str) -> str:
    return f"__hbW_{var}"


def _hbp(pid: str) -> str:
    return f"__hbP_{pid}"


@dataclass(frozen=True)
class InstrumentedProgram:
    slotted: SlottedProgram
    base: Program
    aux_shared: tuple[tuple[str, int], ...]  # name -> initial value
    var_index: tuple[tuple[str, int], ...]
    role_of: tuple[tuple[str, tuple[str, str]], ...]  # instr tid -> (orig tid, role)

    def role(self, tid: str) -> tuple[str, str]:
        return dict(self.role_of)[tid]


def _c(v: int) -> Expr:
    return Const(v)


def _eq(a: Expr, b: int) -> Expr:
    return BinOp("==", a, _c(b))


def _ne(a: Expr, b: int) -> Expr:
    return BinOp("!=", a, _c(b))


def _and(*parts: Expr) -> Expr:
    out = parts[0]
    for p in parts[1:]:
        out = BinOp("and", out, p)
    return out


def _min(a: Expr, b: Expr) -> Expr:
    return BinOp("min", a, b)


def _bit(setreg: Expr, mask: int) -> Expr:
    return BinOp("!=", BinOp("band", setreg, _c(mask)), _c(0))


def _hb_begin(hbp: Expr) -> Expr:
    # hb := bot; if (hbP != bot and hbP < 2) hb := 0; else if (hbP == 2) hb := 2
    return Ite(_eq(hbp, BOT), _c(BOT), Ite(BinOp("<", hbp, _c(2)), _c(0), _c(2)))


def _hb_write_dep(hb: Expr, in_wrset: Expr, hbw: Expr) -> Expr:
    # if (x in wrSet): if (hbW[x] != 2) hb := 0; else if (hb == bot) hb := hbW[x]
    return Ite(in_wrset, Ite(_ne(hbw, 2), _c(0), Ite(_eq(hb, BOT), hbw, hb)), hb)


def _hb_read_dep(hb: Expr, in_rdset: Expr, hbr: Expr) -> Expr:
    # if (x in rdSet) and (hb == bot or hb > hbR[x]+1): hb := min(hbR[x]+1, 2)
    # with bot = 3 the guarded assignment is a plain lattice min
    return Ite(in_rdset, _min(hb, _min(BinOp("+", hbr, _c(1)), _c(2))), hb)


def instrument(program: Program) -> InstrumentedProgram:
    """Rewrite every transaction per the monitor template; the result runs
    under plain serializability via ``check_assertion_reachable``."""
    if not program.is_normal():
        raise ValueError("instrument requires a normalized program")
    variables = sorted(program.var_names)
    vidx = {x: i for i, x in enumerate(variables)}
    code = {x: i + 1 for i, x in enumerate(variables)}  # varW codes; 0 is bot
    bits = lambda xs: sum(1 << vidx[x] for x in set(xs))

    aux: list[tuple[str, int]] = [(DONE, 0), (VARW, 0), (RDSET, 0), (WRSET, 0)]
    for x in variables:
        aux.append((_hbr(x), BOT))
        aux.append((_hbw(x), BOT))

    roles: list[tuple[str, tuple[str, str]]] = []
    procs: list[SlottedProcess] = []
    for p in program.processes:
        aux.append((_hbp(p.pid), BOT))
        aux_regs = ["__g", "__vw", "__hbp", "__rdset", "__wrset"]
        aux_regs += [f"__hbw_{x}" for x in variables] + [f"__hbr_{x}" for x in variables]
        regs = tuple(list(p.regs) + aux_regs)
        slots = []
        for t in p.transactions:
            slots.append(_build_slot(t, p.pid, vidx, code, bits, roles))
        procs.append(SlottedProcess(p.pid, regs, tuple(slots)))

    slotted = SlottedProgram(
        tuple(procs),
        program.domain,
        tuple(list(program.initial) + aux),
    )
    return InstrumentedProgram(
        slotted,
        program,
        tuple(aux),
        tuple(sorted(vidx.items())),
        tuple(roles),
    )


def _build_slot(t: Transaction, pid: str, vidx, code, bits, roles) -> Slot:
    rvars = [v for _, v in t.reads]
    wvars = [v for v, _ in t.writes]
    has_r = bool(t.reads or t.assumes)
    has_w = bool(t.writes)

    guard0 = [ReadInstr("__g", DONE), AssumeInstr(_eq(Reg("__g"), 0))]
    guard1 = [ReadInstr("__g", DONE), AssumeInstr(_eq(Reg("__g"), 1))]

    def untracked_read() -> Transaction:
        body = [ReadInstr(r, v) for r, v in t.reads] + guard0[:1]
        body += [guard0[1]] + [AssumeInstr(c) for c in t.assumes]
        roles.append((f"{t.tid}.r", (t.tid, "read-before")))
        return Transaction(f"{t.tid}.r", tuple(body))

    def untracked_write() -> Transaction:
        body = guard0 + [WriteInstr(v, e) for v, e in t.writes]
        roles.append((f"{t.tid}.w", (t.tid, "write-before")))
        return Transaction(f"{t.tid}.w", tuple(body))

    def tracked_read() -> Transaction:
        reads = [ReadInstr(r, v) for r, v in t.reads]
        reads += guard1[:1] + [ReadInstr("__hbp", _hbp(pid)), ReadInstr("__wrset", WRSET)]
        reads += [ReadInstr("__rdset", RDSET)]
        reads += [ReadInstr(f"__hbw_{x}", _hbw(x)) for x in sorted(set(rvars))]
        reads += [ReadInstr(f"__hbr_{x}", _hbr(x)) for x in sorted(set(rvars))]
        hb = _hb_begin(Reg("__hbp"))
        for _, x in t.reads:
            hb = _hb_write_dep(hb, _bit(Reg("__wrset"), 1 << vidx[x]), Reg(f"__hbw_{x}"))
        body = reads + [guard1[1]] + [AssumeInstr(c) for c in t.assumes]
        body += [AssumeInstr(_ne(hb, BOT))]
        body += [WriteInstr(_hbp(pid), _min(Reg("__hbp"), hb))]
        body += [WriteInstr(_hbr(x), _min(Reg(f"__hbr_{x}"), hb)) for x in sorted(set(rvars))]
        body += [WriteInstr(RDSET, BinOp("bor", Reg("__rdset"), _c(bits(rvars))))]
        roles.append((f"{t.tid}.rt", (t.tid, "read-tracked")))
        return Transaction(f"{t.tid}.rt", tuple(body))

    def tracked_write(name: str, role: str, rd_prime: list[str]) -> Transaction:
        wset = sorted(set(wvars))
        reads = guard1[:1] + [
            ReadInstr("__vw", VARW),
            ReadInstr("__hbp", _hbp(pid)),
            ReadInstr("__rdset", RDSET),
            ReadInstr("__wrset", WRSET),
        ]
        reads += [ReadInstr(f"__hbw_{x}", _hbw(x)) for x in wset]
        reads += [ReadInstr(f"__hbr_{x}", _hbr(x)) for x in sorted(set(wset) | set(rd_prime))]
        hb = _hb_begin(Reg("__hbp"))
        for x, _ in t.writes:
            hb = _hb_write_dep(hb, _bit(Reg("__wrset"), 1 << vidx[x]), Reg(f"__hbw_{x}"))
            hb = _hb_read_dep(hb, _bit(Reg("__rdset"), 1 << vidx[x]), Reg(f"__hbr_{x}"))
        body = reads + [guard1[1], AssumeInstr(_ne(hb, BOT))]
        not_w = [_ne(Reg("__vw"), code[x]) for x in wset]
        body += [AssertInstr(BinOp("or", _eq(hb, 2), _and(*not_w)))]
        body += [WriteInstr(v, e) for v, e in t.writes]
        body += [WriteInstr(_hbp(pid), _min(Reg("__hbp"), hb))]
        body += [WriteInstr(_hbw(x), _min(Reg(f"__hbw_{x}"), hb)) for x in wset]
        body += [WriteInstr(_hbr(x), _min(Reg(f"__hbr_{x}"), hb)) for x in sorted(rd_prime)]
        if rd_prime:
            body += [WriteInstr(RDSET, BinOp("bor", Reg("__rdset"), _c(bits(rd_prime))))]
        body += [WriteInstr(WRSET, BinOp("bor", Reg("__wrset"), _c(bits(wvars))))]
        roles.append((f"{t.tid}.{name}", (t.tid, role)))
        return Transaction(f"{t.tid}.{name}", tuple(body))

    def candidate(x: str) -> Transaction:
        body = [ReadInstr(r, v) for r, v in t.reads] + guard0[:1]
        body += [ReadInstr("__rdset", RDSET)]
        body += [guard0[1]] + [AssumeInstr(c) for c in t.assumes]
        body += [WriteInstr(_hbr(y), _c(0)) for y in sorted(set(rvars))]
        if rvars:
            body += [WriteInstr(RDSET, BinOp("bor", Reg("__rdset"), _c(bits(rvars))))]
        body += [WriteInstr(VARW, _c(code[x])), WriteInstr(DONE, _c(1))]
        roles.append((f"{t.tid}.cand_{x}", (t.tid, f"candidate:{x}")))
        return Transaction(f"{t.tid}.cand_{x}", tuple(body))

    def noop_before() -> Transaction:
        roles.append((f"{t.tid}.nop", (t.tid, "empty-before")))
        return Transaction(f"{t.tid}.nop", tuple(guard0))

    # There is deliberately no way to jump over a transaction once a
    # candidate is chosen: a transaction with no happens-before path from
    # the candidate commutes back before it and can run untracked there
    # instead, whereas skipping would let a process advance past a
    # transaction that can never commit and fabricate violations.
    alts: list[SlotAlternative] = []
    if has_r:
        steps: list = [TxnStep(untracked_read())]
        if has_w:
            steps.append(ChoiceStep((untracked_write(), tracked_write("wt0", "write-straddle", []))))
        alts.append(SlotAlternative("before", tuple(steps)))
    elif has_w:
        alts.append(SlotAlternative("before", (TxnStep(untracked_write()),)))
    else:
        # an empty transaction still advances its process before a candidate
        alts.append(SlotAlternative("before", (TxnStep(noop_before()),)))
    for x in sorted(set(wvars)):
        alts.append(SlotAlternative(f"cand-{x}", (TxnStep(candidate(x)), HaltStep())))
    after: list = []
    if has_r or not has_w:
        # the read half; for an empty transaction this is the connected
        # no-op (program order alone can carry the happens-before path on)
        after.append(TxnStep(tracked_read()))
    if has_w:
        after.append(TxnStep(tracked_write("wt", "write-tracked", sorted(set(rvars)) if has_r else [])))
    alts.append(SlotAlternative("after", tuple(after)))
    return Slot(t.tid, tuple(alts))


# ---------------------------------------------------------------------------
# the monitor verdict


def check_robust_pc_si_via_monitor(program: Program, budget: int = 10**6) -> RobustnessVerdict:
    """Robust iff the instrumented program cannot violate its assertion
    under serializability."""
    from .lang import normalize

    ip = instrument(normalize(program))
    try:
        res = check_assertion_reachable(ip.slotted, budget)
    except ScheduleBudgetExceeded as e:
        return RobustnessVerdict(Model.PC, Model.SI, UNKNOWN, "reduction", reason=str(e))
    if isinstance(res, Unreachable):
        return RobustnessVerdict(Model.PC, Model.SI, ROBUST, "reduction")
    witness = monitor_witness_trace(ip, res)
    return RobustnessVerdict(
        Model.PC,
        Model.SI,
        VIOLATION,
        "reduction",
        witness_trace=witness[0],
        witness_schedule=res.schedule,
    )


def monitor_witness_trace(ip: InstrumentedProgram, res: Reachable):
    """Project a monitor run back to a (partial) trace of the base program:
    committed halves merge into their original transactions and the
    candidate's delayed writes are appended as the last writes in store
    order.  Returns (trace, candidate_tid, asserting_tid)."""
    base = ip.base
    real_vars = set(base.var_names)
    txn_by_tid = {}
    for p in ip.slotted.processes:
        for slot in p.slots:
            for alt in slot.alternatives:
                for step in alt.steps:
                    for txn in (step.options if isinstance(step, ChoiceStep) else (step.txn,) if isinstance(step, TxnStep) else ()):
                        txn_by_tid[txn.tid] = (p.pid, txn)
    shared = {v: ip.slotted.initial_value(v) for v in ip.slotted.var_names}
    regs = {p.pid: {r: 0 for r in p.regs} for p in ip.slotted.processes}
    state = StoreState(shared, regs)

    events: dict[str, list[Event]] = {INIT_TID: []}
    for v in sorted(real_vars):
        events[INIT_TID].append(Event("write", INIT_TID, v, base.initial_value(v)))
    last_writer = {v: INIT_TID for v in real_vars}
    writer_seq = {v: [INIT_TID] for v in real_vars}
    rf: set[tuple[str, str, str]] = set()
    cand_orig = None
    cand_regs: dict[str, int] = {}
    cand_pid = None
    assert_orig = None

    for pid, tid in res.schedule:
        orig, role = ip.role(tid)
        _, txn = txn_by_tid[tid]
        if role == "skip":
            _run_silently(txn, pid, state)
            continue
        pre_regs = dict(state.regs[pid])
        for reg, var in txn.reads:
            val = state.shared[var]
            state.regs[pid][reg] = val
            if var in real_vars:
                events.setdefault(orig, []).append(Event("read", orig, var, val))
                rf.add((last_writer[var], orig, var))
        violated = False
        for cond in txn.asserts:
            if not eval_expr(cond, state.regs[pid]):
                violated = True
        for var, expr in txn.writes:
            val = eval_expr(expr, state.regs[pid])
            state.shared[var] = val
            if var in real_vars:
                events.setdefault(orig, []).append(Event("write", orig, var, val))
                last_writer[var] = orig
                writer_seq[var].append(orig)
        if role.startswith("candidate"):
            cand_orig = orig
            cand_pid = pid
            cand_regs = dict(state.regs[pid])
        if violated:
            assert_orig = orig
            break

    # delayed writes of the candidate, store-ordered after everything
    if cand_orig is not None:
        t = base.transaction(cand_orig)
        for var, expr in t.writes:
            val = eval_expr(expr, cand_regs)
            events.setdefault(cand_orig, []).append(Event("write", cand_orig, var, val))
            writer_seq[var].append(cand_orig)

    tids = set(events)
    po = set()
    for t_ in tids - {INIT_TID}:
        po.add((INIT_TID, t_))
    for p in base.processes:
        order = [t.tid for t in p.transactions if t.tid in tids]
        for i, a in enumerate(order):
            for b in order[i + 1 :]:
                po.add((a, b))
    ws = set()
    for var, seq in writer_seq.items():
        for i, a in enumerate(seq):
            for b in seq[i + 1 :]:
                if a != b:
                    ws.add((a, b))
    trace = Trace(
        {t_: tuple(evs) for t_, evs in events.items()},
        frozenset(po),
        frozenset(rf),
        frozenset(ws),
    )
    return trace, cand_orig, assert_orig


def _run_silently(txn: Transaction, pid: str, state: StoreState) -> None:
    try:
        _exec_txn(txn, pid, state)
    except AssertionViolated:
        pass


def print_instrumented(ip: InstrumentedProgram) -> str:
    """Canonical text listing of an instrumented program: slot structure
    with the compiled transactions in concrete syntax.  Deterministic, for
    golden-diff tests; not meant to be re-parsed (the branching between
    transactions has no surface syntax)."""
    from .lang import print_transaction

    lines = ["instrumented program (pc-si monitor)"]
    lines.append("domain " + " ".join(str(v) for v in ip.slotted.domain))
    for name, val in ip.aux_shared:
        lines.append(f"aux {name} {val}")
    for p in ip.slotted.processes:
        lines.append(f"process {p.pid}")
        for slot in p.slots:
            lines.append(f"  slot {slot.name}")
            for alt in slot.alternatives:
                lines.append(f"    alt {alt.name}")
                for step in alt.steps:
                    if isinstance(step, TxnStep):
                        lines.append("      " + print_transaction(step.txn))
                    elif isinstance(step, ChoiceStep):
                        lines.append("      choice")
                        for txn in step.options:
                            lines.append("        " + print_transaction(txn))
                    else:
                        lines.append("      halt")
    return "\n".join(lines) + "\n"

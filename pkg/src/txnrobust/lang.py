"""Transactional mini-language: AST, parser, canonical printer, normalizer.

Programs are parallel compositions of processes; each process owns a set of
registers and an ordered list of transactions.  A transaction in *normal
form* is a sequence of reads, then assumes (and asserts, in instrumented
programs), then writes.  The parser also accepts labelled instructions and
``goto`` for bounded intra-transaction control flow; :func:`normalize`
flattens those away.

The concrete grammar is documented in ``docs/grammar.md`` and honoured
bit-exactly by :func:`parse` and :func:`print_program`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Union


# ---------------------------------------------------------------------------
# expressions


@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Reg:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class BinOp:
    op: str  # + - min band bor == != < <= > >= and or
    left: Expr
    right: Expr

    def __str__(self) -> str:
        if self.op == "min":
            return f"min({self.left}, {self.right})"
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Not:
    arg: Expr

    def __str__(self) -> str:
        return f"(not {self.arg})"


@dataclass(frozen=True)
class Ite:
    cond: Expr
    then: Expr
    other: Expr

    def __str__(self) -> str:
        return f"ite({self.cond}, {self.then}, {self.other})"


@dataclass(frozen=True)
class Star:
    """Nondeterministic boolean choice, only legal under ``assume``."""

    def __str__(self) -> str:
        return "*"


Expr = Union[Const, Reg, BinOp, Not, Ite, Star]

_ARITH = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "min": min,
    "band": lambda a, b: a & b,
    "bor": lambda a, b: a | b,
    "==": lambda a, b: int(a == b),
    "!=": lambda a, b: int(a != b),
    "<": lambda a, b: int(a < b),
    "<=": lambda a, b: int(a <= b),
    ">": lambda a, b: int(a > b),
    ">=": lambda a, b: int(a >= b),
    "and": lambda a, b: int(bool(a) and bool(b)),
    "or": lambda a, b: int(bool(a) or bool(b)),
}


def eval_expr(expr: Expr, regs: dict[str, int]) -> int:
    """Evaluate an expression over a register valuation.

    ``Star`` must be resolved by the caller before evaluation; see
    :func:`eval_assume`.
    """
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Reg):
        return regs.get(expr.name, 0)
    if isinstance(expr, BinOp):
        return _ARITH[expr.op](eval_expr(expr.left, regs), eval_expr(expr.right, regs))
    if isinstance(expr, Not):
        return int(not eval_expr(expr.arg, regs))
    if isinstance(expr, Ite):
        return (
            eval_expr(expr.then, regs)
            if eval_expr(expr.cond, regs)
            else eval_expr(expr.other, regs)
        )
    if isinstance(expr, Star):
        raise ValueError("nondeterministic * cannot be evaluated directly")
    raise TypeError(f"not an expression: {expr!r}")


def eval_assume(expr: Expr, regs: dict[str, int]) -> bool:
    """True iff the assume can pass.  `*` may always pass; its blocking
    branch never contributes a completed execution."""
    if isinstance(expr, Star):
        return True
    return bool(eval_expr(expr, regs))


def expr_regs(expr: Expr) -> frozenset[str]:
    if isinstance(expr, Reg):
        return frozenset((expr.name,))
    if isinstance(expr, BinOp):
        return expr_regs(expr.left) | expr_regs(expr.right)
    if isinstance(expr, Not):
        return expr_regs(expr.arg)
    if isinstance(expr, Ite):
        return expr_regs(expr.cond) | expr_regs(expr.then) | expr_regs(expr.other)
    return frozenset()


def subst(expr: Expr, env: dict[str, Expr]) -> Expr:
    """Substitute registers by expressions (used by the normalizer's
    transaction-log pass)."""
    if isinstance(expr, Reg):
        return env.get(expr.name, expr)
    if isinstance(expr, BinOp):
        return BinOp(expr.op, subst(expr.left, env), subst(expr.right, env))
    if isinstance(expr, Not):
        return Not(subst(expr.arg, env))
    if isinstance(expr, Ite):
        return Ite(subst(expr.cond, env), subst(expr.then, env), subst(expr.other, env))
    return expr


# ---------------------------------------------------------------------------
# instructions


@dataclass(frozen=True)
class ReadInstr:
    reg: str
    var: str
    label: Optional[str] = None


@dataclass(frozen=True)
class AssumeInstr:
    cond: Expr
    label: Optional[str] = None


@dataclass(frozen=True)
class AssertInstr:
    cond: Expr
    label: Optional[str] = None


@dataclass(frozen=True)
class WriteInstr:
    var: str
    expr: Expr
    label: Optional[str] = None


@dataclass(frozen=True)
class GotoInstr:
    target: str
    label: Optional[str] = None


Instr = Union[ReadInstr, AssumeInstr, AssertInstr, WriteInstr, GotoInstr]


@dataclass(frozen=True)
class Transaction:
    tid: str
    body: tuple[Instr, ...]
    bound: int = 1  # goto unfolding bound declared in source

    @property
    def reads(self) -> tuple[tuple[str, str], ...]:
        return tuple((i.reg, i.var) for i in self.body if isinstance(i, ReadInstr))

    @property
    def assumes(self) -> tuple[Expr, ...]:
        return tuple(i.cond for i in self.body if isinstance(i, AssumeInstr))

    @property
    def asserts(self) -> tuple[Expr, ...]:
        return tuple(i.cond for i in self.body if isinstance(i, AssertInstr))

    @property
    def writes(self) -> tuple[tuple[str, Expr], ...]:
        return tuple((i.var, i.expr) for i in self.body if isinstance(i, WriteInstr))

    @property
    def read_vars(self) -> frozenset[str]:
        return frozenset(v for _, v in self.reads)

    @property
    def write_vars(self) -> frozenset[str]:
        return frozenset(v for v, _ in self.writes)

    def is_normal(self) -> bool:
        """Reads, then assumes/asserts, then writes; no gotos; no repeated
        read of one variable; one write per variable."""
        phase = 0  # 0 reads, 1 tests, 2 writes
        for i in self.body:
            if isinstance(i, GotoInstr) or i.label is not None:
                return False
            k = 0 if isinstance(i, ReadInstr) else 2 if isinstance(i, WriteInstr) else 1
            if k < phase:
                return False
            phase = k
        seen_r = [v for _, v in self.reads]
        seen_w = [v for v, _ in self.writes]
        return len(set(seen_r)) == len(seen_r) and len(set(seen_w)) == len(seen_w)


@dataclass(frozen=True)
class Process:
    pid: str
    regs: tuple[str, ...]
    transactions: tuple[Transaction, ...]


@dataclass(frozen=True)
class Program:
    processes: tuple[Process, ...]
    domain: tuple[int, ...] = (0, 1)
    initial: tuple[tuple[str, int], ...] = ()  # non-zero initial shared values

    @property
    def var_names(self) -> frozenset[str]:
        names = set(v for v, _ in self.initial)
        for p in self.processes:
            for t in p.transactions:
                names |= t.read_vars | t.write_vars
        return frozenset(names)

    @property
    def transactions(self) -> tuple[Transaction, ...]:
        return tuple(t for p in self.processes for t in p.transactions)

    def transaction(self, tid: str) -> Transaction:
        for p in self.processes:
            for t in p.transactions:
                if t.tid == tid:
                    return t
        raise KeyError(tid)

    def process_of(self, tid: str) -> str:
        for p in self.processes:
            for t in p.transactions:
                if t.tid == tid:
                    return p.pid
        raise KeyError(tid)

    def initial_value(self, var: str) -> int:
        return dict(self.initial).get(var, 0)

    def is_normal(self) -> bool:
        return all(t.is_normal() for t in self.transactions)


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def well_formed(program: Program) -> list[Diagnostic]:
    """Structural checks; an empty list means all Program invariants hold."""
    out: list[Diagnostic] = []
    pids = [p.pid for p in program.processes]
    for pid in sorted({p for p in pids if pids.count(p) > 1}):
        out.append(Diagnostic("DuplicateProcessId", f"process {pid} declared twice"))
    tids = [t.tid for t in program.transactions]
    for tid in sorted({t for t in tids if tids.count(t) > 1}):
        out.append(Diagnostic("DuplicateTransactionId", f"transaction {tid} declared twice"))
    for p in program.processes:
        declared = set(p.regs)
        for t in p.transactions:
            labels = {i.label for i in t.body if i.label is not None}
            assigned: set[str] = set()
            for i in t.body:
                if isinstance(i, GotoInstr) and i.target not in labels:
                    out.append(
                        Diagnostic("UndefinedLabel", f"goto {i.target} in {t.tid} has no target")
                    )
                used: frozenset[str] = frozenset()
                if isinstance(i, (AssumeInstr, AssertInstr)):
                    used = expr_regs(i.cond)
                elif isinstance(i, WriteInstr):
                    used = expr_regs(i.expr)
                for r in sorted(used - declared):
                    out.append(
                        Diagnostic("UndeclaredRegister", f"register {r} used in {t.tid} not declared by {p.pid}")
                    )
                if isinstance(i, ReadInstr):
                    if i.reg not in declared:
                        out.append(
                            Diagnostic("UndeclaredRegister", f"register {i.reg} used in {t.tid} not declared by {p.pid}")
                        )
                    assigned.add(i.reg)
    for v, val in program.initial:
        if val not in program.domain:
            out.append(Diagnostic("InitialValueOutsideDomain", f"init {v} {val}"))
    return out


# ---------------------------------------------------------------------------
# parser


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<num>-?\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<op>==|!=|<=|>=|[{}();:<>*+\-,])
""",
    re.VERBOSE,
)

_KEYWORDS = {
    "program", "domain", "init", "process", "regs", "txn", "bound",
    "read", "assume", "assert", "write", "goto",
    "and", "or", "not", "ite", "min", "band", "bor",
}


class _Tokens:
    def __init__(self, text: str):
        self.toks: list[tuple[str, str, int, int]] = []
        line, col, pos = 1, 1, 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if not m:
                raise ParseError(f"unexpected character {text[pos]!r}", line, col)
            kind = m.lastgroup or ""
            val = m.group()
            if kind not in ("ws", "comment"):
                self.toks.append((kind, val, line, col))
            nl = val.count("\n")
            if nl:
                line += nl
                col = len(val) - val.rfind("\n")
            else:
                col += len(val)
            pos = m.end()
        self.toks.append(("eof", "", line, col))
        self.i = 0

    def peek(self) -> tuple[str, str, int, int]:
        return self.toks[self.i]

    def next(self) -> tuple[str, str, int, int]:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, val: str) -> tuple[str, str, int, int]:
        kind, v, line, col = self.peek()
        if v != val:
            raise ParseError(f"expected {val!r}, found {v or 'end of input'!r}", line, col)
        return self.next()

    def accept(self, val: str) -> bool:
        if self.peek()[1] == val:
            self.next()
            return True
        return False

    def name(self, what: str) -> str:
        kind, v, line, col = self.peek()
        if kind != "name" or v in _KEYWORDS:
            raise ParseError(f"expected {what}, found {v or 'end of input'!r}", line, col)
        self.next()
        return v

    def error(self, message: str):
        _, _, line, col = self.peek()
        raise ParseError(message, line, col)


def _parse_expr(tk: _Tokens) -> Expr:
    return _parse_or(tk)


def _parse_or(tk: _Tokens) -> Expr:
    e = _parse_and(tk)
    while tk.accept("or"):
        e = BinOp("or", e, _parse_and(tk))
    return e


def _parse_and(tk: _Tokens) -> Expr:
    e = _parse_cmp(tk)
    while tk.accept("and"):
        e = BinOp("and", e, _parse_cmp(tk))
    return e


def _parse_cmp(tk: _Tokens) -> Expr:
    e = _parse_sum(tk)
    for op in ("==", "!=", "<=", ">=", "<", ">"):
        if tk.accept(op):
            return BinOp(op, e, _parse_sum(tk))
    return e


def _parse_sum(tk: _Tokens) -> Expr:
    e = _parse_atom(tk)
    while True:
        if tk.accept("+"):
            e = BinOp("+", e, _parse_atom(tk))
        elif tk.accept("-"):
            e = BinOp("-", e, _parse_atom(tk))
        elif tk.accept("band"):
            e = BinOp("band", e, _parse_atom(tk))
        elif tk.accept("bor"):
            e = BinOp("bor", e, _parse_atom(tk))
        else:
            return e


def _parse_atom(tk: _Tokens) -> Expr:
    kind, v, line, col = tk.peek()
    if tk.accept("("):
        e = _parse_expr(tk)
        tk.expect(")")
        return e
    if tk.accept("*"):
        return Star()
    if tk.accept("not"):
        return Not(_parse_atom(tk))
    if tk.accept("ite"):
        tk.expect("(")
        c = _parse_expr(tk)
        tk.expect(",")
        a = _parse_expr(tk)
        tk.expect(",")
        b = _parse_expr(tk)
        tk.expect(")")
        return Ite(c, a, b)
    if tk.accept("min"):
        tk.expect("(")
        a = _parse_expr(tk)
        tk.expect(",")
        b = _parse_expr(tk)
        tk.expect(")")
        return BinOp("min", a, b)
    if kind == "num":
        tk.next()
        return Const(int(v))
    if kind == "name" and v not in _KEYWORDS:
        tk.next()
        return Reg(v)
    tk.error(f"expected expression, found {v or 'end of input'!r}")
    raise AssertionError


def _parse_stmt(tk: _Tokens) -> Instr:
    label = None
    kind, v, _, _ = tk.peek()
    if kind == "name" and v not in _KEYWORDS and tk.toks[tk.i + 1][1] == ":":
        label = tk.name("label")
        tk.expect(":")
    if tk.accept("read"):
        reg = tk.name("register")
        var = tk.name("shared variable")
        return ReadInstr(reg, var, label)
    if tk.accept("assume"):
        return AssumeInstr(_parse_expr(tk), label)
    if tk.accept("assert"):
        return AssertInstr(_parse_expr(tk), label)
    if tk.accept("write"):
        var = tk.name("shared variable")
        return WriteInstr(var, _parse_expr(tk), label)
    if tk.accept("goto"):
        return GotoInstr(tk.name("label"), label)
    tk.error(f"expected statement, found {tk.peek()[1]!r}")
    raise AssertionError


def parse(text: str) -> Program:
    """Parse program source; raises :class:`ParseError` with line/column."""
    tk = _Tokens(text)
    tk.expect("program")
    domain: tuple[int, ...] = (0, 1)
    if tk.accept("domain"):
        vals = []
        while tk.peek()[0] == "num":
            vals.append(int(tk.next()[1]))
        if not vals:
            tk.error("domain declaration needs at least one value")
        domain = tuple(sorted(set(vals)))
    initial: list[tuple[str, int]] = []
    while tk.accept("init"):
        var = tk.name("shared variable")
        kind, v, line, col = tk.peek()
        if kind != "num":
            raise ParseError("expected initial value", line, col)
        tk.next()
        initial.append((var, int(v)))
    processes: list[Process] = []
    while tk.accept("process"):
        pid = tk.name("process id")
        regs: list[str] = []
        if tk.accept("regs"):
            while tk.peek()[0] == "name" and tk.peek()[1] not in _KEYWORDS:
                regs.append(tk.name("register"))
        txns: list[Transaction] = []
        while tk.accept("txn"):
            tid = tk.name("transaction id")
            bound = 1
            if tk.accept("bound"):
                kind, v, line, col = tk.peek()
                if kind != "num" or int(v) < 1:
                    raise ParseError("bound must be a positive integer", line, col)
                tk.next()
                bound = int(v)
            tk.expect("{")
            body: list[Instr] = []
            while not tk.accept("}"):
                body.append(_parse_stmt(tk))
                if not tk.accept(";") and tk.peek()[1] != "}":
                    tk.error("expected ';' or '}'")
            txns.append(Transaction(tid, tuple(body), bound))
        processes.append(Process(pid, tuple(regs), tuple(txns)))
    kind, v, line, col = tk.peek()
    if kind != "eof":
        raise ParseError(f"unexpected {v!r}", line, col)
    return Program(tuple(processes), domain, tuple(initial))


# ---------------------------------------------------------------------------
# canonical printer


def _print_stmt(i: Instr) -> str:
    prefix = f"{i.label}: " if i.label else ""
    if isinstance(i, ReadInstr):
        return f"{prefix}read {i.reg} {i.var}"
    if isinstance(i, AssumeInstr):
        return f"{prefix}assume {_print_expr(i.cond)}"
    if isinstance(i, AssertInstr):
        return f"{prefix}assert {_print_expr(i.cond)}"
    if isinstance(i, WriteInstr):
        return f"{prefix}write {i.var} {_print_expr(i.expr)}"
    if isinstance(i, GotoInstr):
        return f"{prefix}goto {i.target}"
    raise TypeError(i)


def _print_expr(e: Expr, top: bool = True) -> str:
    if isinstance(e, BinOp) and e.op != "min":
        s = f"{_print_expr(e.left, False)} {e.op} {_print_expr(e.right, False)}"
        return s if top else f"({s})"
    if isinstance(e, Not):
        return f"not {_print_expr(e.arg, False)}"
    if isinstance(e, Ite):
        return f"ite({_print_expr(e.cond)}, {_print_expr(e.then)}, {_print_expr(e.other)})"
    if isinstance(e, BinOp) and e.op == "min":
        return f"min({_print_expr(e.left)}, {_print_expr(e.right)})"
    return str(e)


def print_transaction(t: Transaction) -> str:
    body = "; ".join(_print_stmt(i) for i in t.body)
    bound = f" bound {t.bound}" if t.bound != 1 else ""
    return f"txn {t.tid}{bound} {{ {body} }}" if body else f"txn {t.tid}{bound} {{ }}"


def print_program(p: Program) -> str:
    lines = ["program"]
    lines.append("domain " + " ".join(str(v) for v in p.domain))
    for var, val in sorted(p.initial):
        lines.append(f"init {var} {val}")
    for proc in p.processes:
        regs = (" regs " + " ".join(proc.regs)) if proc.regs else ""
        lines.append(f"process {proc.pid}{regs}")
        for t in proc.transactions:
            lines.append(print_transaction(t))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# normalizer


class NormalizeError(ValueError):
    pass


def _unfold(t: Transaction) -> tuple[Instr, ...]:
    """Flatten goto control flow to one straight line, visiting each
    instruction at most ``bound`` times; rejects ambiguous jump targets."""
    if not any(isinstance(i, GotoInstr) for i in t.body):
        return t.body
    by_label: dict[str, list[int]] = {}
    for idx, i in enumerate(t.body):
        if i.label is not None:
            by_label.setdefault(i.label, []).append(idx)
    out: list[Instr] = []
    visits = [0] * len(t.body)
    pc = 0
    steps = 0
    limit = len(t.body) * t.bound + 1
    while pc < len(t.body):
        steps += 1
        if steps > limit:
            raise NormalizeError(
                f"transaction {t.tid}: goto structure not finitely unfoldable at bound {t.bound}"
            )
        i = t.body[pc]
        visits[pc] += 1
        if visits[pc] > t.bound:
            raise NormalizeError(
                f"transaction {t.tid}: instruction visited more than bound {t.bound} times"
            )
        if isinstance(i, GotoInstr):
            targets = by_label.get(i.target, [])
            if not targets:
                raise NormalizeError(f"transaction {t.tid}: goto {i.target} undefined")
            if len(targets) > 1:
                raise NormalizeError(
                    f"transaction {t.tid}: goto {i.target} is ambiguous (label used twice)"
                )
            pc = targets[0]
            continue
        out.append(i)
        pc += 1
    return tuple(out)


def normalize_transaction(t: Transaction) -> Transaction:
    """Rewrite into reads-assumes-writes form with transaction-log read
    resolution: a read of a variable the transaction already wrote resolves
    to the pending written expression and produces no read event."""
    straight = _unfold(t)
    env: dict[str, Expr] = {}
    log: dict[str, Expr] = {}
    read_sym: dict[str, str] = {}  # shared var -> register symbol carrying it
    read_order: list[str] = []
    assumes: list[Expr] = []
    asserts: list[tuple[str, Expr]] = []
    write_order: list[str] = []
    taken: set[str] = set()
    for i in straight:
        if isinstance(i, ReadInstr):
            if i.var in log:
                env[i.reg] = log[i.var]
            elif i.var in read_sym:
                env[i.reg] = Reg(read_sym[i.var])
            else:
                sym = i.reg if i.reg not in taken else f"_r_{i.var}"
                read_sym[i.var] = sym
                read_order.append(i.var)
                taken.add(sym)
                env[i.reg] = Reg(sym)
        elif isinstance(i, AssumeInstr):
            assumes.append(subst(i.cond, env))
        elif isinstance(i, AssertInstr):
            asserts.append(("", subst(i.cond, env)))
        elif isinstance(i, WriteInstr):
            log[i.var] = subst(i.expr, env)
            if i.var not in write_order:
                write_order.append(i.var)
        else:
            raise AssertionError(i)
    body: list[Instr] = [ReadInstr(read_sym[v], v) for v in read_order]
    body += [AssumeInstr(c) for c in assumes]
    body += [AssertInstr(c) for _, c in asserts]
    body += [WriteInstr(v, log[v]) for v in write_order]
    return Transaction(t.tid, tuple(body), 1)


def normalize(program: Program) -> Program:
    """Normalize every transaction; idempotent, trace-set preserving under
    all four consistency models."""
    procs = []
    for p in program.processes:
        txns = tuple(normalize_transaction(t) for t in p.transactions)
        regs = list(p.regs)
        for t in txns:
            for r, _ in t.reads:
                if r not in regs:
                    regs.append(r)
        procs.append(Process(p.pid, tuple(regs), txns))
    return replace(program, processes=tuple(procs))

"""Consistency models and robustness verdicts shared across modules."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional


class Model(enum.Enum):
    """The four models, ordered by strength: SER > SI > PC > CC."""

    CC = "cc"
    PC = "pc"
    SI = "si"
    SER = "ser"

    @property
    def strength(self) -> int:
        return _STRENGTH[self]

    def stronger_than(self, other: "Model") -> bool:
        return self.strength > other.strength

    @classmethod
    def parse(cls, text: str) -> "Model":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown consistency model {text!r}") from None


_STRENGTH = {Model.CC: 0, Model.PC: 1, Model.SI: 2, Model.SER: 3}

ROBUST = "robust"
VIOLATION = "violation"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class RobustnessVerdict:
    frm: Model
    to: Model
    result: str  # robust | violation | unknown
    method: str  # bruteforce | reduction | movers
    witness_trace: Optional[object] = None
    witness_schedule: Optional[tuple] = None
    reason: Optional[str] = None
    stats: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if self.result not in (ROBUST, VIOLATION, UNKNOWN):
            raise ValueError(f"bad verdict result {self.result!r}")
        if not self.to.stronger_than(self.frm):
            raise ValueError(f"{self.to} is not stronger than {self.frm}")

    @property
    def pair(self) -> str:
        return f"{self.frm.value}-{self.to.value}"


class SizeGuardExceeded(RuntimeError):
    pass

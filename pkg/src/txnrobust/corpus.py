"""Bundled corpus: litmus programs and desk-scale application clients.

Expected verdicts follow the published robustness matrix for the
applications and the litmus discussion for SB/LU/WS/MP; application clients
are scalar-variable reconstructions (two processes, at most two transactions
each, tables pre-flattened to the cells the client touches) and each file
carries a provenance note.  Rows not stated by the source material are
frozen from the brute-force checker and marked derived.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

from .lang import Program, parse

PAIR_NAMES = ("cc-pc", "pc-si", "cc-si", "si-ser", "cc-ser")


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    filename: str
    expected: tuple[tuple[str, str], ...]  # pair -> "yes" | "no"
    provenance: str

    def expected_for(self, pair: str) -> str:
        return dict(self.expected)[pair]

    def load(self) -> Program:
        text = (
            importlib.resources.files("txnrobust")
            .joinpath("corpus", self.filename)
            .read_text(encoding="utf-8")
        )
        return parse(text)


def _row(cc_pc, pc_si, cc_si, si_ser, cc_ser):
    return tuple(zip(PAIR_NAMES, (cc_pc, pc_si, cc_si, si_ser, cc_ser)))


ENTRIES: tuple[CorpusEntry, ...] = (
    CorpusEntry("SB", "sb.txn", _row("no", "yes", "no", "yes", "no"),
                "store-buffering litmus; cc-pc verdict stated, rest derived"),
    CorpusEntry("LU", "lu.txn", _row("yes", "no", "no", "yes", "no"),
                "lost-update litmus; pc-si verdict stated, rest derived"),
    CorpusEntry("WS", "ws.txn", _row("yes", "yes", "yes", "no", "no"),
                "write-skew litmus; si-ser verdict stated, rest derived"),
    CorpusEntry("MP", "mp.txn", _row("yes", "yes", "yes", "yes", "yes"),
                "message-passing litmus; robust for every pair as stated"),
    CorpusEntry("Betting", "betting.txn", _row("yes", "yes", "yes", "yes", "yes"),
                "betting example, three-process client as published"),
    CorpusEntry("CassandraLock", "cassandralock.txn", _row("yes", "yes", "yes", "yes", "yes"),
                "reconstructed lock/monitor client; row from the published matrix"),
    CorpusEntry("Epinions", "epinions.txn", _row("no", "yes", "no", "yes", "no"),
                "reconstructed rate-then-browse client; row from the published matrix"),
    CorpusEntry("FusionTicket", "fusionticket.txn", _row("no", "no", "no", "yes", "no"),
                "reconstructed create/count/top-up client; row from the published matrix"),
    CorpusEntry("SimpleCurrencyExchange", "currencyexchange.txn", _row("yes", "yes", "yes", "yes", "yes"),
                "reconstructed trade-log client; row from the published matrix"),
    CorpusEntry("Subscription", "subscription.txn", _row("yes", "no", "no", "yes", "no"),
                "reconstructed double-registration client; row from the published matrix"),
    CorpusEntry("Twitter", "twitter.txn", _row("no", "no", "no", "yes", "no"),
                "reconstructed follow/tweet client; row from the published matrix"),
    CorpusEntry("TwitterRegister", "twitter_register.txn", _row("yes", "no", "no", "yes", "no"),
                "register-pair variant; cc-pc and pc-si verdicts stated, rest derived"),
    CorpusEntry("TransformedTwitter", "transformed_twitter.txn", _row("yes", "yes", "yes", "yes", "yes"),
                "read/write split of the register pair; row derived"),
    CorpusEntry("Vote", "vote.txn", _row("yes", "yes", "yes", "no", "no"),
                "reconstructed double-vote client; row from the published matrix"),
)

TABLE_APPS = (
    "Betting",
    "CassandraLock",
    "Epinions",
    "FusionTicket",
    "SimpleCurrencyExchange",
    "Subscription",
    "Twitter",
    "Vote",
)


def entry(name: str) -> CorpusEntry:
    for e in ENTRIES:
        if e.name.lower() == name.lower():
            return e
    raise KeyError(name)


def load(name: str) -> Program:
    return entry(name).load()

"""Scratch: tune Table-2 corpus reconstructions until rows match."""
from txnrobust import lang, robustness
from txnrobust.models import Model

PAIRS = [(Model.CC, Model.PC), (Model.PC, Model.SI), (Model.CC, Model.SI),
         (Model.SI, Model.SER), (Model.CC, Model.SER)]

def row(src):
    p = lang.parse(src)
    out = []
    for frm, to in PAIRS:
        v = robustness.brute_force_robust(p, frm, to)
        out.append("yes" if v.result == "robust" else ("no" if v.result == "violation" else "?"))
    return out

drafts = {
  "Betting(exp yes yes yes yes yes)": """
program
process P1 regs ra
txn PlaceBet1 { write bet1 1 }
process P2 regs rb
txn PlaceBet2 { write bet2 1 }
process P3 regs r1 r2
txn SettleBet { read r1 bet1; read r2 bet2 }
""",
  "CassandraLock(exp yes yes yes yes yes)": """
program
domain 0 1 2
process P1 regs r1 r2
txn TryLock { read r1 lockOwner; assume r1 == 0; write lockOwner 1 }
txn ReleaseLock { read r2 lockOwner; assume r2 == 1; write lockOwner 0 }
process P2 regs r3 r4
txn ViewLock1 { read r3 lockOwner }
txn ViewLock2 { read r4 lockOwner }
""",
  "Epinions(exp no yes no yes no)": """
program
process P1 regs ra rb
txn UpdateRating1 { write rating1 1 }
txn ShowRatings1 { read ra rating1; read rb rating2 }
process P2 regs rc rd
txn UpdateRating2 { write rating2 1 }
txn ShowRatings2 { read rc rating1; read rd rating2 }
""",
  "SimpleCurrencyExchange(exp yes yes yes yes yes)": """
program
process P1 regs r0
txn RegisterTrade1 { write trade1 1 }
txn RegisterTrade2 { write trade2 1 }
process P2 regs r1 r2
txn ViewLatestTrade { read r1 trade2 }
txn ViewTradeHistory { read r2 trade1 }
""",
  "Subscription(exp yes no no yes no)": """
program
process P1 regs r1
txn AddUser1 { read r1 registered; assume r1 == 0; write registered 1 }
process P2 regs r2
txn AddUser2 { read r2 registered; assume r2 == 0; write registered 1 }
""",
  "Twitter(exp no no no yes no)": """
program
process P1 regs ra
txn FollowUser1 { write follows2 1 }
txn AddTweet1 { read ra follows1; write timeline 1 }
process P2 regs rb
txn FollowUser2 { write follows1 1 }
txn AddTweet2 { read rb follows2; write timeline 1 }
""",
  "Vote(exp yes yes yes no no)": """
program
process P1 regs ra rb
txn Vote1 { read ra vote1; read rb vote2; assume ra == 0; assume rb == 0; write vote1 1 }
process P2 regs rc rd
txn Vote2 { read rc vote1; read rd vote2; assume rc == 0; assume rd == 0; write vote2 1 }
""",
  "FusionTicket-a(exp no no no yes no)": """
program
process P1 regs ra rb
txn CreateEvent1 { write tickets1 1 }
txn CountTickets1 { read ra tickets1; read rb tickets2 }
process P2 regs rc rd re
txn Purchase2 { read rc tickets1; assume rc == 1; write tickets1 0 }
txn CountTickets2 { read rd tickets1; read re tickets2 }
""",
  "FusionTicket-b(exp no no no yes no)": """
program
process P1 regs ra rb
txn CreateEvent1 { write tickets1 1 }
txn CountTickets1 { read ra tickets1; read rb tickets2 }
process P2 regs rc
txn Purchase2 { read rc tickets1; assume rc == 1; write tickets1 0 }
txn CreateEvent2 { write tickets2 1 }
""",
}

for name, src in drafts.items():
    print(f"{name:45s}", " ".join(row(src)))

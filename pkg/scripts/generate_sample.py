#!/usr/bin/env python3
"""Regenerate the bundled sample dataset and its golden outputs.

The sample is a seeded synthetic market (~1,000 wallets over 180 days) with a
handful of hand-written anomalies appended so the ingest diagnostics surface
in the golden run: duplicate keys, a negative balance, an unparseable row, an
unpriced token, and price outliers sitting above the caps table.

Run from the repository root:  python3 scripts/generate_sample.py
"""

import gzip
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from tokenpnl.cli import main  # noqa: E402
from tokenpnl.synth import ScenarioParams, collapse_to_daily, generate_scenario  # noqa: E402

SAMPLE = ROOT / "tests" / "data" / "sample"
GOLDEN = ROOT / "tests" / "data" / "golden"

PARAMS = ScenarioParams(
    n_wallets=1000,
    n_tokens=8,
    days=180,
    trade_intensity=0.06,
    volatility=0.06,
    round_trip_prob=0.05,
    intraday_jitter=0.02,
    liquidation_prob=0.3,
    multi_account_prob=0.1,
    max_tokens_per_wallet=3,
    entry_spread=0.7,
)
SEED = 20241001

BALANCE_ANOMALIES = (
    # duplicate full keys: the later row wins, diagnostics note both
    "2024-10-20,W000010,A1,T000,1234.5\n"
    "2024-10-20,W000010,A1,T000,1200.0\n"
    # negative balance: rejected
    "2024-10-21,W000011,A1,T001,-5\n"
    # unparseable date: rejected
    "someday,W000012,A1,T001,5\n"
    # a token that never trades on any DEX: its ledgers are skipped
    "2024-10-05,W000013,A1,T999,1000\n"
    "2024-11-05,W000013,A1,T999,500\n"
)

PRICE_ANOMALIES = (
    # spikes far above the cap for T000 (cap table holds 100000)
    "2024-10-25T03:00:00Z,T000,2500000\n"
    "2024-10-25T04:00:00Z,T000,4000000\n"
    # negative price: rejected
    "2024-10-26T03:00:00Z,T001,-4\n"
    # unparseable timestamp: rejected
    "not-a-time,T002,1.0\n"
)

CAPS = "token,max_price\nT000,100000\nT001,100000\n"

GROUPS = (
    "kind,id,platform\n"
    "token,T000,alpha\n"
    "token,T001,alpha\n"
    "token,T002,alpha\n"
    "token,T003,beta\n"
    "token,T004,beta\n"
    "token,T005,beta\n"
    "token,T006,gamma\n"
    "token,T007,gamma\n"
    "wallet,W000000,alpha\n"
    "wallet,W000001,beta\n"
)


def build_inputs() -> None:
    SAMPLE.mkdir(parents=True, exist_ok=True)
    tape = generate_scenario(PARAMS, seed=SEED)
    balances_csv, prices_csv = collapse_to_daily(tape)
    (SAMPLE / "balances.csv").write_bytes(balances_csv + BALANCE_ANOMALIES.encode())
    (SAMPLE / "prices.csv").write_bytes(prices_csv + PRICE_ANOMALIES.encode())
    (SAMPLE / "caps.csv").write_text(CAPS)
    (SAMPLE / "groups.csv").write_text(GROUPS)


def build_goldens() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp)
        common = [
            "--balances", str(SAMPLE / "balances.csv"),
            "--prices", str(SAMPLE / "prices.csv"),
            "--caps", str(SAMPLE / "caps.csv"),
            "--out", str(out),
        ]
        group = ["--group", str(SAMPLE / "groups.csv")]
        assert main(["compute", *common]) == 0
        assert main(["report", *common, *group]) == 0
        assert main(["dist", *common, *group]) == 0
        assert main(["bench", "--prices", str(SAMPLE / "prices.csv"),
                     "--caps", str(SAMPLE / "caps.csv"), "--out", str(out),
                     "--benchmark", "T000"]) == 0

        with open(out / "ledgers.csv", "rb") as src:
            with gzip.GzipFile(GOLDEN / "ledgers.csv.gz", "wb", mtime=0) as dst:
                shutil.copyfileobj(src, dst)
        for name in ("diagnostics.txt", "summary.json", "concentration.json",
                     "dist.csv", "benchmark.json"):
            shutil.copyfile(out / name, GOLDEN / name)


if __name__ == "__main__":
    build_inputs()
    build_goldens()
    total = sum(f.stat().st_size for f in [*SAMPLE.iterdir(), *GOLDEN.iterdir()])
    print(f"sample + golden files written ({total / 1e6:.1f} MB)")

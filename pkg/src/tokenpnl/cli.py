"""Command-line entry point wiring ingest -> grid -> pnl -> analytics.

Subcommands: compute (daily ledger table + diagnostics), report (per-platform
user summary and winner concentration), dist (PnL bucket shares over time),
bench (drawdown / decline-from-ATH versus a benchmark token), and synth
(synthetic dataset with trade-level ground truth).

Exit codes: 0 success, 1 fatal input error, 2 invalid configuration.
Outputs are byte-identical for identical inputs regardless of --threads.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from datetime import date
from pathlib import Path

from .analytics import (
    DEFAULT_BUCKETS,
    PnlSeries,
    aggregate_series,
    benchmark_report,
    bucket_distribution,
    concentration,
    snapshot_totals,
    summary_stats,
)
from .grid import DailySeries
from .ingest import parse_prices
from .model import ConfigError, TokenPnlError, date_range, round_money
from .pipeline import (
    ComputeRun,
    LedgerFrame,
    build_price_tables,
    expand_frame,
    render_diagnostics,
    resolve_end,
    run_pipeline,
    write_ledgers_csv,
)
from .synth import collapse_to_daily, generate_scenario, load_params, oracle_pnl

DEFAULT_PLATFORM = "all"
UNGROUPED_PLATFORM = "ungrouped"


@dataclass(slots=True)
class RunConfig:
    balances: Path | None = None
    prices: Path | None = None
    caps: Path | None = None
    group: Path | None = None
    out: Path = Path(".")
    snapshot: date | None = None
    buckets: tuple[float, ...] = DEFAULT_BUCKETS
    top_fraction: float = 0.01
    benchmark: str | None = None
    threads: int = 1
    params: Path | None = None
    seed: int = 0


@dataclass(slots=True)
class PlatformGroups:
    token_platform: dict[str, str]
    treasury_wallets: set[str]

    def platform_of(self, token: str) -> str:
        if not self.token_platform:
            return DEFAULT_PLATFORM
        return self.token_platform.get(token, UNGROUPED_PLATFORM)


def load_groups(path: Path | None) -> PlatformGroups:
    """Read the platform grouping table: kind(token|wallet), id, platform.

    Token rows assign ledgers to platforms; wallet rows mark treasury wallets,
    which are excluded from user-level statistics.
    """
    groups = PlatformGroups({}, set())
    if path is None:
        return groups
    with open(path, "rb") as fh:
        reader = csv.reader(io.TextIOWrapper(fh, encoding="utf-8", newline=""))
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["kind", "id", "platform"]:
            raise ConfigError(f"group file {path}: expected header kind,id,platform")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ConfigError(f"group file {path} line {line_no}: expected 3 columns")
            kind, ident, platform = (c.strip() for c in row)
            if kind == "token":
                if ident in groups.token_platform:
                    raise ConfigError(f"group file {path} line {line_no}: duplicate token {ident}")
                groups.token_platform[ident] = platform
            elif kind == "wallet":
                groups.treasury_wallets.add(ident)
            else:
                raise ConfigError(f"group file {path} line {line_no}: unknown kind {kind!r}")
    return groups


def _open(path: Path | None):
    return open(path, "rb") if path is not None else None


def _compute(config: RunConfig) -> ComputeRun:
    if config.balances is None or config.prices is None:
        raise ConfigError("--balances and --prices are required")
    with open(config.balances, "rb") as balances:
        with open(config.prices, "rb") as prices:
            caps = _open(config.caps)
            try:
                return run_pipeline(balances, prices, caps, end_override=config.snapshot)
            finally:
                if caps is not None:
                    caps.close()


def _wallet_series(
    run: ComputeRun, groups: PlatformGroups
) -> dict[str, dict[str, list[PnlSeries]]]:
    """platform -> wallet -> ledger PnL series, treasuries excluded."""
    out: dict[str, dict[str, list[PnlSeries]]] = {}
    for frame in run.frames:
        if frame.key.wallet in groups.treasury_wallets:
            continue
        platform = groups.platform_of(frame.key.token)
        arrays = expand_frame(frame, run.tables[frame.key.token])
        series = PnlSeries.from_daily(frame.first, arrays)
        out.setdefault(platform, {}).setdefault(frame.key.wallet, []).append(series)
    return out


def _write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(data)


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2) + "\n").encode("utf-8")


def cmd_compute(config: RunConfig) -> int:
    run = _compute(config)
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ledgers.csv", "wb") as sink:
        write_ledgers_csv(sink, run.frames, run.tables, run.end, threads=config.threads)
    _write(out / "diagnostics.txt", render_diagnostics(run))
    return 0


def cmd_report(config: RunConfig) -> int:
    run = _compute(config)
    groups = load_groups(config.group)
    per_platform = _wallet_series(run, groups)
    snapshot = run.end

    platform_rows = []
    concentration_rows = []
    all_totals = []
    for platform in sorted(per_platform):
        totals = snapshot_totals(per_platform[platform], snapshot, group=platform)
        all_totals.extend(totals)
        stats = summary_stats(totals)
        platform_rows.append(
            {
                "platform": platform,
                "users": stats.users,
                "mean": round_money(stats.mean),
                "median": round_money(stats.median),
                "min": round_money(stats.min),
                "max": round_money(stats.max),
                "pct_profitable": stats.pct_profitable,
                "pct_loss": stats.pct_loss,
                "pct_zero": stats.pct_zero,
            }
        )
        concentration_rows.append(_concentration_row(platform, totals, config.top_fraction))

    summary = {"snapshot": snapshot.isoformat() if snapshot else None, "platforms": platform_rows}
    _write(config.out / "summary.json", _json_bytes(summary))

    report = {
        "top_fraction": config.top_fraction,
        "overall": _concentration_row("overall", all_totals, config.top_fraction),
        "platforms": concentration_rows,
    }
    _write(config.out / "concentration.json", _json_bytes(report))
    return 0


def _concentration_row(label: str, totals, top_fraction: float) -> dict:
    r = concentration(totals, top_fraction)
    return {
        "platform": label,
        "winners": r.winners,
        "top_count": r.top_count,
        "top_sum": round_money(r.top_sum),
        "top_share": r.top_share,
    }


def cmd_dist(config: RunConfig) -> int:
    run = _compute(config)
    groups = load_groups(config.group)
    per_platform = _wallet_series(run, groups)

    lines = ["platform,date,bucket,share"]
    for platform in sorted(per_platform):
        series_by_wallet = {
            wallet: aggregate_series(ledgers)
            for wallet, ledgers in per_platform[platform].items()
        }
        firsts = [s.first for s in series_by_wallet.values() if s.first is not None]
        if not firsts or run.end is None:
            continue
        dates = date_range(min(firsts), run.end)
        matrix = bucket_distribution(series_by_wallet, config.buckets, dates)
        for i, day in enumerate(matrix.dates):
            for j, label in enumerate(matrix.labels):
                share = repr(float(matrix.shares[i][j]))
                lines.append(f"{platform},{day.isoformat()},{label},{share}")
    lines.append("")
    _write(config.out / "dist.csv", "\n".join(lines).encode("utf-8"))
    return 0


def cmd_bench(config: RunConfig) -> int:
    if config.prices is None:
        raise ConfigError("--prices is required")
    if not config.benchmark:
        raise ConfigError("--benchmark TOKEN is required")
    with open(config.prices, "rb") as fh:
        observations, _diags = parse_prices(fh)
    caps = {}
    if config.caps is not None:
        from .ingest import parse_caps

        with open(config.caps, "rb") as fh:
            caps = parse_caps(fh)
    end = resolve_end([], observations, config.snapshot)
    if end is None:
        raise TokenPnlError("prices file holds no observations")
    tables, _ = build_price_tables(observations, caps, end)
    series = {
        token: DailySeries(first=t.first, values=t.values.tolist(), key=token)
        for token, t in tables.items()
    }
    try:
        report, skipped = benchmark_report(series, config.benchmark)
    except ValueError as err:
        raise TokenPnlError(str(err)) from err

    def row(m):
        return {
            "token": m.token,
            "max_drawdown": m.max_drawdown,
            "decline_from_ath": m.decline_from_ath,
            "ath_date": m.ath_date.isoformat(),
        }

    payload = {
        "benchmark": row(report.benchmark),
        "tokens": [row(t) for t in report.tokens],
        "average_decline_from_ath": report.average_decline,
        "skipped_tokens": skipped,
    }
    _write(config.out / "benchmark.json", _json_bytes(payload))
    return 0


def cmd_synth(config: RunConfig) -> int:
    if config.params is None:
        raise ConfigError("--params FILE is required")
    params = load_params(Path(config.params).read_text(encoding="utf-8"))
    tape = generate_scenario(params, config.seed)
    balances_csv, prices_csv = collapse_to_daily(tape)
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "balances.csv", balances_csv)
    _write(out / "prices.csv", prices_csv)

    oracle = oracle_pnl(tape)
    ledgers = []
    for key in sorted(oracle.ledgers, key=lambda k: (k.wallet, k.token)):
        o = oracle.ledgers[key]
        ledgers.append(
            {
                "wallet": key.wallet,
                "token": key.token,
                "final_quantity": str(o.final_quantity),
                "final_cost_basis": round_money(o.final_cost_basis),
                "final_unrealized": round_money(o.final_unrealized),
                "final_total": round_money(o.final_total),
                "realized_sells": [
                    {"date": d.isoformat(), "amount": round_money(amount)}
                    for d, amount in o.realized_by_sell
                ],
            }
        )
    payload = {
        "seed": config.seed,
        "start": params.start.isoformat(),
        "end": params.end.isoformat(),
        "ledgers": ledgers,
    }
    _write(out / "oracle.json", _json_bytes(payload))
    return 0


def _parse_buckets(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"bad bucket list {text!r}") from err
    if not values:
        raise argparse.ArgumentTypeError("bucket list is empty")
    return values


def _parse_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"bad date {text!r}, expected YYYY-MM-DD") from err


def _add_data_args(p: argparse.ArgumentParser, balances: bool = True) -> None:
    if balances:
        p.add_argument("--balances", type=Path, required=True, help="balances CSV")
    p.add_argument("--prices", type=Path, required=True, help="price observations CSV")
    p.add_argument("--caps", type=Path, help="per-token price cap CSV")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--snapshot", type=_parse_date, help="analysis end date override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tokenpnl",
        description="Reconstruct wallet-token PnL from sparse daily snapshots.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="write the dense daily ledger table")
    _add_data_args(p)
    p.add_argument("--group", type=Path, help="platform grouping CSV (kind,id,platform)")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("report", help="per-platform user summary and concentration")
    _add_data_args(p)
    p.add_argument("--group", type=Path)
    p.add_argument("--top-fraction", type=float, default=0.01)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("dist", help="PnL bucket distribution over time")
    _add_data_args(p)
    p.add_argument("--group", type=Path)
    p.add_argument("--buckets", type=_parse_buckets, default=DEFAULT_BUCKETS)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("bench", help="drawdown and decline-from-ATH versus a benchmark")
    _add_data_args(p, balances=False)
    p.add_argument("--benchmark", required=True, help="benchmark token id")

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    p.add_argument("--params", type=Path, required=True, help="key=value scenario file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)

    return parser


def _config_from(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    for name in (
        "balances", "prices", "caps", "group", "out", "snapshot",
        "buckets", "benchmark", "threads", "params", "seed",
    ):
        if hasattr(args, name) and getattr(args, name) is not None:
            setattr(config, name, getattr(args, name))
    if hasattr(args, "top_fraction") and args.top_fraction is not None:
        config.top_fraction = args.top_fraction
    if config.threads < 1:
        raise ConfigError("--threads must be >= 1")
    if not 0 < config.top_fraction <= 1:
        raise ConfigError("--top-fraction must be in (0, 1]")
    return config


COMMANDS = {
    "compute": cmd_compute,
    "report": cmd_report,
    "dist": cmd_dist,
    "bench": cmd_bench,
    "synth": cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config_from(args)
        return COMMANDS[args.command](config)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (TokenPnlError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

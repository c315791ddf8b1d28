"""Batch engine: sparse records in, per-ledger daily PnL out.

The per-ledger trade math stays exact (decimal quantities through the FIFO
matcher); only the per-day mark-to-market expansion runs through the numeric
kernels.  Ledgers are processed in sorted key order and every output is a
pure function of the inputs, so results are identical regardless of thread
count or backend.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import BinaryIO, Sequence

import numpy as np

from . import kernels
from .ingest import (
    CapTable,
    DatasetSummary,
    Diagnostic,
    parse_balances,
    parse_caps,
    parse_prices,
    validate_dataset,
)
from .model import (
    QCTX,
    ZERO,
    BalanceRecord,
    ConfigError,
    LedgerKey,
    PriceObservation,
    Quantity,
)
from .pnl import (
    BUY,
    SELL,
    InferredTrade,
    build_lots,
    fifo_match,
    ledger_breaks,
    unmatched_sell_quantity,
)

LEDGERS_HEADER = "wallet,token,date,quantity,price,cost_basis,realized_cum,unrealized,total"


@dataclass(slots=True)
class PriceTable:
    """Dense daily median prices for one token, forward-filled to the end date."""

    token: str
    first: date
    values: np.ndarray
    _strings: list[str] | None = field(default=None, repr=False)

    @property
    def strings(self) -> list[str]:
        if self._strings is None:
            self._strings = [repr(float(v)) for v in self.values]
        return self._strings

    def index_of(self, day: date) -> int:
        return day.toordinal() - self.first.toordinal()


@dataclass(slots=True)
class LedgerFrame:
    """Compact per-ledger state: breakpoints instead of daily rows.

    brk_day holds relative day indices (first entry 0); the step arrays hold
    the state that applies from that day until the next breakpoint.
    """

    key: LedgerKey
    first: date
    n_days: int
    brk_day: np.ndarray
    brk_q: np.ndarray
    brk_cb: np.ndarray
    brk_r: np.ndarray
    q_text: list[str]
    unmatched: Quantity
    n_matches: int

    @property
    def last(self) -> date:
        return self.first + timedelta(days=self.n_days - 1)


@dataclass(slots=True)
class ComputeRun:
    """Everything one compute pass produces besides the written files."""

    end: date | None
    summary: DatasetSummary
    tables: dict[str, PriceTable]
    frames: list[LedgerFrame]
    diagnostics: list[Diagnostic]


def resolve_end(
    records: Sequence[BalanceRecord],
    observations: Sequence[PriceObservation],
    override: date | None = None,
) -> date | None:
    """Analysis end date: the CLI override, else the latest date in either table."""
    if override is not None:
        return override
    candidates = []
    if records:
        candidates.append(max(r.date for r in records))
    if observations:
        candidates.append(max(o.timestamp.date() for o in observations))
    return max(candidates) if candidates else None


def build_price_tables(
    observations: Sequence[PriceObservation], caps: CapTable, end: date
) -> tuple[dict[str, PriceTable], list[Diagnostic]]:
    """Per-token daily medians (cap-filtered) forward-filled to `end`.

    Grouping, medians, and the fill all run through the numeric kernels;
    results are identical to grid.daily_median_price + grid.fill_price_series.
    """
    diagnostics: list[Diagnostic] = []
    end_ord = end.toordinal()
    by_token: dict[str, tuple[list[int], list[float]]] = {}
    for o in observations:
        cap = caps.get(o.token)
        if cap is not None and o.price > cap:
            continue
        day = o.timestamp.date().toordinal()
        if day > end_ord:
            continue
        days, prices = by_token.setdefault(o.token, ([], []))
        days.append(day)
        prices.append(o.price)

    for token in sorted(set(o.token for o in observations) - set(by_token)):
        diagnostics.append(
            Diagnostic(
                "unpriced_token",
                f"{token}: no admissible observations (cap-filtered or beyond the end date)",
            )
        )

    tables: dict[str, PriceTable] = {}
    for token in sorted(by_token):
        days, prices = by_token[token]
        day_arr = np.asarray(days, dtype=np.int64)
        price_arr = np.asarray(prices, dtype=np.float64)
        order = np.lexsort((price_arr, day_arr))
        day_arr = day_arr[order]
        price_arr = price_arr[order]
        uniq_days, group_starts = np.unique(day_arr, return_index=True)
        group_off = np.empty(len(uniq_days) + 1, dtype=np.int64)
        group_off[:-1] = group_starts
        group_off[-1] = len(day_arr)
        medians = kernels.grouped_median(group_off, price_arr)
        base = int(uniq_days[0])
        filled = kernels.forward_fill(uniq_days - base, medians, end_ord - base + 1)
        tables[token] = PriceTable(token, date.fromordinal(base), filled)
    return tables, diagnostics


def _wallet_token_steps(
    group: list[BalanceRecord],
) -> list[tuple[int, Quantity]]:
    """Merge one (wallet, token) group's account records into net level steps.

    Returns (day ordinal, wallet-level balance) pairs at days where the
    aggregate balance changes, in ascending day order.
    """
    deltas: dict[int, Quantity] = {}
    account = None
    prev = ZERO
    for r in group:  # sorted by (account, date)
        if r.account != account:
            account = r.account
            prev = ZERO
        day = r.date.toordinal()
        step = QCTX.subtract(r.balance, prev)
        if step != 0:
            total = QCTX.add(deltas.get(day, ZERO), step)
            if total == 0:
                del deltas[day]
            else:
                deltas[day] = total
        prev = r.balance

    steps: list[tuple[int, Quantity]] = []
    level = ZERO
    for day in sorted(deltas):
        level = QCTX.add(level, deltas[day])
        steps.append((day, level))
    return steps


def build_ledger_frames(
    records: Sequence[BalanceRecord],
    tables: dict[str, PriceTable],
    end: date,
) -> tuple[list[LedgerFrame], list[Diagnostic]]:
    """Group balance records into ledgers and run the per-ledger engine."""
    ordered = sorted(records, key=lambda r: (r.wallet, r.token, r.account, r.date))
    skipped: dict[str, int] = {}
    frames: list[LedgerFrame] = []

    i = 0
    n = len(ordered)
    end_ord = end.toordinal()
    while i < n:
        wallet = ordered[i].wallet
        token = ordered[i].token
        j = i
        while j < n and ordered[j].wallet == wallet and ordered[j].token == token:
            j += 1
        group = ordered[i:j]
        i = j

        table = tables.get(token)
        if table is None:
            skipped[token] = skipped.get(token, 0) + 1
            continue

        steps = _wallet_token_steps(group)
        if not steps:
            continue
        start_ord = max(steps[0][0], table.first.toordinal())
        if start_ord > end_ord:
            skipped[token] = skipped.get(token, 0) + 1
            continue
        frames.append(_build_frame(LedgerKey(wallet, token), steps, table, start_ord, end_ord))

    diagnostics = [
        Diagnostic("skipped_ledgers", f"{token}: {count} ledger(s) skipped (token not priced)")
        for token, count in sorted(skipped.items())
    ]
    return frames, diagnostics


def _build_frame(
    key: LedgerKey,
    steps: list[tuple[int, Quantity]],
    table: PriceTable,
    start_ord: int,
    end_ord: int,
) -> LedgerFrame:
    price_base = table.first.toordinal()
    prices = table.values

    opening = ZERO
    trades: list[InferredTrade] = []
    prev = ZERO
    for day, level in steps:
        if day <= start_ord:
            opening = level
            prev = level
            continue
        if day > end_ord:
            break
        delta = QCTX.subtract(level, prev)
        day_date = date.fromordinal(day)
        price = float(prices[day - price_base])
        if delta > 0:
            trades.append(InferredTrade(day_date, BUY, delta, price))
        else:
            trades.append(InferredTrade(day_date, SELL, -delta, price))
        prev = level
    start = date.fromordinal(start_ord)
    if opening > 0:
        trades.insert(0, InferredTrade(start, BUY, opening, float(prices[start_ord - price_base])))

    buys = build_lots(trades, BUY)
    sells = build_lots(trades, SELL)
    matches = fifo_match(buys, sells)
    breaks = ledger_breaks(trades, matches, start)

    nb = len(breaks)
    brk_day = np.empty(nb, dtype=np.int64)
    brk_q = np.empty(nb, dtype=np.float64)
    brk_cb = np.empty(nb, dtype=np.float64)
    brk_r = np.empty(nb, dtype=np.float64)
    q_text: list[str] = []
    for k, b in enumerate(breaks):
        brk_day[k] = b.day
        brk_q[k] = float(b.quantity)
        brk_cb[k] = max(b.buy_notional_cum - b.sold_cost_cum, 0.0)
        brk_r[k] = b.realized_cum
        q_text.append(str(b.quantity))

    return LedgerFrame(
        key=key,
        first=start,
        n_days=end_ord - start_ord + 1,
        brk_day=brk_day,
        brk_q=brk_q,
        brk_cb=brk_cb,
        brk_r=brk_r,
        q_text=q_text,
        unmatched=unmatched_sell_quantity(matches, sells),
        n_matches=len(matches),
    )


def run_pipeline(
    balances_src: BinaryIO,
    prices_src: BinaryIO,
    caps_src: BinaryIO | None = None,
    end_override: date | None = None,
) -> ComputeRun:
    """Parse, validate, and compute frames for a whole dataset."""
    records, balance_diags = parse_balances(balances_src)
    observations, price_diags = parse_prices(prices_src)
    caps = parse_caps(caps_src) if caps_src is not None else {}

    if end_override is not None:
        starts = [r.date for r in records] + [o.timestamp.date() for o in observations]
        if starts and end_override < min(starts):
            raise ConfigError(
                f"snapshot {end_override} is before the dataset start {min(starts)}"
            )
        n_before = len(records)
        records = [r for r in records if r.date <= end_override]
        dropped = n_before - len(records)
        if dropped:
            balance_diags.append(
                Diagnostic("clipped_rows", f"{dropped} balance record(s) after {end_override} ignored")
            )

    summary = validate_dataset(records, observations, caps, balance_diags + price_diags)
    end = resolve_end(records, observations, end_override)

    tables: dict[str, PriceTable] = {}
    frames: list[LedgerFrame] = []
    diagnostics = list(summary.diagnostics)
    if end is not None:
        tables, table_diags = build_price_tables(observations, caps, end)
        frames, frame_diags = build_ledger_frames(records, tables, end)
        diagnostics.extend(table_diags)
        diagnostics.extend(frame_diags)
    if not frames:
        diagnostics.append(Diagnostic("empty", "no computable ledgers (zero priced wallets)"))
    for frame in frames:
        if frame.unmatched > 0:
            diagnostics.append(
                Diagnostic(
                    "unmatched_sells",
                    f"{frame.key.wallet}/{frame.key.token}: {frame.unmatched} sold units had no matching buys",
                )
            )
    return ComputeRun(end=end, summary=summary, tables=tables, frames=frames, diagnostics=diagnostics)


def expand_frames(
    frames: Sequence[LedgerFrame], tables: dict[str, PriceTable]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Expand a batch of frames to daily (unrealized, total) via the kernels.

    Returns (out_off, unrealized, total): rows for frame i live at
    out_off[i]:out_off[i+1].
    """
    n = len(frames)
    out_off = np.zeros(n + 1, dtype=np.int64)
    brk_off = np.zeros(n + 1, dtype=np.int64)
    price_ptr = np.zeros(n, dtype=np.int64)

    token_base: dict[str, int] = {}
    flat_prices: list[np.ndarray] = []
    total = 0
    for token in sorted({f.key.token for f in frames}):
        token_base[token] = total
        values = tables[token].values
        flat_prices.append(values)
        total += len(values)
    prices = np.concatenate(flat_prices) if flat_prices else np.zeros(0)

    for i, f in enumerate(frames):
        out_off[i + 1] = out_off[i] + f.n_days
        brk_off[i + 1] = brk_off[i] + len(f.brk_day)
        price_ptr[i] = token_base[f.key.token] + tables[f.key.token].index_of(f.first)

    brk_day = np.concatenate([f.brk_day for f in frames]) if frames else np.zeros(0, dtype=np.int64)
    brk_q = np.concatenate([f.brk_q for f in frames]) if frames else np.zeros(0)
    brk_cb = np.concatenate([f.brk_cb for f in frames]) if frames else np.zeros(0)
    brk_r = np.concatenate([f.brk_r for f in frames]) if frames else np.zeros(0)

    u, t = kernels.expand_ledger_days(out_off, brk_off, brk_day, brk_q, brk_cb, brk_r, price_ptr, prices)
    return out_off, u, t


def expand_frame(frame: LedgerFrame, table: PriceTable) -> dict[str, np.ndarray]:
    """Daily arrays for one ledger: quantity, price, market value (the AUM
    contribution), cost basis, realized, unrealized, and total."""
    n = frame.n_days
    bounds = np.empty(len(frame.brk_day) + 1, dtype=np.int64)
    bounds[:-1] = frame.brk_day
    bounds[-1] = n
    run = np.diff(bounds)
    p0 = table.index_of(frame.first)
    prices = table.values[p0 : p0 + n]
    quantity = np.repeat(frame.brk_q, run)
    _, u, t = expand_frames([frame], {frame.key.token: table})
    return {
        "quantity": quantity,
        "price": prices,
        "market_value": quantity * prices,
        "cost_basis": np.repeat(frame.brk_cb, run),
        "realized_cum": np.repeat(frame.brk_r, run),
        "unrealized": u,
        "total": t,
    }


def _format_batch(
    frames: Sequence[LedgerFrame],
    tables: dict[str, PriceTable],
    date_strings: list[str],
    base_ord: int,
) -> bytes:
    out_off, u, t = expand_frames(frames, tables)
    lines: list[str] = []
    append = lines.append
    for i, f in enumerate(frames):
        prefix = f"{f.key.wallet},{f.key.token},"
        price_strings = tables[f.key.token].strings
        p0 = tables[f.key.token].index_of(f.first)
        d0 = f.first.toordinal() - base_ord
        off = out_off[i]
        nb = len(f.brk_day)
        for k in range(nb):
            lo = int(f.brk_day[k])
            hi = int(f.brk_day[k + 1]) if k + 1 < nb else f.n_days
            q_s = f.q_text[k]
            cb_s = "%.6f" % f.brk_cb[k]
            r_s = "%.6f" % f.brk_r[k]
            for d in range(lo, hi):
                row = off + d
                append(
                    prefix
                    + date_strings[d0 + d]
                    + ","
                    + q_s
                    + ","
                    + price_strings[p0 + d]
                    + ","
                    + cb_s
                    + ","
                    + r_s
                    + ",%.6f,%.6f" % (u[row], t[row])
                )
    lines.append("")
    return "\n".join(lines).encode("utf-8")


def write_ledgers_csv(
    sink: BinaryIO,
    frames: Sequence[LedgerFrame],
    tables: dict[str, PriceTable],
    end: date | None,
    threads: int = 1,
    batch_size: int = 2048,
) -> None:
    """Stream the dense daily ledger table in (wallet, token, date) order.

    Output bytes are independent of `threads` and `batch_size`; the pool only
    overlaps kernel work with row formatting.
    """
    sink.write((LEDGERS_HEADER + "\n").encode("utf-8"))
    ordered = sorted(frames, key=lambda f: (f.key.wallet, f.key.token))
    if not ordered or end is None:
        return
    base = min(f.first for f in ordered)
    base_ord = base.toordinal()
    n_days = end.toordinal() - base_ord + 1
    day = base
    date_strings = []
    for _ in range(n_days):
        date_strings.append(day.isoformat())
        day += timedelta(days=1)

    batches = [ordered[i : i + batch_size] for i in range(0, len(ordered), batch_size)]
    if threads <= 1:
        for batch in batches:
            sink.write(_format_batch(batch, tables, date_strings, base_ord))
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for blob in pool.map(lambda b: _format_batch(b, tables, date_strings, base_ord), batches):
            sink.write(blob)


def render_diagnostics(run: ComputeRun) -> bytes:
    """Human-readable diagnostics file; deterministic for identical inputs."""
    s = run.summary
    out = io.StringIO()
    out.write(f"balance_records: {s.n_balance_records}\n")
    out.write(f"price_observations: {s.n_price_observations}\n")
    out.write(f"wallets: {s.n_wallets}\n")
    out.write(f"token_accounts: {s.n_accounts}\n")
    out.write(f"tokens: {s.n_tokens}\n")
    out.write(f"ledgers: {len(run.frames)}\n")
    if s.balance_span:
        out.write(f"balance_span: {s.balance_span[0]} {s.balance_span[1]}\n")
    if s.price_span:
        out.write(f"price_span: {s.price_span[0]} {s.price_span[1]}\n")
    if run.end:
        out.write(f"analysis_end: {run.end}\n")
    out.write(f"diagnostics: {len(run.diagnostics)}\n")
    for d in sorted(run.diagnostics, key=lambda d: (d.kind, d.message, d.line or 0)):
        out.write(d.render() + "\n")
    return out.getvalue().encode("utf-8")

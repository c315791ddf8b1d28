"""Reporting layer: aggregation, summary statistics, winner concentration,
PnL bucket distributions over time, drawdown benchmarks, and the
market-cap-to-AUM speculation gauge.

All operations are pure over immutable inputs.  Wallet classification
(profitable / loss / exactly zero) uses exact comparisons on the computed
totals; display rounding never affects classification.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from math import floor, isfinite
from typing import Mapping, Sequence

import numpy as np

from .grid import DailySeries
from .model import ConfigError, EmptySeriesError, InvalidRangeError, Money


@dataclass(frozen=True, slots=True)
class PnlSeries:
    """Daily realized / unrealized / total PnL for one ledger or aggregate."""

    first: date | None
    realized_cum: np.ndarray
    unrealized: np.ndarray
    total: np.ndarray

    @classmethod
    def empty(cls) -> "PnlSeries":
        z = np.zeros(0)
        return cls(None, z, z, z)

    @classmethod
    def from_daily(cls, first: date, arrays: Mapping[str, np.ndarray]) -> "PnlSeries":
        return cls(first, arrays["realized_cum"], arrays["unrealized"], arrays["total"])

    def __len__(self) -> int:
        return len(self.total)

    @property
    def last(self) -> date | None:
        if self.first is None:
            return None
        return self.first + timedelta(days=len(self.total) - 1)

    def total_on(self, day: date) -> Money:
        """Total PnL forward-filled to `day` (must not precede the series)."""
        if self.first is None:
            return 0.0
        idx = (day - self.first).days
        if idx < 0:
            raise InvalidRangeError(f"{day} precedes series start {self.first}")
        return float(self.total[min(idx, len(self.total) - 1)])


@dataclass(frozen=True, slots=True)
class WalletTotal:
    wallet: str
    group: str
    total: Money


@dataclass(frozen=True, slots=True)
class SummaryStats:
    users: int
    mean: Money
    median: Money
    min: Money
    max: Money
    pct_profitable: float
    pct_loss: float
    pct_zero: float


@dataclass(frozen=True, slots=True)
class ConcentrationReport:
    winners: int
    top_fraction: float
    top_count: int
    top_sum: Money
    top_share: float | None  # None when there are no winners


@dataclass(frozen=True, slots=True)
class BucketMatrix:
    dates: list[date]
    labels: list[str]
    shares: np.ndarray  # len(dates) x len(labels); each row sums to 1
    active: list[int]  # wallets counted per date


@dataclass(frozen=True, slots=True)
class TokenBenchmark:
    token: str
    max_drawdown: float
    decline_from_ath: float
    ath_date: date


@dataclass(frozen=True, slots=True)
class BenchmarkReport:
    benchmark: TokenBenchmark
    tokens: list[TokenBenchmark]
    average_decline: float | None


def _sum_union(entries: Sequence[tuple[date, np.ndarray]]) -> tuple[date, np.ndarray]:
    """Sum series over the union date range: zero before each series starts,
    last value carried forward after it ends."""
    first = min(e[0] for e in entries)
    last = max(e[0] + timedelta(days=len(e[1]) - 1) for e in entries)
    n = (last - first).days + 1
    acc = np.zeros(n)
    for start, values in entries:
        i0 = (start - first).days
        acc[i0 : i0 + len(values)] += values
        if i0 + len(values) < n:
            acc[i0 + len(values) :] += values[-1]
    return first, acc


def aggregate_series(series: Sequence[PnlSeries]) -> PnlSeries:
    """Element-wise sum over the union range of all input series."""
    live = [s for s in series if s.first is not None]
    if not live:
        return PnlSeries.empty()
    first, realized = _sum_union([(s.first, s.realized_cum) for s in live])
    _, unrealized = _sum_union([(s.first, s.unrealized) for s in live])
    _, total = _sum_union([(s.first, s.total) for s in live])
    return PnlSeries(first, realized, unrealized, total)


def snapshot_totals(
    ledgers_by_wallet: Mapping[str, Sequence[PnlSeries]],
    snapshot: date,
    group: str = "all",
) -> list[WalletTotal]:
    """Per-wallet total PnL forward-filled to the snapshot date.

    Wallets without any computable ledger are excluded.
    """
    out: list[WalletTotal] = []
    for wallet in sorted(ledgers_by_wallet):
        series = [s for s in ledgers_by_wallet[wallet] if s.first is not None]
        if not series:
            continue
        total = sum(s.total_on(snapshot) for s in series)
        out.append(WalletTotal(wallet, group, total))
    return out


def summary_stats(totals: Sequence[WalletTotal]) -> SummaryStats:
    """Mean/median/min/max and profitable/loss/zero shares over wallet totals."""
    if not totals:
        raise EmptySeriesError("summary statistics need at least one wallet")
    values = sorted(t.total for t in totals)
    n = len(values)
    mid_lo = values[(n - 1) // 2]
    mid_hi = values[n // 2]
    n_pos = sum(1 for v in values if v > 0)
    n_neg = sum(1 for v in values if v < 0)
    n_zero = n - n_pos - n_neg
    return SummaryStats(
        users=n,
        mean=sum(values) / n,
        median=(mid_lo + mid_hi) / 2.0,
        min=values[0],
        max=values[-1],
        pct_profitable=n_pos / n,
        pct_loss=n_neg / n,
        pct_zero=n_zero / n,
    )


def concentration(totals: Sequence[WalletTotal], top_fraction: float) -> ConcentrationReport:
    """Share of total winner gains captured by the top fraction of winners.

    Winners are wallets with strictly positive totals, ranked by total
    descending (ties broken by ascending wallet id); the top block holds
    max(1, floor(fraction * winners)) wallets.
    """
    if not 0 < top_fraction <= 1:
        raise ConfigError(f"top fraction must be in (0, 1], got {top_fraction}")
    winners = sorted(
        (t for t in totals if t.total > 0), key=lambda t: (-t.total, t.wallet)
    )
    if not winners:
        return ConcentrationReport(0, top_fraction, 0, 0.0, None)
    top_count = max(1, floor(top_fraction * len(winners)))
    top_sum = sum(t.total for t in winners[:top_count])
    total_sum = sum(t.total for t in winners)
    return ConcentrationReport(
        winners=len(winners),
        top_fraction=top_fraction,
        top_count=top_count,
        top_sum=top_sum,
        top_share=top_sum / total_sum,
    )


def top_winner_count(winners: int, top_fraction: float) -> int:
    """Size of the top block: max(1, floor(top_fraction * winners))."""
    if not 0 < top_fraction <= 1:
        raise ConfigError(f"top fraction must be in (0, 1], got {top_fraction}")
    if winners <= 0:
        return 0
    return max(1, floor(top_fraction * winners))


DEFAULT_BUCKETS = (-10_000.0, -1_000.0, -100.0, 0.0, 100.0, 1_000.0, 10_000.0)


def _format_bound(x: float) -> str:
    if x == float("-inf"):
        return "-inf"
    if x == float("inf"):
        return "inf"
    return format(x, "g")


def build_buckets(boundaries: Sequence[float]) -> list[tuple[str, float, float, bool]]:
    """Half-open (lo, hi] buckets over the real line with a dedicated {0}.

    Returns (label, lo, hi, closed_hi) tuples; the interval that would
    contain zero is split into (lo, 0), {0}, (0, hi].
    """
    bounds = list(boundaries)
    if any(b >= c for b, c in zip(bounds, bounds[1:])):
        raise ConfigError(f"bucket boundaries must be strictly increasing: {bounds}")
    if any(not isfinite(b) for b in bounds):
        raise ConfigError("bucket boundaries must be finite")
    edges = [float("-inf")] + [float(b) for b in bounds] + [float("inf")]
    buckets: list[tuple[str, float, float, bool]] = []
    # ".." keeps labels free of commas so they embed cleanly in CSV output
    for lo, hi in zip(edges, edges[1:]):
        if lo < 0 <= hi:
            buckets.append((f"({_format_bound(lo)}..0)", lo, 0.0, False))
            buckets.append(("0", 0.0, 0.0, True))
            if hi > 0:
                label_hi = f"(0..{_format_bound(hi)}" + ("]" if isfinite(hi) else ")")
                buckets.append((label_hi, 0.0, hi, True))
        else:
            label = f"({_format_bound(lo)}..{_format_bound(hi)}" + ("]" if isfinite(hi) else ")")
            buckets.append((label, lo, hi, True))
    return buckets


def assign_bucket(buckets: Sequence[tuple[str, float, float, bool]], value: float) -> int:
    """Index of the unique bucket containing `value`."""
    for i, (_label, lo, hi, closed_hi) in enumerate(buckets):
        if lo == hi:  # the {0} singleton
            if value == 0.0:
                return i
        elif lo < value and (value <= hi if closed_hi else value < hi):
            return i
    raise AssertionError(f"no bucket for {value}")  # unreachable: buckets partition R


def bucket_distribution(
    series_by_wallet: Mapping[str, PnlSeries],
    boundaries: Sequence[float],
    dates: Sequence[date],
) -> BucketMatrix:
    """Share of wallets per PnL bucket for each date.

    Each wallet's total is forward-filled to the date; wallets whose series
    have not started yet are not counted on that date.  Dates with no active
    wallets are omitted.
    """
    buckets = build_buckets(boundaries)
    labels = [b[0] for b in buckets]
    rows: list[np.ndarray] = []
    kept_dates: list[date] = []
    active_counts: list[int] = []
    wallets = sorted(series_by_wallet)
    for day in dates:
        counts = np.zeros(len(buckets))
        active = 0
        for wallet in wallets:
            s = series_by_wallet[wallet]
            if s.first is None or s.first > day:
                continue
            active += 1
            counts[assign_bucket(buckets, s.total_on(day))] += 1
        if active == 0:
            continue
        rows.append(counts / active)
        kept_dates.append(day)
        active_counts.append(active)
    shares = np.vstack(rows) if rows else np.zeros((0, len(buckets)))
    return BucketMatrix(dates=kept_dates, labels=labels, shares=shares, active=active_counts)


def _series_values(series) -> tuple[list[float], date | None]:
    if isinstance(series, DailySeries):
        return [float(v) for v in series.values], series.first
    return [float(v) for v in series], None


def max_drawdown(series) -> float:
    """Largest fractional drop from a running peak; 0 for monotone series."""
    values, _ = _series_values(series)
    if not values:
        raise EmptySeriesError("drawdown needs at least one value")
    if any(v <= 0 for v in values):
        raise ValueError("drawdown requires strictly positive values")
    peak = values[0]
    worst = 0.0
    for v in values:
        if v > peak:
            peak = v
        worst = max(worst, (peak - v) / peak)
    return worst


def decline_from_ath(series: DailySeries) -> tuple[float, date]:
    """Fractional drop of the final value from the all-time high, and the
    first date that high was reached."""
    values, first = _series_values(series)
    if not values:
        raise EmptySeriesError("decline needs at least one value")
    if any(v <= 0 for v in values):
        raise ValueError("decline requires strictly positive values")
    peak_idx = max(range(len(values)), key=lambda i: (values[i], -i))
    peak = values[peak_idx]
    return (peak - values[-1]) / peak, first + timedelta(days=peak_idx)


def mc_to_aum(
    mcap: DailySeries, aum: DailySeries
) -> tuple[float, DailySeries, list[date]]:
    """Market-cap-to-AUM ratio over the overlap of the two series.

    Days where AUM is zero are skipped (NaN in the ratio series) and
    returned; the peak is the maximum over the remaining days.
    """
    first = max(mcap.first, aum.first)
    last = min(mcap.last, aum.last)
    if first > last:
        raise InvalidRangeError("market cap and AUM series do not overlap")
    skipped: list[date] = []
    values: list[float] = []
    day = first
    for i in range((last - first).days + 1):
        m = float(mcap.values[mcap.index_of(day)])
        a = float(aum.values[aum.index_of(day)])
        if a == 0.0:
            skipped.append(day)
            values.append(float("nan"))
        else:
            values.append(m / a)
        day += timedelta(days=1)
    valid = [v for v in values if v == v]
    if not valid:
        raise InvalidRangeError("AUM is zero on every overlapping day")
    return max(valid), DailySeries(first=first, values=values), skipped


def benchmark_report(
    series_by_token: Mapping[str, DailySeries], benchmark_token: str
) -> tuple[BenchmarkReport, list[str]]:
    """Drawdown and decline-from-ATH per token versus a benchmark token.

    Tokens with non-positive prices cannot be measured and are returned in
    the skipped list; the cross-token average excludes the benchmark.
    """
    if benchmark_token not in series_by_token:
        raise ValueError(f"benchmark token {benchmark_token!r} has no price series")

    def metrics(token: str) -> TokenBenchmark:
        s = series_by_token[token]
        decline, ath = decline_from_ath(s)
        return TokenBenchmark(token, max_drawdown(s), decline, ath)

    bench = metrics(benchmark_token)  # ValueError propagates: unpriceable benchmark is fatal
    tokens: list[TokenBenchmark] = []
    skipped: list[str] = []
    for token in sorted(series_by_token):
        if token == benchmark_token:
            continue
        try:
            tokens.append(metrics(token))
        except ValueError:
            skipped.append(token)
    average = sum(t.decline_from_ath for t in tokens) / len(tokens) if tokens else None
    return BenchmarkReport(benchmark=bench, tokens=tokens, average_decline=average), skipped

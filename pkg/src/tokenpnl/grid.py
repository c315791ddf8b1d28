"""Densification of sparse inputs into daily series.

Two-stage balance preprocessing (per-account forward-fill, then aggregation
across the accounts of a wallet), daily median prices with cap filtering,
price forward-fill, and alignment of a quantity series with a price series
onto one shared date range.  Values are only ever carried forward, never
backward: days before the first observation are excluded.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from typing import Sequence

from .model import (
    QCTX,
    ZERO,
    BalanceRecord,
    DisjointRangeError,
    EmptySeriesError,
    InvalidRangeError,
    LedgerKey,
    Price,
    PriceObservation,
    Quantity,
)


@dataclass(frozen=True, slots=True)
class DailySeries:
    """A dense daily series: one value per day starting at `first`.

    Quantities are decimals, prices and money are floats; the value on day d
    is the latest observed value at or before d.
    """

    first: date
    values: list
    key: LedgerKey | str | None = None

    def __post_init__(self):
        if len(self.values) == 0:
            raise EmptySeriesError("daily series must contain at least one day")

    @property
    def last(self) -> date:
        return self.first + timedelta(days=len(self.values) - 1)

    def index_of(self, day: date) -> int:
        i = day.toordinal() - self.first.toordinal()
        if i < 0 or i >= len(self.values):
            raise InvalidRangeError(f"{day} outside series range {self.first}..{self.last}")
        return i

    def value_on(self, day: date):
        return self.values[self.index_of(day)]


@dataclass(frozen=True, slots=True)
class AlignedLedgerInput:
    """Quantity and price series covering the identical date range."""

    key: LedgerKey | None
    quantity: DailySeries
    price: DailySeries

    def __post_init__(self):
        if self.quantity.first != self.price.first or len(self.quantity.values) != len(
            self.price.values
        ):
            raise InvalidRangeError("quantity and price series must cover the same range")

    @property
    def first(self) -> date:
        return self.quantity.first

    @property
    def dates(self) -> list[date]:
        d = self.quantity.first
        one = timedelta(days=1)
        out = []
        for _ in self.quantity.values:
            out.append(d)
            d += one
        return out


def fill_account_series(records: Sequence[BalanceRecord], end: date) -> DailySeries:
    """Forward-fill one account's sparse balance records into a dense series.

    Records must be sorted by date with unique dates for a single
    (wallet, account, token) key; the series runs from the first record to
    `end`, carrying the latest balance across gaps.
    """
    if not records:
        raise EmptySeriesError("cannot fill an empty record list")
    if end < records[-1].date:
        raise InvalidRangeError(f"end {end} is before last record {records[-1].date}")
    first = records[0].date
    n = end.toordinal() - first.toordinal() + 1
    values: list[Quantity] = []
    idx = 0
    current = records[0].balance
    base = first.toordinal()
    for i in range(n):
        while idx < len(records) and records[idx].date.toordinal() - base <= i:
            current = records[idx].balance
            idx += 1
        values.append(current)
    key = LedgerKey(records[0].wallet, records[0].token)
    return DailySeries(first=first, values=values, key=key)


def aggregate_wallet_balances(series: Sequence[DailySeries]) -> DailySeries:
    """Sum the account series of one wallet-token pair element-wise.

    Each account contributes zero before its own first day and its
    forward-filled value thereafter; the result spans the union range.
    """
    if not series:
        raise EmptySeriesError("cannot aggregate zero account series")
    first = min(s.first for s in series)
    last = max(s.last for s in series)
    n = last.toordinal() - first.toordinal() + 1
    totals = [ZERO] * n
    for s in series:
        offset = s.first.toordinal() - first.toordinal()
        for i, v in enumerate(s.values):
            totals[offset + i] = QCTX.add(totals[offset + i], v)
        # carry the account's last value to the end of the union range
        tail = s.values[-1]
        for i in range(offset + len(s.values), n):
            totals[i] = QCTX.add(totals[i], tail)
    return DailySeries(first=first, values=totals, key=series[0].key)


def daily_median_price(
    observations: Sequence[PriceObservation], cap: Price | None = None
) -> dict[date, Price]:
    """Median price per UTC day for one token, after cap filtering.

    Observations strictly above the cap are dropped before the median; an
    even survivor count takes the mean of the two middle values.  Days where
    every observation is dropped are absent from the result.
    """
    by_day: dict[date, list[float]] = {}
    for o in observations:
        if cap is not None and o.price > cap:
            continue
        by_day.setdefault(o.timestamp.date(), []).append(o.price)
    out: dict[date, Price] = {}
    for day in sorted(by_day):
        vals = sorted(by_day[day])
        k = len(vals)
        lo = vals[(k - 1) // 2]
        hi = vals[k // 2]
        out[day] = (lo + hi) / 2.0
    return out


def fill_price_series(daily: dict[date, Price], end: date, key: str | None = None) -> DailySeries:
    """Forward-fill sparse daily prices from the first priced day to `end`."""
    if not daily:
        raise EmptySeriesError("no priced days to fill")
    days = sorted(daily)
    if end < days[-1]:
        raise InvalidRangeError(f"end {end} is before last priced day {days[-1]}")
    first = days[0]
    base = first.toordinal()
    n = end.toordinal() - base + 1
    values: list[float] = []
    idx = 0
    current = daily[days[0]]
    for i in range(n):
        while idx < len(days) and days[idx].toordinal() - base <= i:
            current = daily[days[idx]]
            idx += 1
        values.append(current)
    return DailySeries(first=first, values=values, key=key)


def align(
    quantity: DailySeries, price: DailySeries, end: date, key: LedgerKey | None = None
) -> AlignedLedgerInput:
    """Cut both series to the common range [max(first days), end].

    Balance days before the first priced day are dropped; the quantity value
    on the first aligned day becomes the opening position.  Both series must
    already extend to `end`.
    """
    start = max(quantity.first, price.first)
    if start > end or quantity.last < start or price.last < start:
        raise DisjointRangeError(f"series ranges do not overlap within {start}..{end}")
    if quantity.last < end or price.last < end:
        raise InvalidRangeError("both series must be filled to the analysis end date")
    n = end.toordinal() - start.toordinal() + 1
    q0 = quantity.index_of(start)
    p0 = price.index_of(start)
    q = DailySeries(first=start, values=list(quantity.values[q0 : q0 + n]), key=quantity.key)
    p = DailySeries(first=start, values=list(price.values[p0 : p0 + n]), key=price.key)
    if key is None and isinstance(quantity.key, LedgerKey):
        key = quantity.key
    return AlignedLedgerInput(key=key, quantity=q, price=p)

"""Per-ledger PnL engine.

Daily net balance changes become inferred trades (the opening position is a
buy at the first day's price).  Sells are matched to buys first-in-first-out
by intersecting cumulative quantity ranges; realized PnL, remaining cost
basis, and mark-to-market unrealized PnL follow from the matches.  Quantities
stay exact decimals throughout; money amounts are floats accumulated in
chronological order.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from typing import Iterable, Mapping, Sequence

from .grid import AlignedLedgerInput
from .model import QCTX, ZERO, LedgerKey, Money, Price, Quantity

BUY = "buy"
SELL = "sell"


@dataclass(frozen=True, slots=True)
class InferredTrade:
    """A signed daily net flow: one buy or sell at that day's median price."""

    date: date
    side: str
    quantity: Quantity
    price: Price


@dataclass(frozen=True, slots=True)
class Lot:
    """A buy or sell lot with its 1-based index and cumulative quantity."""

    index: int
    date: date
    quantity: Quantity
    price: Price
    cumulative: Quantity


@dataclass(frozen=True, slots=True)
class LotMatch:
    """Overlap of sell lot `sell_index` with buy lot `buy_index`."""

    sell_index: int
    buy_index: int
    quantity: Quantity
    sell_price: Price
    buy_price: Price


@dataclass(frozen=True, slots=True)
class PnlPoint:
    """One day of a ledger: position, prices, and PnL components."""

    date: date
    quantity: Quantity
    price: Price
    buy_notional_cum: Money
    sold_cost_cum: Money
    cost_basis: Money
    realized_cum: Money
    unrealized: Money
    total: Money


@dataclass(frozen=True, slots=True)
class PnlBreak:
    """State change on a trade day: the step values that hold until the next
    trade.  Day index is relative to the ledger's first aligned day."""

    day: int
    quantity: Quantity
    buy_notional_cum: Money
    sold_cost_cum: Money
    realized_cum: Money


@dataclass(slots=True)
class LedgerResult:
    key: LedgerKey | None
    points: list[PnlPoint]
    matches: list[LotMatch]
    unmatched_sell_quantity: Quantity


def infer_trades(aligned: AlignedLedgerInput) -> list[InferredTrade]:
    """Turn daily quantity deltas into buy/sell trades at that day's price.

    The opening quantity on the first aligned day is emitted as a buy; days
    with no change emit nothing.
    """
    trades: list[InferredTrade] = []
    prev = ZERO
    day = aligned.first
    one_day = timedelta(days=1)
    for q, p in zip(aligned.quantity.values, aligned.price.values):
        delta = QCTX.subtract(q, prev)
        if delta > 0:
            trades.append(InferredTrade(day, BUY, delta, p))
        elif delta < 0:
            trades.append(InferredTrade(day, SELL, -delta, p))
        prev = q
        day = day + one_day
    return trades


def build_lots(trades: Iterable[InferredTrade], side: str) -> list[Lot]:
    """Extract one side's lots in chronological order with cumulative totals."""
    lots: list[Lot] = []
    cum = ZERO
    for t in trades:
        if t.side != side:
            continue
        cum = QCTX.add(cum, t.quantity)
        lots.append(Lot(len(lots) + 1, t.date, t.quantity, t.price, cum))
    return lots


def fifo_match(buys: Sequence[Lot], sells: Sequence[Lot]) -> list[LotMatch]:
    """Match sells to buys by intersecting cumulative quantity ranges.

    Sell lot s covers (S_{s-1}, S_s] and buy lot b covers (B_{b-1}, B_b] on
    the shared cumulative axis; the matched quantity is the overlap
    max(0, min(B_b, S_s) - max(B_{b-1}, S_{s-1})).  Only positive overlaps
    are emitted, in (sell, buy) lexicographic order.
    """
    matches: list[LotMatch] = []
    b = 0
    s_lo = ZERO
    for sell in sells:
        s_hi = sell.cumulative
        while b < len(buys) and buys[b].cumulative <= s_lo:
            b += 1
        j = b
        while j < len(buys):
            b_lo = buys[j - 1].cumulative if j > 0 else ZERO
            if b_lo >= s_hi:
                break
            b_hi = buys[j].cumulative
            m = max(ZERO, QCTX.subtract(min(b_hi, s_hi), max(b_lo, s_lo)))
            if m > 0:
                matches.append(LotMatch(sell.index, buys[j].index, m, sell.price, buys[j].price))
            j += 1
        s_lo = s_hi
    return matches


def realized_pnl(matches: Sequence[LotMatch], sells: Sequence[Lot]) -> dict[int, Money]:
    """Realized PnL per sell index: sum of overlap * (sell price - buy price).

    Sells with no matches realize zero.
    """
    out: dict[int, Money] = {s.index: 0.0 for s in sells}
    for m in matches:
        out[m.sell_index] += float(m.quantity) * (m.sell_price - m.buy_price)
    return out


def cumulative_realized(per_sell: Mapping[date, Money], dates: Sequence[date]) -> list[Money]:
    """Running sum of per-sell realized PnL over `dates`; constant between sells."""
    out: list[Money] = []
    total = 0.0
    for d in dates:
        total += per_sell.get(d, 0.0)
        out.append(total)
    return out


def _sold_cost_by_sell(matches: Sequence[LotMatch]) -> dict[int, Money]:
    """FIFO cost of the quantity matched out of each sell."""
    out: dict[int, Money] = {}
    for m in matches:
        out[m.sell_index] = out.get(m.sell_index, 0.0) + float(m.quantity) * m.buy_price
    return out


def ledger_breaks(
    trades: Sequence[InferredTrade], matches: Sequence[LotMatch], first: date
) -> list[PnlBreak]:
    """Scan trades chronologically and emit the step state after each trade day.

    A break is always present for relative day 0, so the step values cover
    every day of the aligned range.
    """
    sells = build_lots(trades, SELL)
    per_sell_realized = realized_pnl(matches, sells)
    per_sell_cost = _sold_cost_by_sell(matches)
    sell_index_by_date = {s.date: s.index for s in sells}

    base = first.toordinal()
    breaks: list[PnlBreak] = []
    quantity = ZERO
    buy_notional = 0.0
    sold_cost = 0.0
    realized = 0.0
    for t in trades:
        if t.side == BUY:
            quantity = QCTX.add(quantity, t.quantity)
            buy_notional += float(t.quantity) * t.price
        else:
            quantity = QCTX.subtract(quantity, t.quantity)
            s_idx = sell_index_by_date[t.date]
            sold_cost += per_sell_cost.get(s_idx, 0.0)
            realized += per_sell_realized.get(s_idx, 0.0)
        day = t.date.toordinal() - base
        if breaks and breaks[-1].day == day:
            breaks[-1] = PnlBreak(day, quantity, buy_notional, sold_cost, realized)
        else:
            breaks.append(PnlBreak(day, quantity, buy_notional, sold_cost, realized))
    if not breaks or breaks[0].day != 0:
        breaks.insert(0, PnlBreak(0, ZERO, 0.0, 0.0, 0.0))
    return breaks


def cost_basis_series(
    trades: Sequence[InferredTrade], matches: Sequence[LotMatch], dates: Sequence[date]
) -> list[Money]:
    """Remaining cost basis per day: cumulative buy notional minus cumulative
    FIFO cost of sold lots, clamped at zero."""
    if not dates:
        return []
    breaks = ledger_breaks(trades, matches, dates[0])
    out: list[Money] = []
    base = dates[0].toordinal()
    k = 0
    for d in dates:
        day = d.toordinal() - base
        while k + 1 < len(breaks) and breaks[k + 1].day <= day:
            k += 1
        out.append(max(breaks[k].buy_notional_cum - breaks[k].sold_cost_cum, 0.0))
    return out


def unrealized_pnl(quantity: Quantity, price: Price, cost_basis: Money) -> Money:
    """Mark-to-market value of the held quantity minus remaining cost basis."""
    return float(quantity) * price - cost_basis


def unmatched_sell_quantity(matches: Sequence[LotMatch], sells: Sequence[Lot]) -> Quantity:
    """Sell quantity with no matching buys (possible only on inconsistent data)."""
    total_sold = sells[-1].cumulative if sells else ZERO
    matched = ZERO
    for m in matches:
        matched = QCTX.add(matched, m.quantity)
    return QCTX.subtract(total_sold, matched)


def compute_ledger(aligned: AlignedLedgerInput) -> LedgerResult:
    """Run the full per-ledger computation: trades, FIFO matches, daily PnL."""
    trades = infer_trades(aligned)
    buys = build_lots(trades, BUY)
    sells = build_lots(trades, SELL)
    matches = fifo_match(buys, sells)
    breaks = ledger_breaks(trades, matches, aligned.first)

    points: list[PnlPoint] = []
    k = 0
    day = aligned.first
    one_day = timedelta(days=1)
    for i, (q, p) in enumerate(zip(aligned.quantity.values, aligned.price.values)):
        while k + 1 < len(breaks) and breaks[k + 1].day <= i:
            k += 1
        st = breaks[k]
        cb = max(st.buy_notional_cum - st.sold_cost_cum, 0.0)
        u = float(st.quantity) * p - cb
        points.append(
            PnlPoint(
                date=day,
                quantity=q,
                price=p,
                buy_notional_cum=st.buy_notional_cum,
                sold_cost_cum=st.sold_cost_cum,
                cost_basis=cb,
                realized_cum=st.realized_cum,
                unrealized=u,
                total=st.realized_cum + u,
            )
        )
        day = day + one_day
    return LedgerResult(
        key=aligned.key,
        points=points,
        matches=matches,
        unmatched_sell_quantity=unmatched_sell_quantity(matches, sells),
    )

"""Synthetic trade tapes with known ground truth.

A scenario generates second-resolution atomic trades against geometric
random-walk price paths, then collapses them to the sparse daily snapshot
format the engine ingests.  A queue-based FIFO simulator over the atomic
trades provides the independent oracle used to validate the engine and to
quantify the error introduced by collapsing intraday round trips into a
single net flow.

Construction invariants the tests rely on:
  - single-direction trades execute exactly at the day's reference price;
  - round trips buy above and sell below the reference, so each day's
    emitted observations stay symmetric and their median equals the
    reference price exactly;
  - no account balance ever goes negative.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, fields
from datetime import date, datetime, time, timedelta, timezone
from decimal import Decimal
from typing import Sequence

import numpy as np

from .ingest import render_balances_csv, render_prices_csv
from .model import (
    QCTX,
    ZERO,
    BalanceRecord,
    ConfigError,
    LedgerKey,
    Money,
    Price,
    PriceObservation,
    Quantity,
)

REFERENCE_HOUR = 0
RT_BUY_HOUR = 10
SINGLE_HOUR = 12
RT_SELL_HOUR = 14


@dataclass(frozen=True, slots=True)
class ScenarioParams:
    """Knobs for the synthetic market generator."""

    n_wallets: int = 100
    n_tokens: int = 5
    days: int = 60
    start: date = date(2024, 10, 1)
    trade_intensity: float = 0.10
    volatility: float = 0.05
    round_trip_prob: float = 0.0
    intraday_jitter: float = 0.0
    liquidation_prob: float = 0.25
    multi_account_prob: float = 0.0
    max_tokens_per_wallet: int = 2
    quantity_decimals: int = 3
    max_trade_quantity: float = 100.0
    # fraction of the window over which wallet entry days spread (0 = all
    # wallets can trade from day one)
    entry_spread: float = 0.0

    def validate(self) -> None:
        if self.n_wallets < 0 or self.n_tokens < 1 or self.days < 1:
            raise ConfigError("counts must be positive (n_wallets may be zero)")
        if self.max_tokens_per_wallet < 1:
            raise ConfigError("max_tokens_per_wallet must be >= 1")
        if not 0 <= self.trade_intensity <= 1:
            raise ConfigError("trade_intensity must be in [0, 1]")
        for name in ("round_trip_prob", "liquidation_prob", "multi_account_prob"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.volatility < 0:
            raise ConfigError("volatility must be >= 0")
        if not 0 <= self.intraday_jitter < 1:
            raise ConfigError("intraday_jitter must be in [0, 1)")
        if not 0 <= self.quantity_decimals <= 18:
            raise ConfigError("quantity_decimals must be in [0, 18]")
        if self.max_trade_quantity <= 0:
            raise ConfigError("max_trade_quantity must be > 0")
        if not 0 <= self.entry_spread <= 1:
            raise ConfigError("entry_spread must be in [0, 1]")

    @property
    def end(self) -> date:
        return self.start + timedelta(days=self.days - 1)


def load_params(text: str) -> ScenarioParams:
    """Parse a flat key=value scenario config (one pair per line, # comments)."""
    known = {f.name: f.type for f in fields(ScenarioParams)}
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"params line {line_no}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in known:
            raise ConfigError(f"params line {line_no}: unknown key {key!r}")
        try:
            if key in ("n_wallets", "n_tokens", "days", "max_tokens_per_wallet", "quantity_decimals"):
                values[key] = int(value)
            elif key == "start":
                values[key] = date.fromisoformat(value)
            else:
                values[key] = float(value)
        except ValueError as err:
            raise ConfigError(f"params line {line_no}: bad value for {key}: {value!r}") from err
    params = ScenarioParams(**values)
    params.validate()
    return params


@dataclass(frozen=True, slots=True)
class AtomicTrade:
    timestamp: datetime
    wallet: str
    account: str
    token: str
    side: str  # "buy" | "sell"
    quantity: Quantity
    price: Price
    round_trip: bool = False


@dataclass(slots=True)
class TradeTape:
    params: ScenarioParams
    seed: int
    trades: list[AtomicTrade]
    reference_prices: dict[str, np.ndarray]  # token -> daily path, length params.days

    @property
    def start(self) -> date:
        return self.params.start

    @property
    def end(self) -> date:
        return self.params.end


def _ts(day: date, hour: int) -> datetime:
    return datetime.combine(day, time(hour), tzinfo=timezone.utc)


def generate_scenario(params: ScenarioParams, seed: int) -> TradeTape:
    """Deterministically generate an atomic trade tape for the scenario."""
    params.validate()
    rng = np.random.default_rng(seed)
    tokens = [f"T{i:03d}" for i in range(params.n_tokens)]

    paths: dict[str, np.ndarray] = {}
    for token in tokens:
        p0 = float(np.exp(rng.uniform(np.log(0.05), np.log(5.0))))
        drift = rng.normal(0.0, params.volatility, params.days - 1) - 0.5 * params.volatility**2
        path = np.empty(params.days)
        path[0] = p0
        if params.days > 1:
            np.multiply.accumulate(np.exp(drift), out=path[1:])
            path[1:] *= p0
        paths[token] = path

    qd = params.quantity_decimals
    unit = Decimal(1).scaleb(-qd)
    max_units = max(1, int(params.max_trade_quantity * 10**qd))

    def draw_quantity() -> Quantity:
        return Decimal(int(rng.integers(1, max_units + 1))) * unit

    trades: list[AtomicTrade] = []
    for wi in range(params.n_wallets):
        wallet = f"W{wi:06d}"
        k = int(rng.integers(1, params.max_tokens_per_wallet + 1))
        picked = sorted(rng.choice(params.n_tokens, size=min(k, params.n_tokens), replace=False).tolist())
        for ti in picked:
            token = tokens[ti]
            path = paths[token]
            accounts = ["A1", "A2"] if rng.random() < params.multi_account_prob else ["A1"]
            balances = {a: ZERO for a in accounts}
            entry = 0
            if params.entry_spread > 0:
                entry = int(rng.integers(0, max(1, int(params.entry_spread * params.days))))
            active_days = entry + np.flatnonzero(
                rng.random(params.days - entry) < params.trade_intensity
            )
            if len(active_days) == 0 and params.trade_intensity > 0:
                # a wallet-token pair exists because it traded at least once
                active_days = np.array([entry], dtype=np.int64)
            for d in active_days.tolist():
                day = params.start + timedelta(days=d)
                ref = float(path[d])
                rt_quantity = ZERO
                rt_account = accounts[0]
                rt_sell_price = ref
                if rng.random() < params.round_trip_prob:
                    rt_quantity = draw_quantity()
                    rt_buy_price = ref * (1.0 + float(rng.uniform(0.0, params.intraday_jitter)))
                    rt_sell_price = ref * (1.0 - float(rng.uniform(0.0, params.intraday_jitter)))
                    trades.append(
                        AtomicTrade(_ts(day, RT_BUY_HOUR), wallet, rt_account, token,
                                    "buy", rt_quantity, rt_buy_price, round_trip=True)
                    )
                    balances[rt_account] = QCTX.add(balances[rt_account], rt_quantity)

                held = ZERO
                for a in accounts:
                    held = QCTX.add(held, balances[a])
                held_start = QCTX.subtract(held, rt_quantity)  # round-trip units are reserved

                if held_start == 0 or rng.random() < 0.5:
                    q = draw_quantity()
                    account = accounts[int(rng.integers(0, len(accounts)))]
                    trades.append(
                        AtomicTrade(_ts(day, SINGLE_HOUR), wallet, account, token, "buy", q, ref)
                    )
                    balances[account] = QCTX.add(balances[account], q)
                else:
                    if rng.random() < params.liquidation_prob:
                        q = held_start
                    else:
                        units = int(held_start.scaleb(qd))
                        q_units = max(1, int(units * rng.uniform(0.1, 0.9)))
                        q = Decimal(q_units) * unit
                    # drain accounts in order, leaving round-trip units untouched
                    remaining = q
                    for a in accounts:
                        available = balances[a]
                        if a == rt_account:
                            available = QCTX.subtract(available, rt_quantity)
                        take = min(available, remaining)
                        if take > 0:
                            trades.append(
                                AtomicTrade(_ts(day, SINGLE_HOUR), wallet, a, token, "sell", take, ref)
                            )
                            balances[a] = QCTX.subtract(balances[a], take)
                            remaining = QCTX.subtract(remaining, take)
                        if remaining == 0:
                            break

                if rt_quantity > 0:
                    trades.append(
                        AtomicTrade(_ts(day, RT_SELL_HOUR), wallet, rt_account, token,
                                    "sell", rt_quantity, rt_sell_price, round_trip=True)
                    )
                    balances[rt_account] = QCTX.subtract(balances[rt_account], rt_quantity)

    trades.sort(key=lambda t: (t.wallet, t.token, t.timestamp, t.account))
    return TradeTape(params=params, seed=seed, trades=trades, reference_prices=paths)


def collapse_to_daily(tape: TradeTape) -> tuple[bytes, bytes]:
    """Collapse the tape to the sparse snapshot input format.

    Balance records are emitted only on days where an account's end-of-day
    balance changes.  Price observations carry every trade price plus one
    reference observation per token-day.
    """
    params = tape.params

    deltas: dict[tuple[str, str, str], dict[date, Quantity]] = {}
    for t in tape.trades:
        key = (t.wallet, t.account, t.token)
        day = t.timestamp.date()
        signed = t.quantity if t.side == "buy" else -t.quantity
        per_day = deltas.setdefault(key, {})
        per_day[day] = QCTX.add(per_day.get(day, ZERO), signed)

    records: list[BalanceRecord] = []
    for (wallet, account, token), per_day in deltas.items():
        balance = ZERO
        for day in sorted(per_day):
            delta = per_day[day]
            if delta == 0:
                continue
            balance = QCTX.add(balance, delta)
            records.append(BalanceRecord(day, wallet, account, token, balance))
    records.sort(key=lambda r: (r.wallet, r.account, r.token, r.date))

    observations = [
        PriceObservation(_ts(tape.start + timedelta(days=d), REFERENCE_HOUR), token, float(path[d]))
        for token, path in sorted(tape.reference_prices.items())
        for d in range(params.days)
    ]
    observations.extend(
        PriceObservation(t.timestamp, t.token, t.price) for t in tape.trades
    )
    observations.sort(key=lambda o: (o.token, o.timestamp, o.price))

    return render_balances_csv(records), render_prices_csv(observations)


def queue_fifo_match(
    buys: Sequence[tuple[Quantity, Price]], sells: Sequence[tuple[Quantity, Price]]
) -> dict[tuple[int, int], Quantity]:
    """Independent FIFO matcher: a mutable queue of open buy lots.

    Returns matched quantity per (sell index, buy index), 1-based, exactly as
    a brute-force lot queue produces it.  No cumulative-range arithmetic.
    """
    queue: deque[list] = deque()
    for b_i, (q, _p) in enumerate(buys, start=1):
        queue.append([q, b_i])
    matches: dict[tuple[int, int], Quantity] = {}
    for s_i, (q, _p) in enumerate(sells, start=1):
        need = q
        while need > 0 and queue:
            lot = queue[0]
            take = min(lot[0], need)
            matches[(s_i, lot[1])] = take
            lot[0] = QCTX.subtract(lot[0], take)
            need = QCTX.subtract(need, take)
            if lot[0] == 0:
                queue.popleft()
    return matches


@dataclass(slots=True)
class OracleLedger:
    """Trade-level FIFO ground truth for one wallet-token pair."""

    key: LedgerKey
    realized_by_sell: list[tuple[date, Money]]
    final_quantity: Quantity
    final_cost_basis: Money
    final_unrealized: Money
    final_total: Money


@dataclass(slots=True)
class OracleResult:
    ledgers: dict[LedgerKey, OracleLedger]


@dataclass(slots=True)
class OracleDailySeries:
    """Day-by-day ground truth, marked at each day's reference price."""

    key: LedgerKey
    first: date
    realized_cum: list[Money]
    cost_basis: list[Money]
    unrealized: list[Money]
    total: list[Money]


def _ledger_groups(tape: TradeTape) -> dict[LedgerKey, list[AtomicTrade]]:
    groups: dict[LedgerKey, list[AtomicTrade]] = {}
    for t in tape.trades:
        groups.setdefault(LedgerKey(t.wallet, t.token), []).append(t)
    return groups


class _QueueState:
    """Mutable FIFO lot queue shared by the oracle entry points."""

    __slots__ = ("lots", "quantity", "cost", "realized", "realized_by_sell")

    def __init__(self):
        self.lots: deque[list] = deque()
        self.quantity = ZERO
        self.cost = 0.0
        self.realized = 0.0
        self.realized_by_sell: list[tuple[date, Money]] = []

    def apply(self, trade: AtomicTrade) -> None:
        if trade.side == "buy":
            self.lots.append([trade.quantity, trade.price])
            self.quantity = QCTX.add(self.quantity, trade.quantity)
            self.cost += float(trade.quantity) * trade.price
            return
        need = trade.quantity
        realized = 0.0
        while need > 0 and self.lots:
            lot = self.lots[0]
            take = min(lot[0], need)
            taken = float(take)
            realized += taken * (trade.price - lot[1])
            self.cost -= taken * lot[1]
            lot[0] = QCTX.subtract(lot[0], take)
            need = QCTX.subtract(need, take)
            if lot[0] == 0:
                self.lots.popleft()
        self.quantity = QCTX.subtract(self.quantity, trade.quantity)
        self.realized += realized
        self.realized_by_sell.append((trade.timestamp.date(), realized))


def oracle_pnl(tape: TradeTape) -> OracleResult:
    """Replay atomic trades through a FIFO lot queue; mark at the end price."""
    out: dict[LedgerKey, OracleLedger] = {}
    last_day = tape.params.days - 1
    for key, trades in sorted(_ledger_groups(tape).items(), key=lambda kv: (kv[0].wallet, kv[0].token)):
        state = _QueueState()
        for t in trades:
            state.apply(t)
        end_price = float(tape.reference_prices[key.token][last_day])
        cb = max(state.cost, 0.0)
        unrealized = float(state.quantity) * end_price - cb
        out[key] = OracleLedger(
            key=key,
            realized_by_sell=state.realized_by_sell,
            final_quantity=state.quantity,
            final_cost_basis=cb,
            final_unrealized=unrealized,
            final_total=state.realized + unrealized,
        )
    return OracleResult(ledgers=out)


def oracle_daily_series(tape: TradeTape) -> dict[LedgerKey, OracleDailySeries]:
    """Day-by-day oracle: apply each day's trades, then mark at that day's
    reference price.  Series start on the ledger's first trade day."""
    params = tape.params
    out: dict[LedgerKey, OracleDailySeries] = {}
    for key, trades in _ledger_groups(tape).items():
        path = tape.reference_prices[key.token]
        first_day = trades[0].timestamp.date()
        first_idx = (first_day - params.start).days
        state = _QueueState()
        realized_cum: list[Money] = []
        cost_basis: list[Money] = []
        unrealized: list[Money] = []
        total: list[Money] = []
        t_i = 0
        for d in range(first_idx, params.days):
            day = params.start + timedelta(days=d)
            while t_i < len(trades) and trades[t_i].timestamp.date() == day:
                state.apply(trades[t_i])
                t_i += 1
            cb = max(state.cost, 0.0)
            u = float(state.quantity) * float(path[d]) - cb
            realized_cum.append(state.realized)
            cost_basis.append(cb)
            unrealized.append(u)
            total.append(state.realized + u)
        out[key] = OracleDailySeries(
            key=key,
            first=first_day,
            realized_cum=realized_cum,
            cost_basis=cost_basis,
            unrealized=unrealized,
            total=total,
        )
    return out


def netting_error_bounds(tape: TradeTape) -> dict[LedgerKey, float]:
    """Analytic per-ledger bound on |engine - oracle| total PnL.

    Collapsing a round trip into the daily net flow loses at most the
    round-trip quantity times that day's intraday price range, summed over
    all round trips of the ledger.
    """
    lo: dict[tuple[str, date], float] = {}
    hi: dict[tuple[str, date], float] = {}
    for token, path in tape.reference_prices.items():
        for d in range(tape.params.days):
            day = tape.params.start + timedelta(days=d)
            lo[(token, day)] = hi[(token, day)] = float(path[d])
    for t in tape.trades:
        k = (t.token, t.timestamp.date())
        lo[k] = min(lo[k], t.price)
        hi[k] = max(hi[k], t.price)

    bounds: dict[LedgerKey, float] = {}
    for t in tape.trades:
        if not (t.round_trip and t.side == "sell"):
            continue
        k = (t.token, t.timestamp.date())
        key = LedgerKey(t.wallet, t.token)
        bounds[key] = bounds.get(key, 0.0) + float(t.quantity) * (hi[k] - lo[k])
    return bounds


def verify_non_negative(tape: TradeTape) -> None:
    """Assert the tape invariant: no account balance ever dips below zero."""
    balances: dict[tuple[str, str, str], Quantity] = {}
    for t in sorted(tape.trades, key=lambda t: t.timestamp):
        key = (t.wallet, t.account, t.token)
        signed = t.quantity if t.side == "buy" else -t.quantity
        new = QCTX.add(balances.get(key, ZERO), signed)
        if new < 0:
            raise AssertionError(f"balance for {key} went negative on {t.timestamp}")
        balances[key] = new

"""Scenario generation, daily collapse, and the trade-level oracle."""

import io
from datetime import date, datetime, time, timedelta, timezone
from decimal import Decimal

import pytest

from tokenpnl.ingest import parse_balances, parse_prices, validate_dataset
from tokenpnl.model import ConfigError, LedgerKey
from tokenpnl.synth import (
    AtomicTrade,
    ScenarioParams,
    TradeTape,
    collapse_to_daily,
    generate_scenario,
    load_params,
    netting_error_bounds,
    oracle_pnl,
    verify_non_negative,
)

import numpy as np

D1 = date(2024, 10, 1)


def ts(day, hour):
    return datetime.combine(day, time(hour), tzinfo=timezone.utc)


def tape_from(trades, days=5, price=2.0):
    params = ScenarioParams(n_wallets=1, n_tokens=1, days=days, start=D1)
    paths = {"T000": np.full(days, float(price))}
    return TradeTape(params=params, seed=0, trades=trades, reference_prices=paths)


def trade(day_offset, side, qty, price, hour=12, rt=False, account="A1"):
    return AtomicTrade(
        ts(D1 + timedelta(days=day_offset), hour), "W0", account, "T000", side,
        Decimal(str(qty)), float(price), round_trip=rt,
    )


class TestGenerateScenario:
    def test_zero_intensity_empty_tape(self):
        tape = generate_scenario(ScenarioParams(n_wallets=5, trade_intensity=0.0), seed=1)
        assert tape.trades == []

    def test_same_seed_identical(self):
        params = ScenarioParams(n_wallets=10, days=20, trade_intensity=0.3, round_trip_prob=0.3)
        a = generate_scenario(params, seed=7)
        b = generate_scenario(params, seed=7)
        assert a.trades == b.trades
        assert all((a.reference_prices[t] == b.reference_prices[t]).all() for t in a.reference_prices)

    def test_no_round_trips_means_single_direction_days(self):
        params = ScenarioParams(n_wallets=20, days=30, trade_intensity=0.5, round_trip_prob=0.0)
        tape = generate_scenario(params, seed=3)
        sides = {}
        for t in tape.trades:
            sides.setdefault((t.wallet, t.token, t.timestamp.date()), set()).add(t.side)
        assert all(len(s) == 1 for s in sides.values())

    def test_balances_never_negative(self):
        params = ScenarioParams(
            n_wallets=30, days=30, trade_intensity=0.5,
            round_trip_prob=0.4, intraday_jitter=0.05, multi_account_prob=0.5,
        )
        verify_non_negative(generate_scenario(params, seed=11))

    def test_invalid_params_rejected(self):
        with pytest.raises(ConfigError):
            ScenarioParams(trade_intensity=1.5).validate()
        with pytest.raises(ConfigError):
            ScenarioParams(volatility=-1).validate()


class TestLoadParams:
    def test_parses_and_validates(self):
        params = load_params("n_wallets=3\ndays=10\n# comment\nvolatility=0.1\nstart=2024-11-01\n")
        assert params.n_wallets == 3
        assert params.start == date(2024, 11, 1)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            load_params("wallets=3\n")

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError):
            load_params("n_wallets=three\n")


class TestCollapseToDaily:
    def parse(self, tape):
        balances_csv, prices_csv = collapse_to_daily(tape)
        records, bdiags = parse_balances(io.BytesIO(balances_csv))
        obs, pdiags = parse_prices(io.BytesIO(prices_csv))
        return records, obs, bdiags + pdiags

    def test_single_buy_emits_record(self):
        records, _, diags = self.parse(tape_from([trade(0, "buy", 5, 2)]))
        assert diags == []
        assert [(r.date, r.balance) for r in records] == [(D1, Decimal(5))]

    def test_same_day_round_trip_emits_nothing(self):
        t = tape_from([trade(0, "buy", 5, 2, hour=10, rt=True), trade(0, "sell", 5, 2, hour=14, rt=True)])
        records, _, _ = self.parse(t)
        assert records == []

    def test_buy_then_partial_sell(self):
        t = tape_from([trade(0, "buy", 5, 2), trade(2, "sell", 2, 2)])
        records, _, _ = self.parse(t)
        assert [(r.date, r.balance) for r in records] == [
            (D1, Decimal(5)),
            (D1 + timedelta(days=2), Decimal(3)),
        ]

    def test_reference_path_priced_every_day(self):
        _, obs, _ = self.parse(tape_from([], days=4))
        assert [o.timestamp.date() for o in obs] == [D1 + timedelta(days=i) for i in range(4)]

    def test_roundtrip_through_ingest_is_clean(self):
        params = ScenarioParams(
            n_wallets=15, days=25, trade_intensity=0.4,
            round_trip_prob=0.3, intraday_jitter=0.04, multi_account_prob=0.3,
        )
        tape = generate_scenario(params, seed=5)
        balances_csv, prices_csv = collapse_to_daily(tape)
        records, bdiags = parse_balances(io.BytesIO(balances_csv))
        obs, pdiags = parse_prices(io.BytesIO(prices_csv))
        assert bdiags == [] and pdiags == []
        summary = validate_dataset(records, obs, {})
        assert summary.diagnostics == []


class TestOracle:
    def test_two_buys_one_sell(self):
        t = tape_from([trade(0, "buy", 10, 1), trade(1, "buy", 5, 2), trade(2, "sell", 12, 3)])
        result = oracle_pnl(t).ledgers[LedgerKey("W0", "T000")]
        assert result.realized_by_sell == [(D1 + timedelta(days=2), pytest.approx(22.0))]
        assert result.final_cost_basis == pytest.approx(6.0)
        assert result.final_quantity == Decimal(3)

    def test_no_sells_zero_realized(self):
        t = tape_from([trade(0, "buy", 10, 2)])
        result = oracle_pnl(t).ledgers[LedgerKey("W0", "T000")]
        assert result.realized_by_sell == []
        assert result.final_total == pytest.approx(0.0)  # marked at the same price

    def test_full_round_trip_flat_price_totals_zero(self):
        t = tape_from([trade(0, "buy", 7, 2), trade(3, "sell", 7, 2)])
        result = oracle_pnl(t).ledgers[LedgerKey("W0", "T000")]
        assert result.final_total == pytest.approx(0.0, abs=1e-12)
        assert result.final_cost_basis == pytest.approx(0.0, abs=1e-12)

    def test_mark_to_market_at_end_price(self):
        params = ScenarioParams(n_wallets=1, n_tokens=1, days=3, start=D1)
        paths = {"T000": np.array([1.0, 2.0, 4.0])}
        t = TradeTape(params=params, seed=0, trades=[trade(0, "buy", 10, 1)], reference_prices=paths)
        result = oracle_pnl(t).ledgers[LedgerKey("W0", "T000")]
        assert result.final_unrealized == pytest.approx(30.0)


class TestNettingBounds:
    def test_bound_counts_round_trip_range(self):
        trades = [
            trade(0, "buy", 10, 2.0),
            trade(1, "buy", 4, 2.2, hour=10, rt=True),
            trade(1, "sell", 4, 1.8, hour=14, rt=True),
        ]
        bounds = netting_error_bounds(tape_from(trades))
        # day-1 observations: ref 2.0 plus legs 2.2 / 1.8 -> range 0.4
        assert bounds[LedgerKey("W0", "T000")] == pytest.approx(4 * 0.4)

    def test_no_round_trips_no_bound(self):
        assert netting_error_bounds(tape_from([trade(0, "buy", 1, 2)])) == {}

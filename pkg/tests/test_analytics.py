"""Reporting layer: aggregation, statistics, concentration, buckets, benchmarks."""

from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tokenpnl.analytics import (
    BucketMatrix,
    PnlSeries,
    WalletTotal,
    aggregate_series,
    benchmark_report,
    bucket_distribution,
    build_buckets,
    concentration,
    decline_from_ath,
    max_drawdown,
    mc_to_aum,
    snapshot_totals,
    summary_stats,
    top_winner_count,
)
from tokenpnl.grid import DailySeries
from tokenpnl.model import ConfigError, EmptySeriesError, InvalidRangeError

D1 = date(2024, 10, 1)


def series(first_offset, totals, realized=None):
    totals = np.asarray(totals, dtype=np.float64)
    realized = np.asarray(realized if realized is not None else np.zeros_like(totals))
    return PnlSeries(
        first=D1 + timedelta(days=first_offset),
        realized_cum=realized,
        unrealized=totals - realized,
        total=totals,
    )


def wt(wallet, total, group="all"):
    return WalletTotal(wallet, group, float(total))


class TestAggregateSeries:
    def test_same_range_elementwise(self):
        out = aggregate_series([series(0, [1, 2]), series(0, [3, 3])])
        assert out.total.tolist() == [4.0, 5.0]

    def test_single_series_identity(self):
        out = aggregate_series([series(0, [1, 2])])
        assert out.total.tolist() == [1.0, 2.0]

    def test_union_with_zero_prefix_and_carried_suffix(self):
        out = aggregate_series([series(0, [1, 2]), series(1, [5, 6])])
        assert out.first == D1
        assert out.total.tolist() == [1.0, 7.0, 8.0]

    def test_empty_list(self):
        out = aggregate_series([])
        assert out.first is None
        assert len(out) == 0


class TestSnapshotTotals:
    def test_carry_forward_past_series_end(self):
        totals = snapshot_totals({"W1": [series(0, [10, 25])]}, D1 + timedelta(days=9))
        assert totals == [wt("W1", 25.0)]

    def test_sums_across_tokens(self):
        totals = snapshot_totals(
            {"W1": [series(0, [10]), series(0, [-4])]}, D1
        )
        assert totals == [wt("W1", 6.0)]

    def test_wallet_without_ledgers_excluded(self):
        totals = snapshot_totals({"W1": [], "W2": [series(0, [1])]}, D1)
        assert [t.wallet for t in totals] == ["W2"]


class TestSummaryStats:
    def test_hand_statistics(self):
        stats = summary_stats([wt("a", -5), wt("b", 0), wt("c", 10)])
        assert stats.users == 3
        assert stats.mean == pytest.approx(5 / 3)
        assert stats.median == 0.0
        assert stats.pct_profitable == pytest.approx(1 / 3)
        assert stats.pct_loss == pytest.approx(1 / 3)
        assert stats.pct_zero == pytest.approx(1 / 3)

    def test_all_zero(self):
        stats = summary_stats([wt("a", 0), wt("b", 0)])
        assert stats.pct_zero == 1.0

    def test_single_wallet(self):
        stats = summary_stats([wt("a", 7)])
        assert stats.min == stats.median == stats.max == 7.0

    def test_empty_rejected(self):
        with pytest.raises(EmptySeriesError):
            summary_stats([])

    @given(values=st.lists(st.integers(min_value=-100, max_value=100), min_size=1, max_size=50))
    @settings(max_examples=100)
    def test_percentages_partition_and_permutation_invariant(self, values):
        totals = [wt(f"W{i}", v) for i, v in enumerate(values)]
        stats = summary_stats(totals)
        assert abs(stats.pct_profitable + stats.pct_loss + stats.pct_zero - 1) <= 1e-12
        assert stats.min <= stats.median <= stats.max
        shuffled = summary_stats(list(reversed(totals)))
        assert shuffled == stats


class TestConcentration:
    def test_hand_computation(self):
        totals = [wt("a", 100), wt("b", 10), wt("c", 5), wt("d", 1), wt("e", -50)]
        report = concentration(totals, 0.25)
        assert report.winners == 4
        assert report.top_count == 1
        assert report.top_share == pytest.approx(100 / 116)

    def test_large_cohort_arithmetic(self):
        assert top_winner_count(259_016, 0.01) == 2_590

    def test_single_winner_takes_all(self):
        report = concentration([wt("a", 42)], 0.5)
        assert report.top_count == 1
        assert report.top_share == 1.0

    def test_no_winners_flagged(self):
        report = concentration([wt("a", -1)], 0.01)
        assert report.winners == 0
        assert report.top_share is None

    def test_bad_fraction_rejected(self):
        with pytest.raises(ConfigError):
            concentration([wt("a", 1)], 0.0)

    @given(
        values=st.lists(st.floats(min_value=0.01, max_value=1e6), min_size=1, max_size=60),
        f1=st.floats(min_value=0.01, max_value=1.0),
        f2=st.floats(min_value=0.01, max_value=1.0),
    )
    @settings(max_examples=100)
    def test_share_dominates_fraction_and_is_monotone(self, values, f1, f2):
        totals = [wt(f"W{i:04d}", v) for i, v in enumerate(values)]
        lo, hi = sorted([f1, f2])
        r_lo = concentration(totals, lo)
        r_hi = concentration(totals, hi)
        assert r_lo.top_share >= r_lo.top_count / r_lo.winners - 1e-12
        assert r_hi.top_share >= r_lo.top_share - 1e-12


class TestBuckets:
    def test_default_bucket_layout(self):
        labels = [b[0] for b in build_buckets([-10.0, 0.0, 10.0])]
        assert labels == ["(-inf..-10]", "(-10..0)", "0", "(0..10]", "(10..inf)"]

    def test_non_increasing_rejected(self):
        with pytest.raises(ConfigError):
            build_buckets([1.0, 1.0])

    def test_hand_distribution(self):
        wallets = {
            "W1": series(0, [5.0]),
            "W2": series(0, [-5.0]),
            "W3": series(0, [0.0]),
        }
        matrix = bucket_distribution(wallets, [-10.0, 0.0, 10.0], [D1])
        row = dict(zip(matrix.labels, matrix.shares[0]))
        assert row["(-10..0)"] == pytest.approx(1 / 3)
        assert row["0"] == pytest.approx(1 / 3)
        assert row["(0..10]"] == pytest.approx(1 / 3)

    def test_all_zero_goes_to_zero_bucket(self):
        matrix = bucket_distribution({"W1": series(0, [0.0])}, [-10.0, 0.0, 10.0], [D1])
        assert dict(zip(matrix.labels, matrix.shares[0]))["0"] == 1.0

    def test_crossing_zero_moves_bucket(self):
        wallets = {"W1": series(0, [5.0, -5.0])}
        days = [D1, D1 + timedelta(days=1)]
        matrix = bucket_distribution(wallets, [-10.0, 0.0, 10.0], days)
        assert matrix.shares[0][matrix.labels.index("(0..10]")] == 1.0
        assert matrix.shares[1][matrix.labels.index("(-10..0)")] == 1.0

    def test_inactive_wallets_not_counted(self):
        wallets = {"W1": series(0, [1.0]), "W2": series(2, [1.0])}
        days = [D1, D1 + timedelta(days=2)]
        matrix = bucket_distribution(wallets, [-10.0, 0.0, 10.0], days)
        assert matrix.active == [1, 2]

    @given(
        data=st.data(),
        n_wallets=st.integers(min_value=1, max_value=12),
    )
    @settings(max_examples=60)
    def test_shares_sum_to_one(self, data, n_wallets):
        wallets = {}
        for i in range(n_wallets):
            vals = data.draw(
                st.lists(st.floats(min_value=-1e5, max_value=1e5), min_size=1, max_size=5)
            )
            wallets[f"W{i}"] = series(data.draw(st.integers(0, 3)), vals)
        days = [D1 + timedelta(days=o) for o in range(8)]
        matrix = bucket_distribution(wallets, list(range(-1000, 1001, 250)), days)
        for row in matrix.shares:
            assert abs(row.sum() - 1.0) <= 1e-12


class TestDrawdownAndDecline:
    def test_peak_to_trough(self):
        assert max_drawdown([1.0, 2.0, 1.0]) == pytest.approx(0.5)

    def test_monotone_has_none(self):
        assert max_drawdown([1.0, 2.0, 3.0]) == 0.0

    def test_big_drop(self):
        assert max_drawdown([10.0, 1.0]) == pytest.approx(0.9)

    def test_non_positive_rejected(self):
        with pytest.raises(ValueError):
            max_drawdown([1.0, 0.0])

    def test_decline_examples(self):
        s = DailySeries(D1, [100.0, 50.0, 7.0])
        decline, ath = decline_from_ath(s)
        assert decline == pytest.approx(0.93)
        assert ath == D1

    def test_decline_constant_is_zero(self):
        assert decline_from_ath(DailySeries(D1, [5.0, 5.0]))[0] == 0.0

    def test_decline_zero_when_last_is_max(self):
        assert decline_from_ath(DailySeries(D1, [1.0, 3.0]))[0] == 0.0

    @given(values=st.lists(st.floats(min_value=0.01, max_value=1e4), min_size=1, max_size=40))
    @settings(max_examples=100)
    def test_matches_quadratic_oracle(self, values):
        got = max_drawdown(values)
        want = 0.0
        for i in range(len(values)):
            for j in range(i, len(values)):
                want = max(want, (values[i] - values[j]) / values[i])
        assert got == pytest.approx(want, abs=1e-12)


class TestMcToAum:
    def test_simple_ratio(self):
        peak, ratio, skipped = mc_to_aum(DailySeries(D1, [100.0]), DailySeries(D1, [10.0]))
        assert peak == 10.0
        assert ratio.values == [10.0]
        assert skipped == []

    def test_equal_series_is_one(self):
        peak, ratio, _ = mc_to_aum(DailySeries(D1, [5.0, 5.0]), DailySeries(D1, [5.0, 5.0]))
        assert peak == 1.0
        assert ratio.values == [1.0, 1.0]

    def test_extreme_regime(self):
        peak, _, _ = mc_to_aum(DailySeries(D1, [5e7]), DailySeries(D1, [5e3]))
        assert peak == pytest.approx(10_000.0)

    def test_zero_aum_day_skipped(self):
        peak, ratio, skipped = mc_to_aum(
            DailySeries(D1, [10.0, 10.0]), DailySeries(D1, [0.0, 5.0])
        )
        assert skipped == [D1]
        assert peak == 2.0

    def test_no_overlap_rejected(self):
        with pytest.raises(InvalidRangeError):
            mc_to_aum(DailySeries(D1, [1.0]), DailySeries(D1 + timedelta(days=5), [1.0]))


class TestBenchmarkReport:
    def test_declines_versus_benchmark(self):
        report, skipped = benchmark_report(
            {
                "TOK": DailySeries(D1, [100.0, 50.0, 7.0]),
                "BENCH": DailySeries(D1, [10.0, 8.0, 6.0]),
            },
            "BENCH",
        )
        assert skipped == []
        assert report.benchmark.decline_from_ath == pytest.approx(0.40)
        assert report.tokens[0].decline_from_ath == pytest.approx(0.93)
        assert report.average_decline == pytest.approx(0.93)

    def test_single_day_series_all_zero_metrics(self):
        report, _ = benchmark_report({"B": DailySeries(D1, [4.0])}, "B")
        assert report.benchmark.max_drawdown == 0.0
        assert report.benchmark.decline_from_ath == 0.0

    def test_missing_benchmark_rejected(self):
        with pytest.raises(ValueError):
            benchmark_report({"T": DailySeries(D1, [1.0])}, "B")

    def test_unmeasurable_token_skipped(self):
        report, skipped = benchmark_report(
            {"B": DailySeries(D1, [1.0]), "Z": DailySeries(D1, [0.0])}, "B"
        )
        assert skipped == ["Z"]
        assert report.average_decline is None


class TestCommutesWithAggregation:
    @given(data=st.data())
    @settings(max_examples=60)
    def test_sum_of_snapshots_equals_snapshot_of_aggregate(self, data):
        n = data.draw(st.integers(min_value=1, max_value=8))
        per_wallet = {}
        for i in range(n):
            k = data.draw(st.integers(min_value=1, max_value=3))
            per_wallet[f"W{i}"] = [
                series(
                    data.draw(st.integers(0, 4)),
                    data.draw(
                        st.lists(
                            st.floats(min_value=-1e4, max_value=1e4), min_size=1, max_size=6
                        )
                    ),
                )
                for _ in range(k)
            ]
        snapshot = D1 + timedelta(days=12)
        totals = snapshot_totals(per_wallet, snapshot)
        lhs = sum(t.total for t in totals)
        rhs = aggregate_series([s for ss in per_wallet.values() for s in ss]).total_on(snapshot)
        assert lhs == pytest.approx(rhs, abs=1e-9)

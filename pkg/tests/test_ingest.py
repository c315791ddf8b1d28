"""Parsing and validation of the three input tables."""

import io
from datetime import date, datetime, timezone
from decimal import Decimal

import pytest

from tokenpnl.ingest import (
    parse_balances,
    parse_caps,
    parse_prices,
    render_balances_csv,
    render_prices_csv,
    validate_dataset,
)
from tokenpnl.model import BalanceRecord, ParseError, PriceObservation


def bio(text: str) -> io.BytesIO:
    return io.BytesIO(text.encode("utf-8"))


BAL_HEADER = "date,wallet,account,token,balance\n"
PRICE_HEADER = "timestamp,token,price\n"


class TestParseBalances:
    def test_single_row(self):
        records, diags = parse_balances(bio(BAL_HEADER + "2024-11-01,W1,A1,T1,5\n"))
        assert diags == []
        assert records == [BalanceRecord(date(2024, 11, 1), "W1", "A1", "T1", Decimal(5))]

    def test_duplicate_key_last_wins(self):
        text = BAL_HEADER + "2024-11-01,W1,A1,T1,5\n2024-11-01,W1,A1,T1,7\n"
        records, diags = parse_balances(bio(text))
        assert len(records) == 1
        assert records[0].balance == Decimal(7)
        assert [d.kind for d in diags] == ["duplicate_key"]

    def test_negative_balance_rejected(self):
        records, diags = parse_balances(bio(BAL_HEADER + "2024-11-01,W1,A1,T1,-1\n"))
        assert records == []
        assert [d.kind for d in diags] == ["negative_balance"]
        assert diags[0].line == 2

    def test_missing_header_fatal(self):
        with pytest.raises(ParseError):
            parse_balances(bio("2024-11-01,W1,A1,T1,5\n"))

    def test_wrong_column_count_fatal(self):
        with pytest.raises(ParseError) as err:
            parse_balances(bio(BAL_HEADER + "2024-11-01,W1,A1,T1\n"))
        assert err.value.line == 2

    def test_unparseable_row_skipped_with_diagnostic(self):
        text = BAL_HEADER + "notadate,W1,A1,T1,5\n2024-11-01,W1,A1,T1,5\n"
        records, diags = parse_balances(bio(text))
        assert len(records) == 1
        assert [d.kind for d in diags] == ["bad_row"]

    def test_sorted_output(self):
        text = (
            BAL_HEADER
            + "2024-11-02,W2,A1,T1,1\n"
            + "2024-11-01,W1,A2,T1,2\n"
            + "2024-11-01,W1,A1,T2,3\n"
            + "2024-11-01,W1,A1,T1,4\n"
        )
        records, _ = parse_balances(bio(text))
        keys = [(r.wallet, r.account, r.token, r.date) for r in records]
        assert keys == sorted(keys)

    def test_exact_eighteen_decimals(self):
        text = BAL_HEADER + "2024-11-01,W1,A1,T1,0.123456789012345678\n"
        records, _ = parse_balances(bio(text))
        assert records[0].balance == Decimal("0.123456789012345678")


class TestParsePrices:
    def test_single_observation(self):
        obs, diags = parse_prices(bio(PRICE_HEADER + "2024-11-01T13:00:00Z,T1,2.5\n"))
        assert diags == []
        assert obs == [
            PriceObservation(datetime(2024, 11, 1, 13, tzinfo=timezone.utc), "T1", 2.5)
        ]

    def test_negative_price_rejected(self):
        obs, diags = parse_prices(bio(PRICE_HEADER + "2024-11-01T13:00:00Z,T1,-3\n"))
        assert obs == []
        assert [d.kind for d in diags] == ["negative_price"]

    def test_same_second_both_kept(self):
        text = PRICE_HEADER + "2024-11-01T13:00:00Z,T1,2\n2024-11-01T13:00:00Z,T1,3\n"
        obs, _ = parse_prices(bio(text))
        assert len(obs) == 2

    def test_bad_timestamp_skipped(self):
        text = PRICE_HEADER + "yesterday,T1,2\n2024-11-01T13:00:00Z,T1,3\n"
        obs, diags = parse_prices(bio(text))
        assert len(obs) == 1
        assert [d.kind for d in diags] == ["bad_timestamp"]

    def test_sorted_by_token_then_time(self):
        text = (
            PRICE_HEADER
            + "2024-11-02T00:00:00Z,T2,1\n"
            + "2024-11-01T00:00:00Z,T2,1\n"
            + "2024-11-03T00:00:00Z,T1,1\n"
        )
        obs, _ = parse_prices(bio(text))
        keys = [(o.token, o.timestamp) for o in obs]
        assert keys == sorted(keys)


class TestParseCaps:
    def test_single_cap(self):
        caps = parse_caps(bio("token,max_price\nT1,100\n"))
        assert caps == {"T1": 100.0}

    def test_empty_table(self):
        assert parse_caps(bio("token,max_price\n")) == {}

    def test_duplicate_token_fatal(self):
        with pytest.raises(ParseError):
            parse_caps(bio("token,max_price\nT1,100\nT1,50\n"))

    def test_non_positive_cap_fatal(self):
        with pytest.raises(ParseError):
            parse_caps(bio("token,max_price\nT1,0\n"))


class TestValidateDataset:
    def test_priced_token_no_cross_diagnostics(self):
        records, _ = parse_balances(bio(BAL_HEADER + "2024-11-01,W1,A1,T1,5\n"))
        obs, _ = parse_prices(bio(PRICE_HEADER + "2024-11-01T13:00:00Z,T1,2.5\n"))
        summary = validate_dataset(records, obs, {})
        assert summary.diagnostics == []
        assert summary.n_wallets == 1
        assert summary.n_tokens == 1

    def test_unpriced_token_flagged(self):
        records, _ = parse_balances(bio(BAL_HEADER + "2024-11-01,W1,A1,T2,5\n"))
        summary = validate_dataset(records, [], {})
        assert [d.kind for d in summary.diagnostics] == ["unpriced_token"]

    def test_empty_balances(self):
        summary = validate_dataset([], [], {})
        assert summary.n_wallets == 0
        assert summary.balance_span is None


class TestRoundTrip:
    def test_balances_roundtrip_exactly(self):
        text = (
            BAL_HEADER
            + "2024-11-01,W1,A1,T1,5.100000000000000001\n"
            + "2024-11-03,W1,A1,T1,0\n"
        )
        records, _ = parse_balances(bio(text))
        again, diags = parse_balances(io.BytesIO(render_balances_csv(records)))
        assert diags == []
        assert again == records

    def test_prices_roundtrip(self):
        text = PRICE_HEADER + "2024-11-01T13:00:05Z,T1,2.5\n2024-11-01T13:00:05Z,T1,0.001\n"
        obs, _ = parse_prices(bio(text))
        again, diags = parse_prices(io.BytesIO(render_prices_csv(obs)))
        assert diags == []
        assert again == obs

    def test_accepted_plus_rejected_equals_input(self):
        text = (
            BAL_HEADER
            + "2024-11-01,W1,A1,T1,5\n"
            + "bad,W1,A1,T1,5\n"
            + "2024-11-01,W1,A1,T1,-2\n"
            + "2024-11-02,W1,A1,T1,6\n"
        )
        records, diags = parse_balances(bio(text))
        assert len(records) + len(diags) == 4

"""CSV ingestion and validation for the three input tables.

Balances and prices are parsed permissively: rows with unparseable or
out-of-range values are skipped and reported as diagnostics, while structural
problems (missing header, wrong column count) abort the parse.  The caps
table is small and curated, so any problem there is fatal.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import date
from typing import BinaryIO

from .model import (
    BalanceRecord,
    ParseError,
    Price,
    PriceObservation,
    format_timestamp,
    parse_date,
    parse_quantity,
    parse_timestamp,
)

BALANCES_HEADER = ["date", "wallet", "account", "token", "balance"]
PRICES_HEADER = ["timestamp", "token", "price"]
CAPS_HEADER = ["token", "max_price"]

# token -> maximum admissible price observation
CapTable = dict[str, Price]


@dataclass(frozen=True, slots=True)
class Diagnostic:
    """A non-fatal data-quality finding tied to an input row or table."""

    kind: str
    message: str
    line: int | None = None

    def render(self) -> str:
        if self.line is not None:
            return f"{self.kind}: line {self.line}: {self.message}"
        return f"{self.kind}: {self.message}"


@dataclass(slots=True)
class DatasetSummary:
    """Counts, spans, and cross-table diagnostics for one parsed dataset."""

    n_balance_records: int
    n_price_observations: int
    n_wallets: int
    n_accounts: int
    n_tokens: int
    balance_span: tuple[date, date] | None
    price_span: tuple[date, date] | None
    diagnostics: list[Diagnostic] = field(default_factory=list)


def _text_reader(source: BinaryIO):
    text = io.TextIOWrapper(source, encoding="utf-8", newline="")
    return csv.reader(text)


def _check_header(row: list[str] | None, expected: list[str], table: str) -> None:
    if row is None:
        raise ParseError(f"{table}: empty file, expected header {','.join(expected)}", line=1)
    if [c.strip() for c in row] != expected:
        raise ParseError(
            f"{table}: bad header {','.join(row)!r}, expected {','.join(expected)}",
            line=1,
        )


def parse_balances(source: BinaryIO) -> tuple[list[BalanceRecord], list[Diagnostic]]:
    """Parse the balances table into records sorted by (wallet, account, token, date).

    Duplicate full keys collapse to the last occurrence; negative balances and
    unparseable values are rejected.  Both cases emit diagnostics.
    """
    reader = _text_reader(source)
    header = next(reader, None)
    _check_header(header, BALANCES_HEADER, "balances")

    diagnostics: list[Diagnostic] = []
    by_key: dict[tuple[str, str, str, date], BalanceRecord] = {}
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(BALANCES_HEADER):
            raise ParseError(
                f"balances: expected {len(BALANCES_HEADER)} columns, got {len(row)}",
                line=line_no,
            )
        day_text, wallet, account, token, balance_text = row
        try:
            day = parse_date(day_text)
            balance = parse_quantity(balance_text)
        except (ValueError, ArithmeticError):
            diagnostics.append(Diagnostic("bad_row", f"unparseable balance row {row!r}", line_no))
            continue
        if not wallet or not account or not token:
            diagnostics.append(Diagnostic("bad_row", f"empty id field in row {row!r}", line_no))
            continue
        if balance < 0:
            diagnostics.append(
                Diagnostic("negative_balance", f"{wallet}/{account}/{token} on {day}: {balance}", line_no)
            )
            continue
        key = (wallet, account, token, day)
        if key in by_key:
            diagnostics.append(
                Diagnostic("duplicate_key", f"{wallet}/{account}/{token} on {day}: keeping last value", line_no)
            )
        by_key[key] = BalanceRecord(day, wallet, account, token, balance)

    records = sorted(by_key.values(), key=lambda r: (r.wallet, r.account, r.token, r.date))
    return records, diagnostics


def parse_prices(source: BinaryIO) -> tuple[list[PriceObservation], list[Diagnostic]]:
    """Parse price observations sorted by (token, timestamp); no deduplication."""
    reader = _text_reader(source)
    header = next(reader, None)
    _check_header(header, PRICES_HEADER, "prices")

    diagnostics: list[Diagnostic] = []
    observations: list[PriceObservation] = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(PRICES_HEADER):
            raise ParseError(
                f"prices: expected {len(PRICES_HEADER)} columns, got {len(row)}",
                line=line_no,
            )
        ts_text, token, price_text = row
        try:
            ts = parse_timestamp(ts_text)
        except ValueError:
            diagnostics.append(Diagnostic("bad_timestamp", f"unparseable timestamp {ts_text!r}", line_no))
            continue
        try:
            price = float(price_text)
        except ValueError:
            diagnostics.append(Diagnostic("bad_row", f"unparseable price {price_text!r}", line_no))
            continue
        if not token:
            diagnostics.append(Diagnostic("bad_row", f"empty token in row {row!r}", line_no))
            continue
        if price != price or price in (float("inf"), float("-inf")):
            diagnostics.append(Diagnostic("bad_row", f"non-finite price {price_text!r}", line_no))
            continue
        if price < 0:
            diagnostics.append(Diagnostic("negative_price", f"{token} at {ts_text}: {price_text}", line_no))
            continue
        observations.append(PriceObservation(ts, token, price))

    observations.sort(key=lambda o: (o.token, o.timestamp))
    return observations, diagnostics


def parse_caps(source: BinaryIO) -> CapTable:
    """Parse per-token price caps; any ambiguity or bad value is fatal."""
    reader = _text_reader(source)
    header = next(reader, None)
    _check_header(header, CAPS_HEADER, "caps")

    caps: CapTable = {}
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CAPS_HEADER):
            raise ParseError(f"caps: expected 2 columns, got {len(row)}", line=line_no)
        token, cap_text = row
        if token in caps:
            raise ParseError(f"caps: duplicate token {token!r}", line=line_no)
        try:
            cap = float(cap_text)
        except ValueError:
            raise ParseError(f"caps: unparseable cap {cap_text!r}", line=line_no)
        if not (cap > 0):
            raise ParseError(f"caps: cap for {token!r} must be > 0, got {cap_text}", line=line_no)
        caps[token] = cap
    return caps


def validate_dataset(
    balances: list[BalanceRecord],
    prices: list[PriceObservation],
    caps: CapTable,
    row_diagnostics: list[Diagnostic] | None = None,
) -> DatasetSummary:
    """Summarize accepted rows and flag cross-table problems.

    Tokens that have balances but no price observations cannot be valued;
    their ledgers are skipped downstream, so they are flagged here.
    """
    wallets = set()
    accounts = set()
    balance_tokens = set()
    for r in balances:
        wallets.add(r.wallet)
        accounts.add((r.wallet, r.account, r.token))
        balance_tokens.add(r.token)
    priced_tokens = {o.token for o in prices}

    diagnostics = list(row_diagnostics) if row_diagnostics else []
    for token in sorted(balance_tokens - priced_tokens):
        diagnostics.append(
            Diagnostic("unpriced_token", f"{token}: balances present but no price observations; ledgers skipped")
        )

    balance_span = None
    if balances:
        days = [r.date for r in balances]
        balance_span = (min(days), max(days))
    price_span = None
    if prices:
        days = [o.timestamp.date() for o in prices]
        price_span = (min(days), max(days))

    return DatasetSummary(
        n_balance_records=len(balances),
        n_price_observations=len(prices),
        n_wallets=len(wallets),
        n_accounts=len(accounts),
        n_tokens=len(balance_tokens | priced_tokens),
        balance_span=balance_span,
        price_span=price_span,
        diagnostics=diagnostics,
    )


def render_balances_csv(records: list[BalanceRecord]) -> bytes:
    """Serialize balance records in the exact input schema (round-trip safe)."""
    out = io.StringIO()
    out.write(",".join(BALANCES_HEADER) + "\n")
    for r in records:
        out.write(f"{r.date.isoformat()},{r.wallet},{r.account},{r.token},{r.balance}\n")
    return out.getvalue().encode("utf-8")


def render_prices_csv(observations: list[PriceObservation]) -> bytes:
    """Serialize price observations in the exact input schema."""
    out = io.StringIO()
    out.write(",".join(PRICES_HEADER) + "\n")
    for o in observations:
        out.write(f"{format_timestamp(o.timestamp)},{o.token},{o.price!r}\n")
    return out.getvalue().encode("utf-8")


def render_caps_csv(caps: CapTable) -> bytes:
    out = io.StringIO()
    out.write(",".join(CAPS_HEADER) + "\n")
    for token in sorted(caps):
        out.write(f"{token},{caps[token]!r}\n")
    return out.getvalue().encode("utf-8")

"""Core value types and conventions shared by every stage of the engine.

Calendar days are UTC dates with no time component.  Token quantities are
exact decimals (balance tables are exact on-chain values); prices and money
amounts are binary floats compared at 1e-9 absolute tolerance and serialized
at six decimal places, round-half-even.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from decimal import ROUND_HALF_EVEN, Context, Decimal

# Quantities carry up to 18 fractional digits on top of a potentially large
# integer part; 50 significant digits keeps every sum and difference exact.
QUANTITY_PRECISION = 50
QCTX = Context(prec=QUANTITY_PRECISION)

MONEY_DECIMALS = 6

ZERO = Decimal(0)

# Semantic aliases; quantities are exact, prices/money are floats.
Quantity = Decimal
Price = float
Money = float


class TokenPnlError(Exception):
    """Base class for errors raised by this package."""


class InvalidRangeError(TokenPnlError):
    """A date range or series span is inverted or out of bounds."""


class EmptySeriesError(TokenPnlError):
    """An operation that requires at least one observation got none."""


class DisjointRangeError(TokenPnlError):
    """Balance and price series do not overlap; the ledger is skipped."""


class ParseError(TokenPnlError):
    """Fatal input-file problem (bad header, wrong column count, bad caps)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(TokenPnlError):
    """Invalid run configuration (flags, parameter files)."""


@dataclass(frozen=True, slots=True)
class LedgerKey:
    """Identifies one wallet-token ledger."""

    wallet: str
    token: str


@dataclass(frozen=True, slots=True)
class BalanceRecord:
    """End-of-day balance of one token account, recorded on change days."""

    date: date
    wallet: str
    account: str
    token: str
    balance: Quantity


@dataclass(frozen=True, slots=True)
class PriceObservation:
    """One USD price observation for a token at second precision, UTC."""

    timestamp: datetime
    token: str
    price: Price


def date_range(first: date, last: date) -> list[date]:
    """Inclusive, consecutive, ascending list of days from first to last."""
    if first > last:
        raise InvalidRangeError(f"range start {first} is after end {last}")
    n = last.toordinal() - first.toordinal() + 1
    one = timedelta(days=1)
    out = []
    d = first
    for _ in range(n):
        out.append(d)
        d += one
    return out


def parse_date(text: str) -> date:
    """Parse an ISO-8601 `YYYY-MM-DD` calendar day."""
    return date.fromisoformat(text)


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 UTC instant with a `Z` suffix, second precision."""
    if not text.endswith("Z"):
        raise ValueError(f"timestamp {text!r} must end with 'Z'")
    return datetime.fromisoformat(text[:-1]).replace(tzinfo=timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_quantity(text: str) -> Quantity:
    """Parse an exact decimal token amount; rejects non-finite values."""
    q = Decimal(text)
    if not q.is_finite():
        raise ValueError(f"quantity {text!r} is not finite")
    return q


def round_money(value: Money | Decimal, places: int = MONEY_DECIMALS) -> Money:
    """Round a money amount half-even at `places` decimal digits.

    Floats are rounded on their shortest decimal representation, so literals
    like 2.5e-6 behave as written rather than as their binary approximation.
    """
    if places < 0:
        raise ValueError("places must be >= 0")
    if isinstance(value, Decimal):
        d = value
    else:
        f = float(value)
        if f != f or f in (float("inf"), float("-inf")):
            raise ValueError("money value must be finite")
        d = Decimal(repr(f))
    exp = Decimal(1).scaleb(-places)
    return float(d.quantize(exp, rounding=ROUND_HALF_EVEN, context=QCTX))

"""Batch analytics engine for wallet-token PnL from sparse daily snapshots."""

__version__ = "0.1.0"

from .model import (
    BalanceRecord,
    LedgerKey,
    PriceObservation,
    TokenPnlError,
    date_range,
    round_money,
)

__all__ = [
    "BalanceRecord",
    "LedgerKey",
    "PriceObservation",
    "TokenPnlError",
    "date_range",
    "round_money",
    "__version__",
]

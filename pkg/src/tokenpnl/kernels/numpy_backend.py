"""Pure-numpy implementations of the hot per-day kernels.

All kernels operate on flat arrays covering a whole batch of ledgers, with
offset arrays marking per-ledger boundaries.  Arithmetic is plain IEEE
element-wise math so results are bit-identical to the compiled backend.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def forward_fill(day_idx: np.ndarray, values: np.ndarray, n_days: int) -> np.ndarray:
    """Expand sparse (day index, value) pairs into a dense daily array.

    `day_idx` must be strictly increasing with day_idx[0] == 0; there is no
    backward fill.
    """
    bounds = np.empty(len(day_idx) + 1, dtype=np.int64)
    bounds[:-1] = day_idx
    bounds[-1] = n_days
    return np.repeat(values, np.diff(bounds))


def grouped_median(group_off: np.ndarray, sorted_values: np.ndarray) -> np.ndarray:
    """Median of each group of an ascending-sorted value array.

    `group_off` holds group boundaries (len = n_groups + 1); each group's
    values are already sorted.  Even-sized groups take the mean of the two
    middle values.
    """
    sizes = np.diff(group_off)
    lo = group_off[:-1] + (sizes - 1) // 2
    hi = group_off[:-1] + sizes // 2
    return (sorted_values[lo] + sorted_values[hi]) / 2.0


def expand_ledger_days(
    out_off: np.ndarray,
    brk_off: np.ndarray,
    brk_day: np.ndarray,
    brk_q: np.ndarray,
    brk_cb: np.ndarray,
    brk_r: np.ndarray,
    price_ptr: np.ndarray,
    prices: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Expand per-ledger step state into daily unrealized and total PnL.

    For ledger i, rows out_off[i]:out_off[i+1] hold its days; breakpoints
    brk_off[i]:brk_off[i+1] hold (relative day, quantity, cost basis,
    realized) steps with the first day at 0.  prices[price_ptr[i] + d] is the
    ledger's price on relative day d.  Returns (unrealized, total) arrays.
    """
    n_days = np.diff(out_off)
    total_days = int(out_off[-1])

    # run length of each breakpoint: until the next break, or the ledger end
    next_day = np.empty_like(brk_day)
    next_day[:-1] = brk_day[1:]
    last_idx = brk_off[1:] - 1
    next_day[last_idx] = n_days
    run = next_day - brk_day

    q = np.repeat(brk_q, run)
    cb = np.repeat(brk_cb, run)
    r = np.repeat(brk_r, run)

    gidx = (
        np.arange(total_days, dtype=np.int64)
        - np.repeat(out_off[:-1], n_days)
        + np.repeat(price_ptr, n_days)
    )
    p = prices[gidx]
    u = q * p - cb
    return u, r + u

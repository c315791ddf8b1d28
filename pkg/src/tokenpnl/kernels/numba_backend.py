"""Numba-compiled versions of the hot per-day kernels.

Same contracts as the numpy backend; loops are fused so the batch is walked
once with no temporaries.  fastmath stays off so float results match the
numpy backend bit for bit.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"

_JIT = {"cache": True, "nogil": True}


@njit(**_JIT)
def _forward_fill(day_idx, values, n_days, out):
    k = 0
    current = values[0]
    for d in range(n_days):
        while k + 1 < day_idx.shape[0] and day_idx[k + 1] <= d:
            k += 1
            current = values[k]
        out[d] = current


def forward_fill(day_idx: np.ndarray, values: np.ndarray, n_days: int) -> np.ndarray:
    out = np.empty(n_days, dtype=values.dtype)
    _forward_fill(day_idx, values, n_days, out)
    return out


@njit(**_JIT)
def _grouped_median(group_off, sorted_values, out):
    for g in range(group_off.shape[0] - 1):
        o = group_off[g]
        size = group_off[g + 1] - o
        lo = o + (size - 1) // 2
        hi = o + size // 2
        out[g] = (sorted_values[lo] + sorted_values[hi]) / 2.0


def grouped_median(group_off: np.ndarray, sorted_values: np.ndarray) -> np.ndarray:
    out = np.empty(len(group_off) - 1, dtype=np.float64)
    _grouped_median(group_off, sorted_values, out)
    return out


@njit(**_JIT)
def _expand_ledger_days(out_off, brk_off, brk_day, brk_q, brk_cb, brk_r, price_ptr, prices, u, t):
    for i in range(out_off.shape[0] - 1):
        o0 = out_off[i]
        n = out_off[i + 1] - o0
        b_end = brk_off[i + 1]
        k = brk_off[i]
        p0 = price_ptr[i]
        for d in range(n):
            while k + 1 < b_end and brk_day[k + 1] <= d:
                k += 1
            ud = brk_q[k] * prices[p0 + d] - brk_cb[k]
            u[o0 + d] = ud
            t[o0 + d] = brk_r[k] + ud


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
    total_days = int(out_off[-1])
    u = np.empty(total_days, dtype=np.float64)
    t = np.empty(total_days, dtype=np.float64)
    _expand_ledger_days(out_off, brk_off, brk_day, brk_q, brk_cb, brk_r, price_ptr, prices, u, t)
    return u, t

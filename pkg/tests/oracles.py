"""Independent oracles the test suite checks implementations against.

Everything here is deliberately written the slow, explicit way (per-minute
compounding loops, central finite differences) and must stay independent of
the library code paths it is used to verify.
"""

from __future__ import annotations

import numpy as np


def per_minute_returns(closes) -> list[float]:
    return [closes[m] / closes[m - 1] - 1.0 for m in range(1, len(closes))]


def compound(returns, start: int, end: int) -> float:
    """Cumulative return from minute `start`'s close to minute `end`'s close,
    compounding the per-minute returns one at a time. `returns[m]` is the
    return into minute m (returns[0] unused)."""
    acc = 1.0
    for m in range(start + 1, end + 1):
        acc *= 1.0 + returns[m]
    return acc - 1.0


def observation_oracle(closes, universe_mean_returns, end_x: int) -> np.ndarray:
    """Brute-force observation: for each minute k, compound the symbol's and
    the universe's returns from k to the last observed minute E, flip the
    signs so entries express position relative to minute E, difference."""
    closes = list(map(float, closes))
    s = len(closes)
    e = s + end_x - 1
    sym_rets = [0.0] + per_minute_returns(closes)
    uni_rets = list(map(float, universe_mean_returns))
    out = np.empty(e + 1, dtype=np.float64)
    for k in range(e + 1):
        sym_cum = compound(sym_rets, k, e)
        uni_cum = compound(uni_rets, k, e)
        out[k] = (-sym_cum) - (-uni_cum)
    return out


def relative_forward_oracle(closes, universe_mean_returns, end_x: int) -> float:
    """Forward cumulative return from the close of the decision minute (E+1)
    to the session close, minus the universe's."""
    closes = list(map(float, closes))
    s = len(closes)
    e = s + end_x - 1
    sym_rets = [0.0] + per_minute_returns(closes)
    uni_rets = list(map(float, universe_mean_returns))
    return compound(sym_rets, e + 1, s - 1) - compound(uni_rets, e + 1, s - 1)


def label_oracle(closes, universe_mean_returns, end_x: int, bps_threshold: float,
                 direction: str) -> int:
    rel = relative_forward_oracle(closes, universe_mean_returns, end_x)
    t = bps_threshold * 1e-4
    if direction == "up":
        return int(rel > t)
    if direction == "down":
        return int(rel < -t)
    raise ValueError(direction)


def central_difference_gradient(loss_fn, arrays: list[np.ndarray],
                                h: float = 1e-5) -> list[np.ndarray]:
    """Per-coordinate central differences of loss_fn(arrays)."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn()
            flat[i] = orig - h
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def mean_return_vector_oracle(closes_matrix) -> np.ndarray:
    """Arithmetic mean of per-minute simple returns across symbols, entry 0 = 0."""
    arr = np.asarray(closes_matrix, dtype=np.float64)
    n, s = arr.shape
    out = np.zeros(s, dtype=np.float64)
    for m in range(1, s):
        out[m] = float(np.mean([arr[i, m] / arr[i, m - 1] - 1.0 for i in range(n)]))
    return out

"""Daily tradable universe: top-N symbols by trailing dollar volume.

Ranking for a date uses bars strictly before that date, over a trailing
calendar window (default twelve months). Ties break lexicographically so the
selection is data-independent. The window either rolls daily (default) or is
pinned to an anchor date per training period ("fixed" mode).
"""

from __future__ import annotations

import csv
import logging
from bisect import bisect_left
from dataclasses import dataclass
from datetime import date

import numpy as np

from .tradingcal import Month

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UniverseDay:
    date: date
    symbols: tuple[str, ...]
    dollar_volumes: tuple[float, ...]


def window_start(d: date, window_months: int = 12) -> date:
    """Start of the trailing window [same date `window_months` back, d)."""
    m = Month.of(d).add(-window_months)
    day = min(d.day, m.last_day().day)
    return date(m.year, m.month, day)


def trailing_dollar_volume(store, symbol: str, d: date, window_months: int = 12) -> float:
    """Sum of close*volume over every bar of `symbol` in [d - window, d)."""
    start = window_start(d, window_months)
    total = 0.0
    for day in store.dates():
        if start <= day < d:
            total += store.daily_dollar_volume(day).get(symbol, 0.0)
    return total


class UniverseSelector:
    """Caching selector over a bar store.

    mode="rolling": each date ranks on its own trailing window.
    mode="fixed": rank on the window anchored at `anchor` (e.g. the first day
    of a training period), reused for every date queried with that anchor.
    """

    def __init__(self, store, size: int, window_months: int = 12, mode: str = "rolling"):
        if mode not in ("rolling", "fixed"):
            raise ValueError(f"unknown universe mode {mode!r}")
        self.store = store
        self.size = size
        self.window_months = window_months
        self.mode = mode
        self._cache: dict[date, UniverseDay] = {}
        self._dates: list[date] | None = None
        self._symbols: list[str] | None = None
        self._cum: np.ndarray | None = None  # (n_dates + 1, n_symbols) prefix sums

    def _build_matrix(self) -> None:
        dates = self.store.dates()
        symset: set[str] = set()
        rows = []
        for d in dates:
            dv = self.store.daily_dollar_volume(d)
            symset.update(dv)
            rows.append(dv)
        symbols = sorted(symset)
        index = {s: i for i, s in enumerate(symbols)}
        mat = np.zeros((len(dates), len(symbols)), dtype=np.float64)
        for i, dv in enumerate(rows):
            for s, v in dv.items():
                mat[i, index[s]] = v
        cum = np.zeros((len(dates) + 1, len(symbols)), dtype=np.float64)
        np.cumsum(mat, axis=0, out=cum[1:])
        self._dates, self._symbols, self._cum = dates, symbols, cum

    def _window_sums(self, start: date, end: date) -> tuple[list[str], np.ndarray]:
        """Per-symbol dollar volume summed over store dates in [start, end)."""
        if self._cum is None:
            self._build_matrix()
        i = bisect_left(self._dates, start)
        j = bisect_left(self._dates, end)
        return self._symbols, self._cum[j] - self._cum[i]

    def universe(self, d: date, anchor: date | None = None) -> UniverseDay:
        rank_date = d if self.mode == "rolling" else (anchor or d)
        cache_key = d if self.mode == "rolling" else rank_date
        hit = self._cache.get(cache_key)
        if hit is not None:
            return UniverseDay(d, hit.symbols, hit.dollar_volumes)
        start = window_start(rank_date, self.window_months)
        symbols, sums = self._window_sums(start, rank_date)
        # candidates traded at least once inside the window
        if self._cum is None:
            self._build_matrix()
        i = bisect_left(self._dates, start)
        j = bisect_left(self._dates, rank_date)
        candidates = [(symbols[k], sums[k]) for k in range(len(symbols))
                      if self._traded_in(k, i, j)]
        candidates.sort(key=lambda t: (-t[1], t[0]))
        if len(candidates) < self.size:
            logger.warning("universe shortfall on %s: %d candidates for size %d",
                           rank_date, len(candidates), self.size)
        top = candidates[:self.size]
        uni = UniverseDay(d, tuple(s for s, _ in top), tuple(v for _, v in top))
        self._cache[cache_key] = uni
        return uni

    def _traded_in(self, sym_idx: int, i: int, j: int) -> bool:
        return self._cum[j, sym_idx] > self._cum[i, sym_idx] or self._appears(sym_idx, i, j)

    def _appears(self, sym_idx: int, i: int, j: int) -> bool:
        # zero-volume symbols still count as candidates if they have bars
        if i >= j:
            return False
        sym = self._symbols[sym_idx]
        for d in self._dates[i:j]:
            if sym in self.store.daily_dollar_volume(d):
                return True
        return False


def write_universe_cache(path, universes: list[UniverseDay]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "rank", "symbol", "dollar_volume"])
        for u in universes:
            for rank, (sym, dv) in enumerate(zip(u.symbols, u.dollar_volumes), start=1):
                w.writerow([u.date.isoformat(), rank, sym, repr(dv)])

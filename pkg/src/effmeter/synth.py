"""Synthetic multi-symbol minute-bar markets with a controllable inefficiency.

Closes follow a geometric random walk: per-minute log returns are the sum of
a common market factor and an idiosyncratic term, so the universe-relative
transform has real work to do. A regime plants cross-sectional intraday
momentum: symbols whose universe-relative log return over the first
``signal_window`` minutes exceeds a trigger ("marked" symbols) keep drifting
the same way, receiving an extra conditional log drift spread over the last
minutes of the session (after every grid decision minute, so any cell can
capture it and no observation can see it).

With zero signal strength the market is a universe-relative martingale: no
rule keyed to history has positive expected relative return.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import date
from statistics import NormalDist

import numpy as np

from .bars import PRICE_SCALE
from .tradingcal import Month, trading_days_in_months

logger = logging.getLogger(__name__)

MINUTES = 390


@dataclass(frozen=True)
class Regime:
    """Date range with planted momentum. strength_bps = 0 means efficient."""

    start: date
    end: date
    strength_bps: float
    signal_window: int = 30
    marked_fraction: float = 0.10
    drift_start: int = 386

    def __post_init__(self) -> None:
        if not 0 < self.signal_window < MINUTES:
            raise ValueError("signal_window must fit inside the session")
        if not 0 < self.drift_start < MINUTES:
            raise ValueError("drift_start must fit inside the session")
        if self.drift_start <= self.signal_window:
            raise ValueError("drift must start after the marking window")
        if not 0.0 < self.marked_fraction < 1.0:
            raise ValueError("marked_fraction must be in (0, 1)")

    def contains(self, d: date) -> bool:
        return self.start <= d <= self.end


@dataclass(frozen=True)
class SynthConfig:
    n_symbols: int
    start_month: Month
    n_months: int
    seed: int
    idio_vol_bps: float = 8.0
    market_vol_bps: float = 10.0
    base_price_range: tuple[float, float] = (20.0, 180.0)
    base_volume_range: tuple[float, float] = (200.0, 2000.0)
    volume_sigma: float = 0.6
    regimes: tuple[Regime, ...] = ()

    def __post_init__(self) -> None:
        if self.idio_vol_bps <= 0 or self.market_vol_bps < 0:
            raise ValueError("volatility must be positive")
        if self.n_symbols < 1 or self.n_months < 1:
            raise ValueError("need at least one symbol and one month")

    def symbols(self) -> list[str]:
        width = max(3, len(str(self.n_symbols - 1)))
        return [f"SYM{i:0{width}d}" for i in range(self.n_symbols)]

    def dates(self) -> list[date]:
        months = [self.start_month.add(i) for i in range(self.n_months)]
        return trading_days_in_months(months)

    def regime_for(self, d: date) -> Regime | None:
        for r in self.regimes:
            if r.contains(d) and r.strength_bps != 0.0:
                return r
        return None


def marking_trigger(config: SynthConfig, regime: Regime) -> float:
    """Log-return trigger putting ~marked_fraction of symbol-days in the tails.

    The windowed universe-relative log return is approximately normal with
    variance W * sigma_idio^2 * (1 - 1/n); the trigger is its two-sided
    (1 - fraction) quantile.
    """
    sigma = config.idio_vol_bps * 1e-4
    n = config.n_symbols
    std = sigma * math.sqrt(regime.signal_window * (1.0 - 1.0 / n))
    return NormalDist().inv_cdf(1.0 - regime.marked_fraction / 2.0) * std


def _mark(idio: np.ndarray, regime: Regime, trigger: float) -> np.ndarray:
    """Signed mark per symbol: +1/-1 when the windowed relative move clears
    the trigger, else 0. Column m of `idio` is the minute-m log return."""
    rel = idio - idio.mean(axis=0, keepdims=True)
    s = rel[:, 1:regime.signal_window + 1].sum(axis=1)
    marks = np.sign(s)
    marks[np.abs(s) <= trigger] = 0.0
    return marks


def gen_market(config: SynthConfig, store) -> dict:
    """Generate bars for every symbol and trading day into `store`.

    Deterministic per seed; each symbol's idiosyncratic and volume streams use
    sub-seeds derived from (seed, symbol index) so per-symbol work could run
    anywhere without changing the output.
    """
    symbols = config.symbols()
    n = config.n_symbols
    dates = config.dates()
    base_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    lo, hi = config.base_price_range
    base_prices = np.exp(base_rng.uniform(np.log(lo), np.log(hi), size=n))
    vlo, vhi = config.base_volume_range
    base_volumes = np.exp(base_rng.uniform(np.log(vlo), np.log(vhi), size=n))
    market_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    idio_rngs = [np.random.default_rng(np.random.SeedSequence([config.seed, 2, i]))
                 for i in range(n)]
    vol_rngs = [np.random.default_rng(np.random.SeedSequence([config.seed, 3, i]))
                for i in range(n)]
    sigma_i = config.idio_vol_bps * 1e-4
    sigma_m = config.market_vol_bps * 1e-4

    log_level = np.log(base_prices)
    prev_close_q = np.round(np.exp(log_level) * PRICE_SCALE) / PRICE_SCALE
    marked_days = 0
    symbol_days = 0
    for d in dates:
        idio = np.empty((n, MINUTES))
        vol_z = np.empty((n, MINUTES))
        for i in range(n):
            idio[i] = idio_rngs[i].standard_normal(MINUTES)
            vol_z[i] = vol_rngs[i].standard_normal(MINUTES)
        idio *= sigma_i
        factor = market_rng.standard_normal(MINUTES) * sigma_m
        log_rets = idio + factor[None, :]

        regime = config.regime_for(d)
        if regime is not None:
            trigger = marking_trigger(config, regime)
            marks = _mark(idio, regime, trigger)
            n_tail = MINUTES - regime.drift_start
            drift = math.log1p(regime.strength_bps * 1e-4) / n_tail
            log_rets[:, regime.drift_start:] += (marks * drift)[:, None]
            marked_days += int(np.count_nonzero(marks))
        symbol_days += n

        log_paths = log_level[:, None] + np.cumsum(log_rets, axis=1)
        closes = np.round(np.exp(log_paths) * PRICE_SCALE) / PRICE_SCALE
        opens = np.column_stack([prev_close_q, closes[:, :-1]])
        highs = np.maximum(opens, closes)
        lows = np.minimum(opens, closes)
        volumes = np.maximum(
            np.rint(base_volumes[:, None] * np.exp(vol_z * config.volume_sigma)), 1.0)
        day = {}
        for i, sym in enumerate(symbols):
            day[sym] = np.column_stack([opens[i], highs[i], lows[i], closes[i], volumes[i]])
        store.write_day(d, day, MINUTES)
        log_level = log_paths[:, -1]
        prev_close_q = closes[:, -1]
    return {"symbols": symbols, "n_dates": len(dates),
            "first_date": dates[0].isoformat(), "last_date": dates[-1].isoformat(),
            "marked_symbol_days": marked_days, "symbol_days": symbol_days}


def write_trade_csv(store, path, dates: list[date] | None = None,
                    tz: str = "America/New_York", exchange: str = "SYN") -> int:
    """Emit stored bars as a trade CSV round-trippable through ingestion.

    Each minute becomes two prints: one at the bar's open on the minute and
    one at its close thirty seconds in, splitting the bar volume (single
    print at the close when volume is 1). Re-ingesting reproduces the bar
    blocks exactly wherever volume >= 2. Returns the number of rows written.
    """
    import csv
    from datetime import datetime, time, timedelta
    from zoneinfo import ZoneInfo

    zone = ZoneInfo(tz)
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "symbol", "price", "size", "exchange"])
        for d in dates if dates is not None else store.dates():
            open_dt = datetime.combine(d, time(9, 30), tzinfo=zone)
            for sym in store.symbols(d):
                block = store.load_ohlcv(d, sym)
                for m in range(block.shape[0]):
                    o, _h, _l, c, v = block[m]
                    v = int(v)
                    t0 = open_dt + timedelta(minutes=m)
                    if v >= 2:
                        w.writerow([t0.isoformat(), sym, repr(float(o)),
                                    v // 2, exchange])
                        w.writerow([(t0 + timedelta(seconds=30)).isoformat(),
                                    sym, repr(float(c)), v - v // 2, exchange])
                        rows += 2
                    elif v == 1:
                        w.writerow([(t0 + timedelta(seconds=30)).isoformat(),
                                    sym, repr(float(c)), 1, exchange])
                        rows += 1
    return rows


@dataclass
class MarketReport:
    symbol_days: int
    marked_symbol_days: int
    marked_fraction: float | None
    expected_marked_fraction: float | None
    realized_conditional_drift_bps: float | None
    per_minute_log_mean: float
    per_minute_log_var: float
    planted: bool
    notes: list[str] = field(default_factory=list)


def describe_market(store, config: SynthConfig) -> MarketReport:
    """Recompute ground truth from stored prices: marking statistics, realized
    conditional drift (in the mark's direction, measured over the drift
    window), and per-minute log return moments.

    Marking is recomputed from the quantized store prices with the same
    trigger the generator used, so the report is an independent read of what
    actually landed in the store.
    """
    dates = config.dates()
    symbols = config.symbols()
    total_sum = 0.0
    total_sq = 0.0
    total_n = 0
    marked = 0
    symbol_days = 0
    drift_sum = 0.0
    drift_n = 0
    expected_fraction = None
    planted = False
    for d in dates:
        got, closes = store.load_closes(d, symbols)
        if not got:
            continue
        log_rets = np.log(closes[:, 1:] / closes[:, :-1])
        total_sum += float(log_rets.sum())
        total_sq += float((log_rets ** 2).sum())
        total_n += log_rets.size
        # measure marking statistics for any covering regime, including
        # zero-strength ones (their realized conditional drift should be ~0)
        regime = next((r for r in config.regimes if r.contains(d)), None)
        if regime is None:
            continue
        planted = planted or regime.strength_bps != 0.0
        symbol_days += len(got)
        trigger = marking_trigger(config, regime)
        rel = log_rets - log_rets.mean(axis=0, keepdims=True)
        s = rel[:, :regime.signal_window].sum(axis=1)
        marks = np.sign(s)
        marks[np.abs(s) <= trigger] = 0.0
        is_marked = marks != 0.0
        marked += int(is_marked.sum())
        sigma = config.idio_vol_bps * 1e-4
        std = sigma * math.sqrt(regime.signal_window * (1.0 - 1.0 / len(got)))
        expected_fraction = 2.0 * NormalDist().cdf(-trigger / std)
        fwd = np.log(closes[:, -1] / closes[:, regime.drift_start - 1])
        rel_fwd = fwd - fwd.mean()
        if is_marked.any():
            drift_sum += float((marks[is_marked] * rel_fwd[is_marked]).sum())
            drift_n += int(is_marked.sum())
    mean = total_sum / total_n if total_n else 0.0
    var = total_sq / total_n - mean ** 2 if total_n else 0.0
    report = MarketReport(
        symbol_days=symbol_days,
        marked_symbol_days=marked,
        marked_fraction=(marked / symbol_days) if symbol_days else None,
        expected_marked_fraction=expected_fraction,
        realized_conditional_drift_bps=(drift_sum / drift_n * 1e4) if drift_n else None,
        per_minute_log_mean=mean,
        per_minute_log_var=var,
        planted=planted,
    )
    if not planted:
        report.notes.append("no planted signal")
    return report

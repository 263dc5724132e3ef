from __future__ import annotations

import math
from datetime import date

import numpy as np
import pytest

from effmeter.store import MemoryBarStore
from effmeter.synth import (MINUTES, Regime, SynthConfig, describe_market,
                            gen_market, marking_trigger)
from effmeter.tradingcal import Month


def _gen(config: SynthConfig) -> MemoryBarStore:
    store = MemoryBarStore()
    gen_market(config, store)
    return store


def _null_config(seed=5, n_symbols=12, n_months=2) -> SynthConfig:
    return SynthConfig(n_symbols=n_symbols, start_month=Month(2003, 1),
                       n_months=n_months, seed=seed)


def _signal_config(seed=5, strength=20.0, n_symbols=30, n_months=3,
                   fraction=0.10) -> SynthConfig:
    start = Month(2003, 1)
    regime = Regime(start.first_day(), start.add(n_months).first_day(),
                    strength_bps=strength, signal_window=30,
                    marked_fraction=fraction)
    return SynthConfig(n_symbols=n_symbols, start_month=start, n_months=n_months,
                       seed=seed, regimes=(regime,))


def test_determinism_same_seed_identical_store():
    a = _gen(_null_config(seed=9))
    b = _gen(_null_config(seed=9))
    assert a.checksum() == b.checksum()
    c = _gen(_null_config(seed=10))
    assert c.checksum() != a.checksum()


def test_bar_validity_and_positive_volumes():
    store = _gen(_null_config())
    d = store.dates()[0]
    for sym in store.symbols(d)[:4]:
        arr = store.load_ohlcv(d, sym)
        o, h, l, c, v = arr.T
        assert (l <= np.minimum(o, c)).all()
        assert (h >= np.maximum(o, c)).all()
        assert (v >= 1).all()
        assert (c > 0).all()


def test_null_market_moments_within_sampling_bounds():
    config = _null_config(seed=31, n_symbols=10, n_months=3)
    store = _gen(config)
    sigma2 = (config.idio_vol_bps * 1e-4) ** 2 + (config.market_vol_bps * 1e-4) ** 2
    symbols = config.symbols()
    dates = config.dates()
    n_obs = len(dates) * (MINUTES - 1)
    for sym in symbols:
        rets = []
        prev_close = None
        for d in dates:
            closes = store.load_ohlcv(d, sym)[:, 3]
            rets.append(np.log(closes[1:] / closes[:-1]))
            prev_close = closes[-1]
        r = np.concatenate(rets)
        se_mean = math.sqrt(sigma2 / n_obs)
        assert abs(r.mean()) <= 4.0 * se_mean
        se_var = sigma2 * math.sqrt(2.0 / (n_obs - 1))
        assert abs(r.var() - sigma2) <= 4.0 * se_var


def test_marked_fraction_matches_normal_tail():
    config = _signal_config(seed=8)
    store = _gen(config)
    report = describe_market(store, config)
    assert report.planted
    n = report.symbol_days
    p = report.expected_marked_fraction
    assert p == pytest.approx(0.10, abs=0.001)
    se = math.sqrt(p * (1 - p) / n)
    assert abs(report.marked_fraction - p) <= 4.0 * se


def test_conditional_drift_near_configured_strength():
    config = _signal_config(seed=8)
    store = _gen(config)
    report = describe_market(store, config)
    regime = config.regimes[0]
    n_tail = MINUTES - regime.drift_start
    # per-observation noise: idiosyncratic vol over the drift window, double
    # counting the cross-sectional mean subtraction is second order
    sigma_obs = config.idio_vol_bps * math.sqrt(n_tail)
    se = 4.0 * sigma_obs / math.sqrt(report.marked_symbol_days)
    assert report.realized_conditional_drift_bps == pytest.approx(20.0, abs=se)


def test_signal_monotonic_in_strength():
    weak = _signal_config(seed=4, strength=10.0)
    strong = _signal_config(seed=4, strength=20.0)
    d_weak = describe_market(_gen(weak), weak).realized_conditional_drift_bps
    d_strong = describe_market(_gen(strong), strong).realized_conditional_drift_bps
    assert d_strong >= d_weak


def test_no_signal_report():
    config = _null_config()
    report = describe_market(_gen(config), config)
    assert not report.planted
    assert "no planted signal" in report.notes
    assert report.marked_fraction is None
    assert report.realized_conditional_drift_bps is None


def test_zero_strength_regime_has_no_conditional_drift():
    """The marking rule applied to an efficient market selects symbols whose
    subsequent relative drift is zero up to sampling noise."""
    config = _signal_config(seed=19, strength=0.0, n_symbols=30, n_months=3)
    report = describe_market(_gen(config), config)
    assert not report.planted  # nothing was actually planted
    regime = config.regimes[0]
    n_tail = MINUTES - regime.drift_start
    sigma_obs = config.idio_vol_bps * math.sqrt(n_tail)
    se = 4.0 * sigma_obs / math.sqrt(report.marked_symbol_days)
    assert abs(report.realized_conditional_drift_bps) <= se
    p = report.expected_marked_fraction
    frac_se = math.sqrt(p * (1 - p) / report.symbol_days)
    assert abs(report.marked_fraction - p) <= 4.0 * frac_se


def test_efficient_outside_regime_dates():
    start = Month(2003, 1)
    regime = Regime(start.first_day(), start.last_day(), strength_bps=20.0)
    config = SynthConfig(n_symbols=8, start_month=start, n_months=2, seed=3,
                         regimes=(regime,))
    assert config.regime_for(date(2003, 1, 15)) is regime
    assert config.regime_for(date(2003, 2, 15)) is None


def test_trigger_scales_with_window_and_vol():
    config = _signal_config()
    regime = config.regimes[0]
    t1 = marking_trigger(config, regime)
    wider = Regime(regime.start, regime.end, regime.strength_bps,
                   signal_window=120, marked_fraction=regime.marked_fraction)
    assert marking_trigger(config, wider) > t1


def test_config_validation():
    with pytest.raises(ValueError):
        Regime(date(2003, 1, 1), date(2003, 2, 1), 20.0, signal_window=0)
    with pytest.raises(ValueError):
        Regime(date(2003, 1, 1), date(2003, 2, 1), 20.0, signal_window=30,
               drift_start=20)
    with pytest.raises(ValueError):
        SynthConfig(n_symbols=0, start_month=Month(2003, 1), n_months=1, seed=1)
    with pytest.raises(ValueError):
        SynthConfig(n_symbols=5, start_month=Month(2003, 1), n_months=1, seed=1,
                    idio_vol_bps=0.0)

"""Synthetic market -> trade CSV -> ingestion -> bars must close the loop."""

from __future__ import annotations

import numpy as np

from effmeter.cli import main
from effmeter.store import BarStore, MemoryBarStore
from effmeter.synth import SynthConfig, gen_market, write_trade_csv
from effmeter.tradingcal import Month


def test_trade_csv_round_trip_through_ingestion(tmp_path):
    cfg = SynthConfig(n_symbols=3, start_month=Month(2003, 2), n_months=1,
                      seed=6, base_volume_range=(50.0, 200.0))
    source = MemoryBarStore()
    gen_market(cfg, source)
    dates = source.dates()[:3]

    csv_path = tmp_path / "trades.csv"
    rows = write_trade_csv(source, csv_path, dates)
    assert rows > 0

    store_dir = tmp_path / "store"
    rc = main(["ingest", str(csv_path), "--store", str(store_dir)])
    assert rc == 0
    rebuilt = BarStore(store_dir)
    assert rebuilt.dates() == dates
    for d in dates:
        assert rebuilt.symbols(d) == source.symbols(d)
        for sym in source.symbols(d):
            want = source.load_ohlcv(d, sym)
            got = rebuilt.load_ohlcv(d, sym)
            if (want[:, 4] >= 2).all():
                np.testing.assert_array_equal(got, want)
            else:
                np.testing.assert_array_equal(got[:, 3], want[:, 3])
                np.testing.assert_array_equal(got[:, 4], want[:, 4])

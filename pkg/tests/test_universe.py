from __future__ import annotations

from datetime import date

import numpy as np
import pytest

from effmeter.store import MemoryBarStore
from effmeter.universe import (UniverseSelector, trailing_dollar_volume,
                               window_start, write_universe_cache)

MINUTES = 390


def _flat_block(price: float, volume: float, minutes: int = MINUTES) -> np.ndarray:
    p = np.full(minutes, price)
    v = np.full(minutes, volume)
    return np.column_stack([p, p, p, p, v])


def _store_with(days: dict[date, dict[str, tuple[float, float]]]) -> MemoryBarStore:
    store = MemoryBarStore()
    for d, syms in days.items():
        store.write_day(d, {s: _flat_block(p, v) for s, (p, v) in syms.items()})
    return store


def test_trailing_dollar_volume_arithmetic():
    d0 = date(2002, 6, 3)
    store = _store_with({d0: {"A": (10.0, 100.0)}})
    # one 390-minute day at price 10, 100 shares/minute
    got = trailing_dollar_volume(store, "A", date(2002, 7, 1))
    assert got == 390 * 10.0 * 100.0

    assert trailing_dollar_volume(store, "GHOST", date(2002, 7, 1)) == 0.0


def test_trailing_dollar_volume_zero_volume_symbol():
    d0 = date(2002, 6, 3)
    store = _store_with({d0: {"A": (10.0, 0.0)}})
    assert trailing_dollar_volume(store, "A", date(2002, 7, 1)) == 0.0


def test_dollar_volume_linearity_in_volume():
    d0 = date(2002, 6, 3)
    store = _store_with({d0: {"A": (10.0, 100.0), "B": (10.0, 200.0)}})
    end = date(2002, 7, 1)
    assert trailing_dollar_volume(store, "B", end) == \
        2.0 * trailing_dollar_volume(store, "A", end)


def test_window_uses_only_strictly_prior_dates():
    d = date(2002, 6, 10)
    store = _store_with({
        date(2002, 6, 9): {"A": (10.0, 100.0)},
        d: {"A": (10.0, 9999.0)},               # same-day bars must not count
        date(2002, 6, 11): {"A": (10.0, 9999.0)},
    })
    assert trailing_dollar_volume(store, "A", d) == 390 * 10.0 * 100.0


def test_window_start_is_calendar_year_back():
    assert window_start(date(2003, 2, 15)) == date(2002, 2, 15)
    assert window_start(date(2004, 2, 29)) == date(2003, 2, 28)
    assert window_start(date(2003, 6, 1), window_months=3) == date(2003, 3, 1)


def test_select_top_n_and_tie_break():
    d = date(2002, 6, 2)
    store = _store_with({date(2002, 5, 1): {
        "A": (10.0, 100.0), "B": (10.0, 50.0), "C": (10.0, 10.0)}})
    sel = UniverseSelector(store, size=2)
    assert sel.universe(d).symbols == ("A", "B")

    tie = _store_with({date(2002, 5, 1): {"B": (10.0, 100.0), "A": (10.0, 100.0)}})
    sel = UniverseSelector(tie, size=1)
    assert sel.universe(d).symbols == ("A",)  # lexicographic tie-break


def test_shortfall_returns_all_with_warning(caplog):
    d = date(2002, 6, 2)
    store = _store_with({date(2002, 5, 1): {"A": (10.0, 1.0), "B": (10.0, 2.0)}})
    sel = UniverseSelector(store, size=500)
    with caplog.at_level("WARNING"):
        uni = sel.universe(d)
    assert len(uni.symbols) == 2
    assert any("shortfall" in r.message for r in caplog.records)


def test_determinism_and_caching():
    days = {date(2002, 3, 3 + i): {"A": (10.0, 100.0 + i), "B": (9.0, 120.0)}
            for i in range(0, 20, 3)}
    store = _store_with(days)
    sel1 = UniverseSelector(store, size=2)
    sel2 = UniverseSelector(store, size=2)
    d = date(2002, 6, 2)
    assert sel1.universe(d) == sel2.universe(d)
    assert sel1.universe(d) is not None
    assert sel1.universe(d).symbols == sel1.universe(d).symbols


def test_no_lookahead_perturbation():
    base_days = {date(2002, 3, 4): {"A": (10.0, 100.0), "B": (10.0, 90.0)},
                 date(2002, 6, 3): {"A": (10.0, 100.0), "B": (10.0, 90.0)}}
    d = date(2002, 5, 1)
    store = _store_with(base_days)
    uni = UniverseSelector(store, size=2).universe(d)

    perturbed = dict(base_days)
    perturbed[date(2002, 6, 3)] = {"A": (10.0, 1.0), "B": (10.0, 999999.0)}
    perturbed[d] = {"A": (10.0, 1.0), "B": (10.0, 999999.0)}  # same-day too
    store2 = _store_with(perturbed)
    uni2 = UniverseSelector(store2, size=2).universe(d)
    assert uni.symbols == uni2.symbols
    assert uni.dollar_volumes == uni2.dollar_volumes


def test_rank_monotonic_in_volume():
    d = date(2002, 6, 2)
    inside = date(2002, 5, 6)
    store = _store_with({inside: {"A": (10.0, 100.0), "B": (10.0, 150.0),
                                  "C": (10.0, 200.0)}})
    rank_before = UniverseSelector(store, 3).universe(d).symbols.index("A")
    boosted = _store_with({inside: {"A": (10.0, 400.0), "B": (10.0, 150.0),
                                    "C": (10.0, 200.0)}})
    rank_after = UniverseSelector(boosted, 3).universe(d).symbols.index("A")
    assert rank_after <= rank_before


def test_fixed_mode_pins_ranking_to_anchor():
    early = date(2002, 1, 7)
    late = date(2002, 7, 1)
    store = _store_with({
        early: {"A": (10.0, 100.0), "B": (10.0, 50.0)},
        late: {"A": (10.0, 1.0), "B": (10.0, 500.0)},
    })
    anchor = date(2002, 6, 28)
    sel = UniverseSelector(store, size=1, mode="fixed")
    # both queries rank on the anchor's window, which sees only the early day
    assert sel.universe(date(2002, 7, 10), anchor=anchor).symbols == ("A",)
    rolling = UniverseSelector(store, size=1, mode="rolling")
    assert rolling.universe(date(2002, 7, 10)).symbols == ("B",)

    with pytest.raises(ValueError):
        UniverseSelector(store, 1, mode="bogus")


def test_universe_cache_csv(tmp_path):
    d = date(2002, 6, 2)
    store = _store_with({date(2002, 5, 1): {"A": (10.0, 100.0), "B": (10.0, 50.0)}})
    uni = UniverseSelector(store, size=2).universe(d)
    path = tmp_path / "universe.csv"
    write_universe_cache(path, [uni])
    lines = path.read_text().splitlines()
    assert lines[0] == "date,rank,symbol,dollar_volume"
    assert lines[1].startswith("2002-06-02,1,A,")
    assert len(lines) == 3

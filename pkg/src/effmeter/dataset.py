"""Universe-relative observations and directional labels.

For a session of S one-minute closes and a negative offset ``end_x``, the
last observed minute is E = S + end_x - 1. Observation entry k holds the
symbol's position at minute k relative to the final observed minute, net of
the universe:

    obs[k] = U[E]/U[k] - C[E]/C[k]

where C is the symbol close series and U the compounded universe mean-return
path. The entry at k = E is exactly zero. Labels look strictly forward: the
universe-relative return from the close of minute E+1 (the decision minute)
to the session close, thresholded strictly at +/- the bps threshold. Norming
both anchors to zero keeps any post-E information out of the observations.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from datetime import date
from enum import Enum

import numpy as np

GRID_END_X = (-5, -10, -30)
GRID_BPS = (2, 5, 10, 25)


class Direction(Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class Hyperparams:
    """One grid cell: observation cutoff and label threshold."""

    end_x: int
    bps_threshold: int

    def __post_init__(self) -> None:
        if self.end_x >= -1:
            raise ValueError(f"end_x must be < -1, got {self.end_x}")
        if self.bps_threshold <= 0:
            raise ValueError(f"bps_threshold must be > 0, got {self.bps_threshold}")


GRID = tuple(Hyperparams(e, b) for e in GRID_END_X for b in GRID_BPS)


def last_observed_minute(session_minutes: int, end_x: int) -> int:
    e = session_minutes + end_x - 1
    if e < 0:
        raise ValueError(f"end_x {end_x} leaves no observed minutes in a "
                         f"{session_minutes}-minute session")
    return e


def universe_mean_returns(closes: np.ndarray) -> np.ndarray:
    """Mean one-minute simple return across symbols; entry 0 is 0."""
    closes = np.asarray(closes, dtype=np.float64)
    if closes.ndim != 2 or closes.shape[0] == 0:
        raise ValueError("need a nonempty (symbols, minutes) close matrix")
    if (closes <= 0).any():
        raise ValueError("nonpositive close in universe matrix")
    rets = closes[:, 1:] / closes[:, :-1] - 1.0
    out = np.zeros(closes.shape[1], dtype=np.float64)
    out[1:] = rets.mean(axis=0)
    return out


def compound_path(mean_returns: np.ndarray) -> np.ndarray:
    """Index path U with U[0] = 1 and U[m] = U[m-1] * (1 + r[m])."""
    return np.cumprod(1.0 + np.asarray(mean_returns, dtype=np.float64))


def day_observations(closes: np.ndarray, mean_returns: np.ndarray, end_x: int) -> np.ndarray:
    """Observation matrix for every row of a day's close matrix.

    Output shape is (n_symbols, E + 1); the final column is exactly zero.
    """
    closes = np.asarray(closes, dtype=np.float64)
    e = last_observed_minute(closes.shape[1], end_x)
    if (closes <= 0).any():
        raise ValueError("nonpositive close")
    u = compound_path(mean_returns)
    obs = u[e] / u[None, :e + 1] - closes[:, [e]] / closes[:, :e + 1]
    bad = np.abs(obs[:, -1])
    if bad.max(initial=0.0) != 0.0:
        raise AssertionError("observation anchor not exactly zero")
    return obs


def make_observation(closes_row: np.ndarray, mean_returns: np.ndarray, end_x: int) -> np.ndarray:
    return day_observations(np.asarray(closes_row, dtype=np.float64)[None, :],
                            mean_returns, end_x)[0]


def day_relative_forward(closes: np.ndarray, mean_returns: np.ndarray, end_x: int) -> np.ndarray:
    """Universe-relative forward return, close of minute E+1 to session close."""
    closes = np.asarray(closes, dtype=np.float64)
    s = closes.shape[1]
    e = last_observed_minute(s, end_x)
    entry = e + 1
    if entry > s - 1:
        raise ValueError(f"end_x {end_x} leaves no decision minute")
    u = compound_path(mean_returns)
    return closes[:, s - 1] / closes[:, entry] - u[s - 1] / u[entry]


def labels_from_relative(rel_forward: np.ndarray, bps_threshold: float,
                         direction: Direction) -> np.ndarray:
    """Strict threshold in either direction; int8 vector, 1 = positive class."""
    t = bps_threshold * 1e-4
    if direction is Direction.UP:
        return (rel_forward > t).astype(np.int8)
    return (rel_forward < -t).astype(np.int8)


def make_label(closes_row: np.ndarray, mean_returns: np.ndarray, end_x: int,
               bps_threshold: float, direction: Direction) -> int:
    rel = day_relative_forward(np.asarray(closes_row, dtype=np.float64)[None, :],
                               mean_returns, end_x)
    return int(labels_from_relative(rel, bps_threshold, direction)[0])


@dataclass
class Dataset:
    """Stacked examples for one (period, hyperparams, direction)."""

    observations: np.ndarray   # (rows, E + 1) float64
    labels: np.ndarray         # (rows,) int8
    keys: list[tuple[date, str]]
    hyperparams: Hyperparams
    direction: Direction
    excluded: int = 0          # symbol-days dropped for nonpositive closes


def iter_day_examples(dates: list[date], store, universes):
    """Yield (date, symbols, closes, mean_returns, n_excluded) per date.

    `universes` maps date -> UniverseDay (or is a UniverseSelector). Symbols
    keep universe rank order; symbol-days with nonpositive closes are dropped
    and counted in n_excluded.
    """
    for d in dates:
        uni = universes.universe(d) if hasattr(universes, "universe") else universes[d]
        symbols, closes = store.load_closes(d, list(uni.symbols))
        if not symbols:
            continue
        good = (closes > 0).all(axis=1)
        n_bad = int((~good).sum())
        if n_bad:
            symbols = [s for s, g in zip(symbols, good) if g]
            closes = closes[good]
        if not symbols:
            yield d, [], closes, None, n_bad
            continue
        mean_returns = universe_mean_returns(closes)
        yield d, symbols, closes, mean_returns, n_bad


def build_dataset(dates: list[date], store, universes, hyperparams: Hyperparams,
                  direction: Direction) -> Dataset:
    """One example per (universe symbol, date), date-major then rank order."""
    if not dates:
        raise ValueError("empty period")
    obs_parts: list[np.ndarray] = []
    label_parts: list[np.ndarray] = []
    keys: list[tuple[date, str]] = []
    excluded = 0
    for d, symbols, closes, mean_returns, n_bad in iter_day_examples(
            dates, store, universes):
        excluded += n_bad
        if not symbols:
            continue
        obs_parts.append(day_observations(closes, mean_returns, hyperparams.end_x))
        rel = day_relative_forward(closes, mean_returns, hyperparams.end_x)
        label_parts.append(labels_from_relative(rel, hyperparams.bps_threshold, direction))
        keys.extend((d, s) for s in symbols)
    if not obs_parts:
        width = 0
        observations = np.empty((0, width), dtype=np.float64)
        labels = np.empty((0,), dtype=np.int8)
    else:
        observations = np.vstack(obs_parts)
        labels = np.concatenate(label_parts)
    return Dataset(observations, labels, keys, hyperparams, direction, excluded)


_DUMP_MAGIC = b"DSET"
_DUMP_HEADER = struct.Struct("<4sBIIhHB")


def dump_dataset(path, ds: Dataset) -> None:
    """Debug dump: header (rows, cols, end_x, threshold, direction), then
    row-major float64 observations and int8 labels."""
    rows, cols = ds.observations.shape
    direction_code = 0 if ds.direction is Direction.UP else 1
    with open(path, "wb") as fh:
        fh.write(_DUMP_HEADER.pack(_DUMP_MAGIC, 1, rows, cols,
                                   ds.hyperparams.end_x, ds.hyperparams.bps_threshold,
                                   direction_code))
        fh.write(np.ascontiguousarray(ds.observations, dtype=np.float64).tobytes())
        fh.write(np.ascontiguousarray(ds.labels, dtype=np.int8).tobytes())


def load_dataset_dump(path) -> Dataset:
    blob = open(path, "rb").read()
    magic, _version, rows, cols, end_x, bps, direction_code = _DUMP_HEADER.unpack_from(blob)
    if magic != _DUMP_MAGIC:
        raise ValueError(f"not a dataset dump: {path}")
    off = _DUMP_HEADER.size
    obs = np.frombuffer(blob, dtype=np.float64, count=rows * cols, offset=off)
    obs = obs.reshape(rows, cols).copy()
    labels = np.frombuffer(blob, dtype=np.int8, count=rows,
                           offset=off + rows * cols * 8).copy()
    return Dataset(obs, labels, [], Hyperparams(end_x, bps),
                   Direction.UP if direction_code == 0 else Direction.DOWN)

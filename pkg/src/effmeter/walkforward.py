"""Monthly roll-forward experiment driver.

For each test month: the preceding month is the validation month, the twelve
months before that are the training period, and twelve more months back feed
universe selection, so the first test month starts 25 months into the
experiment. Per learner and month, every cell of the fixed 3x4 hyperparameter
grid trains an up and a down classifier on the training period; the cell with
the best mean daily trade precision over validation days wins (ties: larger
bps threshold, then smaller |end_x|) and trades the test month. Models are
retrained once per calendar month only, and nothing dated inside the test
month can reach them.
"""

from __future__ import annotations

import logging
import multiprocessing
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from datetime import date

import numpy as np

from . import __version__
from .dataset import (GRID, Direction, Hyperparams, day_observations,
                      day_relative_forward, labels_from_relative,
                      last_observed_minute, universe_mean_returns)
from .errors import DataError, SingleClassError
from .learners import (KIND_LOGISTIC, KIND_NEURAL, KIND_RANDOM, KINDS,
                       NoTradeModel, TrainConfig, logistic_train, nn_train,
                       random_train)
from .strategy import DailyResult, Portfolio, TradeDecision, decide, realize
from .tradingcal import Month
from .universe import UniverseSelector

logger = logging.getLogger(__name__)

HISTORY_MONTHS = 25  # 12 universe lookback + 12 training + 1 validation


@dataclass(frozen=True)
class PeriodLayout:
    test_month: Month
    validation_month: Month
    training_months: tuple[Month, ...]
    universe_months: tuple[Month, ...]


def layout_periods(start_month: Month, test_month: Month) -> PeriodLayout:
    gap = test_month.diff(start_month)
    if gap < HISTORY_MONTHS:
        raise ValueError(
            f"test month {test_month} begins {gap} months after {start_month}; "
            f"{HISTORY_MONTHS} months of history are required")
    return PeriodLayout(
        test_month=test_month,
        validation_month=test_month.add(-1),
        training_months=tuple(test_month.add(k) for k in range(-13, -1)),
        universe_months=tuple(test_month.add(k) for k in range(-25, -13)),
    )


@dataclass
class DayBlock:
    """Everything one trading day contributes: close rows for the day's
    universe, the universe mean-return path, and per-end_x observations and
    relative forward returns."""

    date: date
    symbols: list[str]
    closes: np.ndarray
    obs: dict[int, np.ndarray]
    rel_fwd: dict[int, np.ndarray]
    excluded: int = 0


def build_day_blocks(dates: list[date], store, selector: UniverseSelector,
                     end_xs: tuple[int, ...]) -> list[DayBlock]:
    blocks: list[DayBlock] = []
    for d in dates:
        uni = selector.universe(d)
        symbols, closes = store.load_closes(d, list(uni.symbols))
        if not symbols:
            blocks.append(DayBlock(d, [], closes, {}, {}))
            continue
        good = (closes > 0).all(axis=1)
        excluded = int((~good).sum())
        if excluded:
            symbols = [s for s, g in zip(symbols, good) if g]
            closes = closes[good]
        if not symbols:
            blocks.append(DayBlock(d, [], closes, {}, {}, excluded))
            continue
        mean_returns = universe_mean_returns(closes)
        obs = {e: day_observations(closes, mean_returns, e) for e in end_xs}
        rel = {e: day_relative_forward(closes, mean_returns, e) for e in end_xs}
        blocks.append(DayBlock(d, symbols, closes, obs, rel, excluded))
    return blocks


def stack_blocks(blocks: list[DayBlock], end_xs: tuple[int, ...]):
    """Per end_x: stacked observation matrix and relative-forward vector."""
    out: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for e in end_xs:
        xs = [b.obs[e] for b in blocks if b.symbols]
        rs = [b.rel_fwd[e] for b in blocks if b.symbols]
        if not xs:
            raise DataError("no usable training days in period")
        out[e] = (np.vstack(xs), np.concatenate(rs))
    return out


@dataclass
class GridCell:
    hyperparams: Hyperparams
    up_model: object
    down_model: object
    validation_precision: float = 0.0
    traded_validation_days: int = 0
    up_fallback: bool = False
    down_fallback: bool = False
    up_seed: int = 0
    down_seed: int = 0


def _derive_seed(root_seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([root_seed, *key]).generate_state(1)[0])


def _train_one(kind: str, x, y, xv, yv, seed: int, cfg: TrainConfig):
    """Train one directional classifier; single-class labels fall back to a
    never-positive model (the strategy then simply has no opinion)."""
    try:
        if kind == KIND_NEURAL:
            return nn_train(x, y, xv, yv, seed, cfg), False
        if kind == KIND_LOGISTIC:
            return logistic_train(x, y, seed, cfg), False
        if kind == KIND_RANDOM:
            return random_train(y, seed), False
        raise ValueError(f"unknown learner kind {kind!r}")
    except SingleClassError:
        return NoTradeModel(seed=seed), True


# Shared state for fork-based grid workers; populated in the parent right
# before the pool is created so children inherit it by fork.
_POOL_DATA: dict = {}


def _cell_task(task):
    kind, end_x, bps, dir_value, seed = task
    x, rel = _POOL_DATA["train"][end_x]
    xv, relv = _POOL_DATA["val"][end_x]
    cfg = _POOL_DATA["cfg"]
    direction = Direction(dir_value)
    y = labels_from_relative(rel, bps, direction)
    yv = labels_from_relative(relv, bps, direction)
    model, fallback = _train_one(kind, x, y, xv, yv, seed, cfg)
    return task, model, fallback


def train_grid_models(kind: str, train_stack, val_stack, month_seed_key: tuple[int, ...],
                      root_seed: int, cfg: TrainConfig, workers: int = 1) -> list[GridCell]:
    """Train up/down models for all 12 grid cells, optionally in parallel.

    Results are identical regardless of worker count: every model's seed is a
    pure function of (root seed, month, learner, cell, direction).
    """
    tasks = []
    for cell_idx, hp in enumerate(GRID):
        for dir_idx, direction in enumerate((Direction.UP, Direction.DOWN)):
            seed = _derive_seed(root_seed, *month_seed_key, cell_idx, dir_idx)
            tasks.append((kind, hp.end_x, hp.bps_threshold, direction.value, seed))
    results: dict[tuple, tuple] = {}
    if workers > 1:
        _POOL_DATA.update(train=train_stack, val=val_stack, cfg=cfg)
        try:
            ctx = multiprocessing.get_context("fork")
            with ctx.Pool(processes=workers) as pool:
                for task, model, fallback in pool.imap_unordered(_cell_task, tasks):
                    results[task] = (model, fallback)
        finally:
            _POOL_DATA.clear()
    else:
        _POOL_DATA.update(train=train_stack, val=val_stack, cfg=cfg)
        try:
            for task in tasks:
                t, model, fallback = _cell_task(task)
                results[t] = (model, fallback)
        finally:
            _POOL_DATA.clear()

    cells: list[GridCell] = []
    for cell_idx, hp in enumerate(GRID):
        per_dir = {}
        for dir_idx, direction in enumerate((Direction.UP, Direction.DOWN)):
            seed = _derive_seed(root_seed, *month_seed_key, cell_idx, dir_idx)
            task = (kind, hp.end_x, hp.bps_threshold, direction.value, seed)
            model, fallback = results[task]
            model.direction = direction.value
            model.end_x = hp.end_x
            model.bps_threshold = hp.bps_threshold
            per_dir[direction] = (model, fallback, seed)
        up_model, up_fb, up_seed = per_dir[Direction.UP]
        down_model, down_fb, down_seed = per_dir[Direction.DOWN]
        cells.append(GridCell(hp, up_model, down_model, up_fallback=up_fb,
                              down_fallback=down_fb, up_seed=up_seed,
                              down_seed=down_seed))
    return cells


def simulate_day(block: DayBlock, cell: GridCell, cost_bps: float = 0.0,
                 pnl_relative: bool = False) -> DailyResult:
    if not block.symbols:
        return DailyResult(date=block.date, decisions=[], portfolio=Portfolio(block.date),
                           daily_return_bps=0.0, trade_precision=None,
                           abs_forward={}, rel_forward={})
    e = last_observed_minute(block.closes.shape[1], cell.hyperparams.end_x)
    entry_minute = e + 1
    obs = block.obs[cell.hyperparams.end_x]
    up = cell.up_model.predict(obs)
    down = cell.down_model.predict(obs)
    decisions = [
        TradeDecision(sym, block.date, decide(bool(u), bool(dn)), entry_minute,
                      bool(u), bool(dn))
        for sym, u, dn in zip(block.symbols, up, down)
    ]
    entry_px = {sym: float(block.closes[i, entry_minute])
                for i, sym in enumerate(block.symbols)}
    exit_px = {sym: float(block.closes[i, -1]) for i, sym in enumerate(block.symbols)}
    rel = {sym: float(block.rel_fwd[cell.hyperparams.end_x][i])
           for i, sym in enumerate(block.symbols)}
    return realize(decisions, entry_px, exit_px, rel, cost_bps, pnl_relative)


def score_validation(cells: list[GridCell], val_blocks: list[DayBlock],
                     pooled: bool = False, cost_bps: float = 0.0,
                     pnl_relative: bool = False) -> None:
    """Fill each cell's validation precision: mean of daily trade precisions
    over days that traded (or pooled correct/total with `pooled`). Cells with
    no traded validation days score 0."""
    for cell in cells:
        precisions = []
        correct = 0
        total = 0
        traded_days = 0
        for block in val_blocks:
            result = simulate_day(block, cell, cost_bps, pnl_relative)
            if result.trade_precision is None:
                continue
            traded_days += 1
            precisions.append(result.trade_precision)
            total += result.n_long + result.n_short
            correct += sum(1 for s in result.portfolio.long_weights
                           if result.rel_forward.get(s, 0.0) > 0.0)
            correct += sum(1 for s in result.portfolio.short_weights
                           if result.rel_forward.get(s, 0.0) < 0.0)
        cell.traded_validation_days = traded_days
        if traded_days == 0:
            cell.validation_precision = 0.0
        elif pooled:
            cell.validation_precision = correct / total
        else:
            cell.validation_precision = float(np.mean(precisions))


def select_cell(cells: list[GridCell], kind: str) -> tuple[GridCell, bool]:
    """Best validation precision; ties broken by larger bps then smaller
    |end_x|. The random control skips the search and keeps the first cell.
    Returns (cell, degenerate) where degenerate means no cell traded."""
    degenerate = all(c.validation_precision == 0.0 and c.traded_validation_days == 0
                     for c in cells)
    if kind == KIND_RANDOM:
        return cells[0], degenerate
    best = max(cells, key=lambda c: (c.validation_precision,
                                     c.hyperparams.bps_threshold,
                                     -abs(c.hyperparams.end_x)))
    return best, degenerate


def _month_days(store_dates: list[date], month: Month) -> list[date]:
    lo = bisect_left(store_dates, month.first_day())
    hi = bisect_right(store_dates, month.last_day())
    return store_dates[lo:hi]


def run_grid(layout: PeriodLayout, kind: str, store, selector: UniverseSelector,
             root_seed: int, cfg: TrainConfig, month_index: int = 0,
             workers: int = 1, validation_pooled: bool = False):
    """Train and validate the full grid for one month; convenience wrapper
    used by tests and one-off runs (run_experiment shares day blocks across
    learners instead)."""
    store_dates = store.dates()
    end_xs = tuple(sorted({hp.end_x for hp in GRID}))
    train_dates = [d for m in layout.training_months for d in _month_days(store_dates, m)]
    val_dates = _month_days(store_dates, layout.validation_month)
    train_blocks = build_day_blocks(train_dates, store, selector, end_xs)
    val_blocks = build_day_blocks(val_dates, store, selector, end_xs)
    kind_idx = KINDS.index(kind)
    cells = train_grid_models(kind, stack_blocks(train_blocks, end_xs),
                              stack_blocks(val_blocks, end_xs),
                              (month_index, kind_idx), root_seed, cfg, workers)
    score_validation(cells, val_blocks, validation_pooled)
    selected, degenerate = select_cell(cells, kind)
    return selected, cells, degenerate, val_blocks


def run_experiment(config, store):
    """Run every learner across every test month.

    Returns (results, manifest): results maps learner kind to one DailyResult
    per test trading day; the manifest records config, seeds, per-month grid
    scores, selections, and data checksums.
    """
    store_dates = store.dates()
    if not store_dates:
        raise DataError("bar store is empty")
    selector = UniverseSelector(store, config.universe_size,
                                config.universe_window_months, config.universe_mode)
    first_test = config.start_month.add(HISTORY_MONTHS)
    n_months = config.end_month.diff(first_test) + 1
    if n_months < 1:
        raise DataError(f"end_month {config.end_month} precedes first possible "
                        f"test month {first_test}")
    test_months = [first_test.add(i) for i in range(n_months)]
    end_xs = tuple(sorted({hp.end_x for hp in GRID}))
    results: dict[str, list[DailyResult]] = {k: [] for k in config.learners}
    manifest_months: list[dict] = []

    for month_index, tm in enumerate(test_months):
        layout = layout_periods(config.start_month, tm)
        for m in (*layout.universe_months, *layout.training_months,
                  layout.validation_month, layout.test_month):
            if not _month_days(store_dates, m):
                raise DataError(f"store has no trading days in required month {m}")
        train_dates = [d for m in layout.training_months
                       for d in _month_days(store_dates, m)]
        val_dates = _month_days(store_dates, layout.validation_month)
        test_dates = _month_days(store_dates, layout.test_month)
        train_blocks = build_day_blocks(train_dates, store, selector, end_xs)
        val_blocks = build_day_blocks(val_dates, store, selector, end_xs)
        test_blocks = build_day_blocks(test_dates, store, selector, end_xs)
        train_stack = stack_blocks(train_blocks, end_xs)
        val_stack = stack_blocks(val_blocks, end_xs)
        del train_blocks

        for kind in config.learners:
            kind_idx = KINDS.index(kind)
            cells = train_grid_models(kind, train_stack, val_stack,
                                      (month_index, kind_idx), config.seed,
                                      config.train, config.workers)
            score_validation(cells, val_blocks, config.validation_pooled,
                             config.cost_bps_per_side, config.pnl_relative)
            selected, degenerate = select_cell(cells, kind)
            if degenerate:
                logger.warning("degenerate month %s for %s: no cell traded in "
                               "validation; tie-break selection %s", tm, kind,
                               selected.hyperparams)
            for block in test_blocks:
                results[kind].append(simulate_day(block, selected,
                                                  config.cost_bps_per_side,
                                                  config.pnl_relative))
            manifest_months.append({
                "test_month": str(tm),
                "learner": kind,
                "validation_month": str(layout.validation_month),
                "training_months": [str(m) for m in layout.training_months],
                "degenerate": degenerate,
                "selected": {"end_x": selected.hyperparams.end_x,
                             "bps": selected.hyperparams.bps_threshold,
                             "validation_precision": selected.validation_precision},
                "cells": [{"end_x": c.hyperparams.end_x,
                           "bps": c.hyperparams.bps_threshold,
                           "validation_precision": c.validation_precision,
                           "traded_validation_days": c.traded_validation_days,
                           "up_fallback": c.up_fallback,
                           "down_fallback": c.down_fallback,
                           "up_seed": c.up_seed,
                           "down_seed": c.down_seed} for c in cells],
            })
    manifest = {
        "package_version": __version__,
        "config": config.to_dict(),
        "store_checksum": store.checksum(),
        "first_test_month": str(test_months[0]),
        "last_test_month": str(test_months[-1]),
        "months": manifest_months,
    }
    return results, manifest

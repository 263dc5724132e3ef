"""Daily long/short decisions, balanced allocation, P&L, and trade precision.

Decision truth table over the (up, down) classifier outputs:

    (True,  False) -> Long
    (False, True)  -> Short
    (False, False) -> NoOpinion
    (True,  True)  -> Conflict

Half the capital goes to each side, split equally within a side; if either
side is empty the day does not trade at all. Entries fill at the close of the
decision minute (E+1), exits at the session close. P&L uses absolute symbol
returns (the hedge supplies market neutrality); precision scores each traded
symbol against its universe-relative forward return, zero counting as wrong.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import date
from enum import Enum

logger = logging.getLogger(__name__)


class Action(Enum):
    LONG = "long"
    SHORT = "short"
    NO_OPINION = "no_opinion"
    CONFLICT = "conflict"


def decide(up_class: bool, down_class: bool) -> Action:
    if up_class and not down_class:
        return Action.LONG
    if down_class and not up_class:
        return Action.SHORT
    if up_class and down_class:
        return Action.CONFLICT
    return Action.NO_OPINION


@dataclass(frozen=True)
class TradeDecision:
    symbol: str
    date: date
    action: Action
    entry_minute: int
    up_class: bool
    down_class: bool


@dataclass
class Portfolio:
    date: date
    long_weights: dict[str, float] = field(default_factory=dict)
    short_weights: dict[str, float] = field(default_factory=dict)

    @property
    def is_zero(self) -> bool:
        return not self.long_weights and not self.short_weights


def allocate(decisions: list[TradeDecision]) -> Portfolio:
    """0.5 to each side, equal split within a side; all-zero if a side is empty."""
    d = decisions[0].date if decisions else date.min
    longs = [t.symbol for t in decisions if t.action is Action.LONG]
    shorts = [t.symbol for t in decisions if t.action is Action.SHORT]
    if not longs or not shorts:
        return Portfolio(d)
    wl = 0.5 / len(longs)
    ws = 0.5 / len(shorts)
    return Portfolio(d, {s: wl for s in longs}, {s: ws for s in shorts})


def trade_precision(long_symbols: list[str], short_symbols: list[str],
                    rel_forward: dict[str, float]) -> float | None:
    """Fraction of traded symbols whose relative forward return matched the
    side; exactly zero counts as incorrect. None when nothing traded."""
    total = len(long_symbols) + len(short_symbols)
    if total == 0:
        return None
    correct = sum(1 for s in long_symbols if rel_forward.get(s, 0.0) > 0.0)
    correct += sum(1 for s in short_symbols if rel_forward.get(s, 0.0) < 0.0)
    return correct / total


@dataclass
class DailyResult:
    date: date
    decisions: list[TradeDecision]
    portfolio: Portfolio
    daily_return_bps: float
    trade_precision: float | None
    abs_forward: dict[str, float]
    rel_forward: dict[str, float]
    entry_px: dict[str, float] = field(default_factory=dict)
    exit_px: dict[str, float] = field(default_factory=dict)
    n_long: int = 0
    n_short: int = 0

    @property
    def traded(self) -> bool:
        return not self.portfolio.is_zero


def realize(decisions: list[TradeDecision], entry_px: dict[str, float],
            exit_px: dict[str, float], rel_forward: dict[str, float],
            cost_bps_per_side: float = 0.0, pnl_relative: bool = False) -> DailyResult:
    """Score one day. Allocated symbols missing prices are treated as cash
    (zero return) and logged. A flat per-side cost in bps is charged on each
    side's traded notional."""
    portfolio = allocate(decisions)
    d = decisions[0].date if decisions else date.min
    abs_fwd: dict[str, float] = {}
    for sym in list(portfolio.long_weights) + list(portfolio.short_weights):
        if sym in entry_px and sym in exit_px and entry_px[sym] > 0:
            abs_fwd[sym] = exit_px[sym] / entry_px[sym] - 1.0
        else:
            logger.warning("missing bars for allocated symbol %s on %s; held as cash",
                           sym, d)
    ret_source = rel_forward if pnl_relative else abs_fwd
    total = 0.0
    for sym, w in portfolio.long_weights.items():
        total += w * ret_source.get(sym, 0.0)
    for sym, w in portfolio.short_weights.items():
        total -= w * ret_source.get(sym, 0.0)
    ret_bps = 10_000.0 * total
    if not portfolio.is_zero and cost_bps_per_side:
        notional = (sum(portfolio.long_weights.values())
                    + sum(portfolio.short_weights.values()))
        ret_bps -= cost_bps_per_side * notional
    precision = None
    if not portfolio.is_zero:
        precision = trade_precision(list(portfolio.long_weights),
                                    list(portfolio.short_weights), rel_forward)
    return DailyResult(date=d, decisions=decisions, portfolio=portfolio,
                       daily_return_bps=ret_bps if not portfolio.is_zero else 0.0,
                       trade_precision=precision, abs_forward=abs_fwd,
                       rel_forward=dict(rel_forward),
                       entry_px=dict(entry_px), exit_px=dict(exit_px),
                       n_long=len(portfolio.long_weights),
                       n_short=len(portfolio.short_weights))


def write_trade_log(path, results: list[DailyResult]) -> None:
    """Per-run trade log, one row per allocated position."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "symbol", "action", "weight", "entry_px", "exit_px",
                    "rel_fwd_return_bps", "abs_return_bps"])
        for r in results:
            for dec in r.decisions:
                weight = (r.portfolio.long_weights.get(dec.symbol)
                          or r.portfolio.short_weights.get(dec.symbol))
                if weight is None:
                    continue
                rel = r.rel_forward.get(dec.symbol)
                ab = r.abs_forward.get(dec.symbol)
                w.writerow([r.date.isoformat(), dec.symbol, dec.action.value,
                            repr(weight),
                            repr(r.entry_px.get(dec.symbol, "")),
                            repr(r.exit_px.get(dec.symbol, "")),
                            repr(rel * 10_000.0) if rel is not None else "",
                            repr(ab * 10_000.0) if ab is not None else ""])

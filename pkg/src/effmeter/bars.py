"""Trade ingestion and one-minute OHLCV bar construction.

Raw trades arrive as CSV rows (``timestamp,symbol,price,size,exchange``,
ISO-8601 timestamps with offset). Ingestion canonicalizes symbols through a
dated rename map, drops excluded symbols, counts malformed rows, and sorts.
Bars are built per symbol-day on a fixed 390-minute session grid; minutes
without trades carry the most recent close with zero volume.

Prices are quantized to integer ten-thousandths of a currency unit so that
arithmetic and store round-trips are exact.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import date, datetime, time
from zoneinfo import ZoneInfo

from .errors import DataError, SymbolMapCycleError

logger = logging.getLogger(__name__)

PRICE_SCALE = 10_000


def quantize_price(p: float) -> float:
    """Snap a price to the integer ten-thousandths grid."""
    return round(p * PRICE_SCALE) / PRICE_SCALE


@dataclass(frozen=True)
class TradeRecord:
    timestamp: datetime
    symbol: str
    price: float
    size: int
    exchange: str = ""


@dataclass(frozen=True)
class SessionSpec:
    """One trading session: a date, an opening time, and a minute grid."""

    date: date
    open_time: time = time(9, 30)
    minutes_per_session: int = 390
    tz: str = "America/New_York"

    def open_dt(self) -> datetime:
        return datetime.combine(self.date, self.open_time, tzinfo=ZoneInfo(self.tz))

    def minute_index(self, ts: datetime) -> int:
        """0-based minute bucket for a timestamp, or -1 if outside [open, close)."""
        delta = ts - self.open_dt()
        seconds = delta.total_seconds()
        if seconds < 0:
            return -1
        idx = int(seconds // 60)
        return idx if idx < self.minutes_per_session else -1


@dataclass
class MinuteBar:
    symbol: str
    date: date
    minute_index: int
    open: float
    high: float
    low: float
    close: float
    volume: int


class SymbolMap:
    """Dated symbol renames plus an exclusion set (ETFs, test symbols).

    A rename entry applies to all trades on or after its effective date.
    Chains are followed to a fixpoint; a loop raises SymbolMapCycleError.
    """

    def __init__(self, renames: dict[date, dict[str, str]] | None = None,
                 exclusions: set[str] | None = None):
        self.renames = renames or {}
        self.exclusions = exclusions or set()
        self._cache: dict[tuple[date, str], str] = {}

    @classmethod
    def from_csv(cls, map_path=None, exclusion_path=None) -> "SymbolMap":
        renames: dict[date, dict[str, str]] = {}
        if map_path is not None:
            with open(map_path, newline="", encoding="utf-8") as fh:
                reader = csv.DictReader(fh)
                for row in reader:
                    eff = date.fromisoformat(row["effective_date"].strip())
                    renames.setdefault(eff, {})[row["old_symbol"].strip()] = row["new_symbol"].strip()
        exclusions: set[str] = set()
        if exclusion_path is not None:
            with open(exclusion_path, encoding="utf-8") as fh:
                for line in fh:
                    sym = line.strip()
                    if sym:
                        exclusions.add(sym)
        return cls(renames, exclusions)

    def resolve(self, symbol: str, on_date: date) -> str:
        key = (on_date, symbol)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        active = [self.renames[d] for d in sorted(self.renames) if d <= on_date]
        seen = {symbol}
        current = symbol
        changed = True
        while changed:
            changed = False
            for table in active:
                nxt = table.get(current)
                if nxt is not None and nxt != current:
                    if nxt in seen:
                        raise SymbolMapCycleError(
                            f"symbol mapping cycle at {current!r}->{nxt!r} on {on_date}")
                    seen.add(nxt)
                    current = nxt
                    changed = True
        self._cache[key] = current
        return current

    def is_excluded(self, symbol: str) -> bool:
        return symbol in self.exclusions


@dataclass
class IngestStats:
    rows: int = 0
    malformed: int = 0
    excluded: int = 0
    emitted: int = 0
    out_of_session: int = 0
    notes: list[str] = field(default_factory=list)


def _parse_row(row: dict) -> TradeRecord | None:
    try:
        ts = datetime.fromisoformat(row["timestamp"].strip())
        if ts.tzinfo is None:
            return None
        symbol = row["symbol"].strip()
        price = float(row["price"])
        size = int(row["size"])
        exchange = (row.get("exchange") or "").strip()
    except (KeyError, TypeError, ValueError, AttributeError):
        return None
    if not symbol or price <= 0 or size < 1:
        return None
    return TradeRecord(ts, symbol, quantize_price(price), size, exchange)


def ingest_trades(rows, symbol_map: SymbolMap, session_tz: str = "America/New_York",
                  stats: IngestStats | None = None) -> tuple[list[TradeRecord], IngestStats]:
    """Validate, canonicalize, and sort trade rows.

    `rows` is an iterable of dicts with the trade CSV's fields. Returns
    records sorted by (symbol, timestamp) and the ingest counters. A mapping
    cycle is fatal; malformed rows are counted and skipped.
    """
    stats = stats or IngestStats()
    tz = ZoneInfo(session_tz)
    out: list[TradeRecord] = []
    for row in rows:
        stats.rows += 1
        rec = _parse_row(row)
        if rec is None:
            stats.malformed += 1
            continue
        session_date = rec.timestamp.astimezone(tz).date()
        canonical = symbol_map.resolve(rec.symbol, session_date)
        if symbol_map.is_excluded(rec.symbol) or symbol_map.is_excluded(canonical):
            stats.excluded += 1
            continue
        if canonical != rec.symbol:
            rec = TradeRecord(rec.timestamp, canonical, rec.price, rec.size, rec.exchange)
        out.append(rec)
        stats.emitted += 1
    out.sort(key=lambda r: (r.symbol, r.timestamp))
    return out, stats


def ingest_trade_csv(path, symbol_map: SymbolMap,
                     session_tz: str = "America/New_York") -> tuple[list[TradeRecord], IngestStats]:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read trade file {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        return ingest_trades(reader, symbol_map, session_tz)


def build_minute_bars(trades: list[TradeRecord], session: SessionSpec,
                      prior_close: float | None = None,
                      stats: IngestStats | None = None) -> list[MinuteBar] | None:
    """Aggregate one symbol-day of trades into exactly one bar per session minute.

    Minutes use half-open buckets [t, t+60s); trades at or after the close are
    discarded (counted in `stats.out_of_session`). Minutes before the first
    trade carry `prior_close`; with no trades and no prior close the
    symbol-day is untradable and None is returned.
    """
    minutes = session.minutes_per_session
    buckets: dict[int, list[TradeRecord]] = {}
    symbol = trades[0].symbol if trades else ""
    for t in trades:
        idx = session.minute_index(t.timestamp)
        if idx < 0:
            if stats is not None:
                stats.out_of_session += 1
            continue
        buckets.setdefault(idx, []).append(t)
    if prior_close is None and (not buckets or min(buckets) > 0):
        # leading minutes would have no close to carry
        return None
    bars: list[MinuteBar] = []
    last_close = quantize_price(prior_close) if prior_close is not None else None
    for m in range(minutes):
        group = buckets.get(m)
        if group:
            prices = [t.price for t in group]
            bar = MinuteBar(symbol=group[0].symbol, date=session.date, minute_index=m,
                            open=prices[0], high=max(prices), low=min(prices),
                            close=prices[-1], volume=sum(t.size for t in group))
            last_close = bar.close
        else:
            # carry-forward: flat bar at the most recent known close
            assert last_close is not None
            bar = MinuteBar(symbol=symbol, date=session.date, minute_index=m,
                            open=last_close, high=last_close, low=last_close,
                            close=last_close, volume=0)
        bars.append(bar)
    return bars


def bars_to_array(bars: list[MinuteBar]):
    """(minutes, 5) float array of open/high/low/close/volume, store layout."""
    import numpy as np

    arr = np.empty((len(bars), 5), dtype=np.float64)
    for i, b in enumerate(bars):
        arr[i] = (b.open, b.high, b.low, b.close, float(b.volume))
    return arr


def group_by_symbol_day(records: list[TradeRecord],
                        session_tz: str = "America/New_York") -> dict[tuple[date, str], list[TradeRecord]]:
    """Split a (symbol, timestamp)-sorted record list into symbol-day groups."""
    tz = ZoneInfo(session_tz)
    groups: dict[tuple[date, str], list[TradeRecord]] = {}
    for rec in records:
        d = rec.timestamp.astimezone(tz).date()
        groups.setdefault((d, rec.symbol), []).append(rec)
    for key in groups:
        groups[key].sort(key=lambda r: r.timestamp)
    return groups

"""Per-date columnar bar files plus an in-memory store for desk-scale runs.

File layout (version 1, little-endian), one file per trading date named
``YYYYMMDD.mbar``:

    offset  size  field
    0       4     magic b"MBS1"
    4       1     version (1)
    5       1     flags (0)
    6       2     u16 minutes per session
    8       4     u32 date as YYYYMMDD
    12      4     u32 symbol count
    16      4     u32 CRC32 of the payload (directory + blocks)
    20      -     directory: per symbol, 12 bytes ASCII, zero padded, sorted
    -       -     blocks, directory order: minutes x 5 u32
                  (open, high, low, close in price ten-thousandths; volume)

Both store classes expose the same duck-typed interface: ``write_day``,
``dates``, ``has_date``, ``symbols``, ``load_closes``, ``load_ohlcv``,
``daily_dollar_volume``, ``checksum``.
"""

from __future__ import annotations

import hashlib
import logging
import struct
import zlib
from datetime import date
from pathlib import Path

import numpy as np

from .bars import PRICE_SCALE
from .errors import DataError, StoreCorruptError

logger = logging.getLogger(__name__)

MAGIC = b"MBS1"
VERSION = 1
_HEADER = struct.Struct("<4sBBHIII")
SYMBOL_BYTES = 12
FIELDS = 5  # open, high, low, close, volume
MAX_PRICE_TICKS = 2**32 - 1


def _date_to_u32(d: date) -> int:
    return d.year * 10_000 + d.month * 100 + d.day


def _u32_to_date(v: int) -> date:
    return date(v // 10_000, v // 100 % 100, v % 100)


def encode_day(d: date, day: dict[str, np.ndarray], minutes: int = 390) -> bytes:
    """Serialize one date's bars. `day` maps symbol -> (minutes, 5) float array."""
    symbols = sorted(day)
    directory = bytearray()
    blocks = bytearray()
    for sym in symbols:
        raw = sym.encode("ascii")
        if len(raw) > SYMBOL_BYTES:
            raise DataError(f"symbol too long for store: {sym!r}")
        directory += raw.ljust(SYMBOL_BYTES, b"\0")
        arr = np.asarray(day[sym], dtype=np.float64)
        if arr.shape != (minutes, FIELDS):
            raise DataError(f"bar block for {sym} on {d} has shape {arr.shape}, "
                            f"expected {(minutes, FIELDS)}")
        ticks = np.empty((minutes, FIELDS), dtype=np.uint32)
        prices = np.rint(arr[:, :4] * PRICE_SCALE)
        if prices.min() < 0 or prices.max() > MAX_PRICE_TICKS:
            raise DataError(f"price out of range for {sym} on {d}")
        ticks[:, :4] = prices.astype(np.uint32)
        ticks[:, 4] = np.rint(arr[:, 4]).astype(np.uint32)
        blocks += ticks.tobytes()
    payload = bytes(directory) + bytes(blocks)
    header = _HEADER.pack(MAGIC, VERSION, 0, minutes, _date_to_u32(d),
                          len(symbols), zlib.crc32(payload))
    return header + payload


def decode_day(blob: bytes, path="<memory>") -> tuple[date, int, list[str], np.ndarray]:
    """Inverse of encode_day. Returns (date, minutes, symbols, (n, minutes, 5) float array)."""
    if len(blob) < _HEADER.size:
        raise StoreCorruptError(path, "truncated header")
    magic, version, _flags, minutes, date_u32, n_symbols, crc = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise StoreCorruptError(path, f"bad magic {magic!r}")
    if version != VERSION:
        raise StoreCorruptError(path, f"unsupported version {version}")
    payload = blob[_HEADER.size:]
    expect = n_symbols * (SYMBOL_BYTES + minutes * FIELDS * 4)
    if len(payload) != expect:
        raise StoreCorruptError(path, f"payload size {len(payload)}, expected {expect}")
    if zlib.crc32(payload) != crc:
        raise StoreCorruptError(path, "CRC mismatch")
    symbols = []
    for i in range(n_symbols):
        raw = payload[i * SYMBOL_BYTES:(i + 1) * SYMBOL_BYTES]
        symbols.append(raw.rstrip(b"\0").decode("ascii"))
    ticks = np.frombuffer(payload, dtype="<u4", offset=n_symbols * SYMBOL_BYTES)
    ticks = ticks.reshape(n_symbols, minutes, FIELDS)
    arr = np.empty((n_symbols, minutes, FIELDS), dtype=np.float64)
    arr[:, :, :4] = ticks[:, :, :4].astype(np.float64) / PRICE_SCALE
    arr[:, :, 4] = ticks[:, :, 4]
    return _u32_to_date(date_u32), minutes, symbols, arr


class _DollarVolumeCache:
    def __init__(self):
        self._dv: dict[date, dict[str, float]] = {}

    def get(self, store, d: date) -> dict[str, float]:
        hit = self._dv.get(d)
        if hit is not None:
            return hit
        day = store._load_raw(d)
        if day is None:
            dv: dict[str, float] = {}
        else:
            symbols, arr = day
            vals = (arr[:, :, 3] * arr[:, :, 4]).sum(axis=1)
            dv = dict(zip(symbols, vals.tolist()))
        self._dv[d] = dv
        return dv


class BarStore:
    """Directory of per-date bar files."""

    def __init__(self, root, day_cache_size: int = 64):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._dv = _DollarVolumeCache()
        self._cache: dict[date, tuple[list[str], np.ndarray]] = {}
        self._cache_size = day_cache_size

    def _path(self, d: date) -> Path:
        return self.root / f"{_date_to_u32(d):08d}.mbar"

    def write_day(self, d: date, day: dict[str, np.ndarray], minutes: int = 390) -> None:
        self._path(d).write_bytes(encode_day(d, day, minutes))
        self._cache.pop(d, None)

    def dates(self) -> list[date]:
        out = []
        for p in sorted(self.root.glob("*.mbar")):
            out.append(_u32_to_date(int(p.stem)))
        return out

    def has_date(self, d: date) -> bool:
        return self._path(d).exists()

    def _load_raw(self, d: date) -> tuple[list[str], np.ndarray] | None:
        hit = self._cache.get(d)
        if hit is not None:
            return hit
        path = self._path(d)
        if not path.exists():
            return None
        got_date, _minutes, symbols, arr = decode_day(path.read_bytes(), path)
        if got_date != d:
            raise StoreCorruptError(path, f"file contains date {got_date}")
        if len(self._cache) >= self._cache_size:
            self._cache.pop(next(iter(self._cache)))
        self._cache[d] = (symbols, arr)
        return symbols, arr

    def symbols(self, d: date) -> list[str]:
        day = self._load_raw(d)
        return [] if day is None else list(day[0])

    def load_closes(self, d: date, symbols: list[str] | None = None):
        """Close-price rows for the requested symbols present on `d`.

        Returns (present_symbols, (n, minutes) float array). Missing dates
        produce an empty result with a warning; missing symbols are omitted.
        """
        day = self._load_raw(d)
        if day is None:
            logger.warning("no bar file for %s", d)
            return [], np.empty((0, 0), dtype=np.float64)
        present, arr = day
        if symbols is None:
            return list(present), arr[:, :, 3].copy()
        index = {s: i for i, s in enumerate(present)}
        rows = [(s, index[s]) for s in symbols if s in index]
        if not rows:
            return [], np.empty((0, arr.shape[1]), dtype=np.float64)
        names, idx = zip(*rows)
        return list(names), arr[list(idx), :, 3].copy()

    def load_ohlcv(self, d: date, symbol: str) -> np.ndarray | None:
        day = self._load_raw(d)
        if day is None:
            return None
        symbols, arr = day
        try:
            i = symbols.index(symbol)
        except ValueError:
            return None
        return arr[i].copy()

    def daily_dollar_volume(self, d: date) -> dict[str, float]:
        return self._dv.get(self, d)

    def checksum(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        for p in sorted(self.root.glob("*.mbar")):
            h.update(p.name.encode())
            h.update(p.read_bytes())
        return h.hexdigest()


class MemoryBarStore:
    """Same interface as BarStore, backed by encoded blobs in memory."""

    def __init__(self):
        self._days: dict[date, bytes] = {}
        self._decoded: dict[date, tuple[list[str], np.ndarray]] = {}
        self._dv = _DollarVolumeCache()

    def write_day(self, d: date, day: dict[str, np.ndarray], minutes: int = 390) -> None:
        self._days[d] = encode_day(d, day, minutes)
        self._decoded.pop(d, None)

    def dates(self) -> list[date]:
        return sorted(self._days)

    def has_date(self, d: date) -> bool:
        return d in self._days

    def _load_raw(self, d: date):
        hit = self._decoded.get(d)
        if hit is not None:
            return hit
        blob = self._days.get(d)
        if blob is None:
            return None
        _, _, symbols, arr = decode_day(blob)
        if len(self._decoded) >= 8:
            self._decoded.pop(next(iter(self._decoded)))
        self._decoded[d] = (symbols, arr)
        return symbols, arr

    symbols = BarStore.symbols
    load_closes = BarStore.load_closes
    load_ohlcv = BarStore.load_ohlcv
    daily_dollar_volume = BarStore.daily_dollar_volume

    def checksum(self) -> str:
        h = hashlib.blake2b(digest_size=16)
        for d in sorted(self._days):
            h.update(str(d).encode())
            h.update(self._days[d])
        return h.hexdigest()

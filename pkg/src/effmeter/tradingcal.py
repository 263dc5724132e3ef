"""Synthetic weekday trading calendar and month arithmetic.

Trading days are Monday through Friday; every session is a full regular
session. Months are the unit of the walk-forward schedule, so most period
math happens on (year, month) pairs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, timedelta

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")


def is_trading_day(d: date) -> bool:
    return d.weekday() < 5


def next_trading_day(d: date) -> date:
    d = d + timedelta(days=1)
    while not is_trading_day(d):
        d = d + timedelta(days=1)
    return d


def trading_days(start: date, end: date) -> list[date]:
    """All trading days in the closed interval [start, end]."""
    if end < start:
        return []
    out = []
    d = start
    while d <= end:
        if is_trading_day(d):
            out.append(d)
        d = d + timedelta(days=1)
    return out


@dataclass(frozen=True, order=True)
class Month:
    """A calendar month, the scheduling unit for training/validation/test."""

    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise ValueError(f"invalid month: {self.month}")

    @classmethod
    def parse(cls, text: str) -> "Month":
        m = _MONTH_RE.match(text.strip())
        if m is None:
            raise ValueError(f"expected YYYY-MM, got {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def of(cls, d: date) -> "Month":
        return cls(d.year, d.month)

    def add(self, n: int) -> "Month":
        k = (self.year * 12 + self.month - 1) + n
        return Month(k // 12, k % 12 + 1)

    def diff(self, other: "Month") -> int:
        """Number of months from `other` to self (self - other)."""
        return (self.year - other.year) * 12 + (self.month - other.month)

    def first_day(self) -> date:
        return date(self.year, self.month, 1)

    def last_day(self) -> date:
        return self.add(1).first_day() - timedelta(days=1)

    def trading_days(self) -> list[date]:
        return trading_days(self.first_day(), self.last_day())

    def contains(self, d: date) -> bool:
        return d.year == self.year and d.month == self.month

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def month_range(first: Month, last: Month) -> list[Month]:
    """Months from `first` through `last`, inclusive."""
    n = last.diff(first)
    if n < 0:
        return []
    return [first.add(i) for i in range(n + 1)]


def trading_days_in_months(months: list[Month]) -> list[date]:
    out: list[date] = []
    for m in months:
        out.extend(m.trading_days())
    return out

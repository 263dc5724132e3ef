"""Aggregation of daily results into report series and summary tables.

Daily returns compound multiplicatively into cumulative curves. Smoothing
uses a 40-observation centered window that shifts to stay inside the series
near the edges (so a series shorter than the window averages to its global
mean at every point). Histograms use half-open bins [k*w, (k+1)*w). The
split report partitions days at a configured boundary date (early: on or
before; late: after). Monthly model returns can be paired with an external
monthly volume-ratio series and scored with Pearson correlation per
partition.

No-trade days contribute 0 bps to return series and are excluded from
precision means.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date

import numpy as np

from .strategy import DailyResult
from .tradingcal import Month


def cumulative(returns_bps: list[float] | np.ndarray) -> np.ndarray:
    """Compounded cumulative return after each day, as a fraction."""
    r = np.asarray(returns_bps, dtype=np.float64) * 1e-4
    return np.cumprod(1.0 + r) - 1.0


def smooth_centered(values: list[float] | np.ndarray, window: int = 40) -> np.ndarray:
    """Centered moving mean over up to `window` observations.

    The window is [i - window//2, i + (window-1)//2], shifted to fit inside
    the series near the edges; a series shorter than the window yields its
    global mean everywhere.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    if n == 0:
        return v.copy()
    w = min(window, n)
    back = window // 2
    out = np.empty(n, dtype=np.float64)
    csum = np.concatenate([[0.0], np.cumsum(v)])
    for i in range(n):
        lo = min(max(i - back, 0), n - w)
        out[i] = (csum[lo + w] - csum[lo]) / w
    return out


def histogram(values: list[float] | np.ndarray, bin_width: float) -> dict[int, int]:
    """Counts per half-open bin [k*w, (k+1)*w); keys are the integers k."""
    if bin_width <= 0:
        raise ValueError("bin width must be positive")
    out: dict[int, int] = {}
    for x in np.asarray(values, dtype=np.float64):
        k = int(math.floor(x / bin_width))
        out[k] = out.get(k, 0) + 1
    return dict(sorted(out.items()))


def pearson(x, y) -> float | None:
    """Product-moment correlation; None when undefined (short or degenerate)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size:
        raise ValueError("series must be aligned")
    if x.size < 2:
        return None
    xd = x - x.mean()
    yd = y - y.mean()
    sx = float(np.sqrt((xd * xd).sum()))
    sy = float(np.sqrt((yd * yd).sum()))
    if sx == 0.0 or sy == 0.0:
        return None
    return float((xd * yd).sum() / (sx * sy))


@dataclass
class PartitionStats:
    n_days: int
    n_trading_days: int
    mean_daily_return_bps: float | None
    cumulative_return_pct: float | None
    mean_trade_precision: float | None

    @property
    def empty(self) -> bool:
        return self.n_days == 0


def partition_stats(results: list[DailyResult]) -> PartitionStats:
    if not results:
        return PartitionStats(0, 0, None, None, None)
    rets = [r.daily_return_bps for r in results]
    precisions = [r.trade_precision for r in results if r.trade_precision is not None]
    cum = cumulative(rets)
    return PartitionStats(
        n_days=len(results),
        n_trading_days=sum(1 for r in results if r.traded),
        mean_daily_return_bps=float(np.mean(rets)),
        cumulative_return_pct=float(cum[-1] * 100.0),
        mean_trade_precision=float(np.mean(precisions)) if precisions else None,
    )


def split_report(results_by_kind: dict[str, list[DailyResult]],
                 split_date: date) -> dict[str, dict[str, PartitionStats]]:
    """Per learner: stats for days on or before the split date ("early") and
    after it ("late"). Empty partitions are marked empty, not zero."""
    out: dict[str, dict[str, PartitionStats]] = {}
    for kind, results in results_by_kind.items():
        early = [r for r in results if r.date <= split_date]
        late = [r for r in results if r.date > split_date]
        out[kind] = {"early": partition_stats(early), "late": partition_stats(late)}
    return out


@dataclass
class DailyRow:
    """Minimal daily record, as reloaded from daily_returns.csv."""

    date: date
    daily_return_bps: float
    trade_precision: float | None
    n_long: int
    n_short: int

    @property
    def traded(self) -> bool:
        return (self.n_long + self.n_short) > 0


def read_daily_returns(path) -> dict[str, list[DailyRow]]:
    """Inverse of write_daily_returns, for the standalone report command."""
    out: dict[str, list[DailyRow]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            prec = row["trade_precision"]
            out.setdefault(row["learner"], []).append(DailyRow(
                date=date.fromisoformat(row["date"]),
                daily_return_bps=float(row["daily_return_bps"]),
                trade_precision=float(prec) if prec else None,
                n_long=int(row["n_long"]),
                n_short=int(row["n_short"]),
            ))
    return out


def monthly_mean_returns(results: list[DailyResult]) -> dict[Month, float]:
    by_month: dict[Month, list[float]] = {}
    for r in results:
        by_month.setdefault(Month.of(r.date), []).append(r.daily_return_bps)
    return {m: float(np.mean(v)) for m, v in sorted(by_month.items())}


def read_hft_series(path) -> dict[Month, float]:
    """External monthly volume-ratio file: header ``month,hft_ratio``."""
    out: dict[Month, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out[Month.parse(row["month"])] = float(row["hft_ratio"])
    return out


@dataclass
class MonthlyAlignment:
    pairs: list[tuple[Month, float, float]]  # (month, hft_ratio, mean_return_bps)
    early_correlation: float | None
    late_correlation: float | None


def align_monthly(results: list[DailyResult], hft: dict[Month, float],
                  split_date: date) -> MonthlyAlignment:
    """Pair monthly mean model returns with the external ratio series and
    correlate per partition. Partitions with fewer than two overlapping
    months have undefined correlation."""
    monthly = monthly_mean_returns(results)
    split_month = Month.of(split_date)
    pairs = [(m, hft[m], monthly[m]) for m in sorted(monthly) if m in hft]
    early = [(h, r) for m, h, r in pairs if m <= split_month]
    late = [(h, r) for m, h, r in pairs if m > split_month]

    def corr(part: list[tuple[float, float]]) -> float | None:
        if len(part) < 2:
            return None
        return pearson([p[0] for p in part], [p[1] for p in part])

    return MonthlyAlignment(pairs, corr(early), corr(late))


# ---------------------------------------------------------------------------
# CSV emission. All files use LF endings and repr() floats so identical runs
# are byte-identical.

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_daily_returns(path, results_by_kind: dict[str, list[DailyResult]]) -> None:
    rows = []
    for kind in sorted(results_by_kind):
        for r in results_by_kind[kind]:
            rows.append([kind, r.date.isoformat(), r.daily_return_bps,
                         r.trade_precision, r.n_long, r.n_short])
    _write_csv(path, ["learner", "date", "daily_return_bps", "trade_precision",
                      "n_long", "n_short"], rows)


def write_cumulative(path, results_by_kind: dict[str, list[DailyResult]]) -> None:
    rows = []
    for kind in sorted(results_by_kind):
        results = results_by_kind[kind]
        cum = cumulative([r.daily_return_bps for r in results])
        for r, c in zip(results, cum):
            rows.append([kind, r.date.isoformat(), float(c * 100.0)])
    _write_csv(path, ["learner", "date", "cumulative_return_pct"], rows)


def write_smoothed(path, results_by_kind: dict[str, list[DailyResult]],
                   window: int = 40) -> None:
    rows = []
    for kind in sorted(results_by_kind):
        results = results_by_kind[kind]
        sm = smooth_centered([r.daily_return_bps for r in results], window)
        for r, s in zip(results, sm):
            rows.append([kind, r.date.isoformat(), float(s)])
    _write_csv(path, ["learner", "date", "smoothed_return_bps"], rows)


def write_return_hist(path, results_by_kind: dict[str, list[DailyResult]],
                      split_date: date, bin_width_bps: float = 2.0) -> None:
    rows = []
    for kind in sorted(results_by_kind):
        for name, part in (("early", [r for r in results_by_kind[kind]
                                      if r.date <= split_date]),
                           ("late", [r for r in results_by_kind[kind]
                                     if r.date > split_date])):
            hist = histogram([r.daily_return_bps for r in part], bin_width_bps)
            for k, count in hist.items():
                rows.append([kind, name, float(k * bin_width_bps),
                             float((k + 1) * bin_width_bps), count])
    _write_csv(path, ["learner", "partition", "bin_left_bps", "bin_right_bps",
                      "count"], rows)


def write_precision_hist(path, results_by_kind: dict[str, list[DailyResult]],
                         split_date: date, bin_width: float = 0.02) -> None:
    rows = []
    for kind in sorted(results_by_kind):
        for name, part in (("early", [r for r in results_by_kind[kind]
                                      if r.date <= split_date]),
                           ("late", [r for r in results_by_kind[kind]
                                     if r.date > split_date])):
            values = [r.trade_precision for r in part if r.trade_precision is not None]
            for k, count in histogram(values, bin_width).items():
                rows.append([kind, name, float(k * bin_width),
                             float((k + 1) * bin_width), count])
    _write_csv(path, ["learner", "partition", "bin_left", "bin_right", "count"], rows)


def write_split_report(path, results_by_kind: dict[str, list[DailyResult]],
                       split_date: date) -> None:
    report = split_report(results_by_kind, split_date)
    rows = []
    for kind in sorted(report):
        for name in ("early", "late"):
            s = report[kind][name]
            rows.append([kind, name, s.n_days, s.n_trading_days,
                         s.mean_daily_return_bps, s.cumulative_return_pct,
                         s.mean_trade_precision])
    _write_csv(path, ["learner", "partition", "n_days", "n_trading_days",
                      "mean_daily_return_bps", "cumulative_return_pct",
                      "mean_trade_precision"], rows)


def write_hft_outputs(pairs_path, corr_path,
                      results_by_kind: dict[str, list[DailyResult]],
                      hft: dict[Month, float], split_date: date) -> None:
    pair_rows = []
    corr_rows = []
    split_month = Month.of(split_date)
    for kind in sorted(results_by_kind):
        aligned = align_monthly(results_by_kind[kind], hft, split_date)
        for m, ratio, ret in aligned.pairs:
            partition = "early" if m <= split_month else "late"
            pair_rows.append([kind, str(m), partition, ratio, ret])
        corr_rows.append([kind, "early", aligned.early_correlation,
                          sum(1 for m, _, _ in aligned.pairs if m <= split_month)])
        corr_rows.append([kind, "late", aligned.late_correlation,
                          sum(1 for m, _, _ in aligned.pairs if m > split_month)])
    _write_csv(pairs_path, ["learner", "month", "partition", "hft_ratio",
                            "mean_return_bps"], pair_rows)
    _write_csv(corr_path, ["learner", "partition", "pearson_r", "n_months"], corr_rows)


def write_all_reports(out_dir, results_by_kind: dict[str, list[DailyResult]],
                      split_date: date, hft: dict[Month, float] | None = None) -> list[str]:
    """Emit every report CSV into `out_dir`; returns the file names written."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_daily_returns(out / "daily_returns.csv", results_by_kind)
    write_cumulative(out / "cumulative.csv", results_by_kind)
    write_smoothed(out / "smoothed.csv", results_by_kind)
    write_return_hist(out / "return_hist.csv", results_by_kind, split_date)
    write_precision_hist(out / "precision_hist.csv", results_by_kind, split_date)
    write_split_report(out / "split_report.csv", results_by_kind, split_date)
    written = ["daily_returns.csv", "cumulative.csv", "smoothed.csv",
               "return_hist.csv", "precision_hist.csv", "split_report.csv"]
    if hft is not None:
        write_hft_outputs(out / "hft_pairs.csv", out / "correlations.csv",
                          results_by_kind, hft, split_date)
        written += ["hft_pairs.csv", "correlations.csv"]
    return written

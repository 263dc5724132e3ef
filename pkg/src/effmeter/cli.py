"""Command-line entry point.

Subcommands: ingest, bars, universe, synth, run, report, selfcheck.
Exit codes: 0 success, 1 usage error, 2 data/config error, 3 internal check
failure. Every run writes a manifest capturing config, seeds, and input
checksums so results can be reproduced byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import date
from pathlib import Path

import numpy as np

from . import __version__
from .analytics import read_hft_series, write_all_reports
from .bars import (SessionSpec, SymbolMap, bars_to_array, build_minute_bars,
                   group_by_symbol_day, ingest_trade_csv)
from .config import load_experiment_config, load_synth_config
from .errors import ConfigError, DataError
from .store import BarStore
from .strategy import write_trade_log
from .synth import describe_market, gen_market
from .universe import UniverseSelector, write_universe_cache
from .walkforward import run_experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CHECK = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    p = _Parser(prog="effmeter", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ing = sub.add_parser("ingest", help="trade CSVs -> minute bars -> store")
    ing.add_argument("trades", nargs="+", help="trade CSV files")
    ing.add_argument("--store", required=True, help="output bar store directory")
    ing.add_argument("--symbol-map", help="rename CSV: effective_date,old_symbol,new_symbol")
    ing.add_argument("--exclusions", help="one excluded symbol per line")
    ing.add_argument("--tz", default="America/New_York")

    bars_p = sub.add_parser("bars", help="inspect a bar store")
    bars_p.add_argument("--store", required=True)
    bars_p.add_argument("--date", help="YYYY-MM-DD; omit for a store summary")
    bars_p.add_argument("--symbol", help="dump full OHLCV for one symbol-day")
    bars_p.add_argument("--out", help="write CSV here instead of stdout")

    uni = sub.add_parser("universe", help="top-N dollar-volume universe for a date")
    uni.add_argument("--store", required=True)
    uni.add_argument("--date", required=True, help="YYYY-MM-DD")
    uni.add_argument("--size", type=int, default=500)
    uni.add_argument("--window-months", type=int, default=12)
    uni.add_argument("--out", help="write date,rank,symbol,dollar_volume CSV here")

    syn = sub.add_parser("synth", help="generate a synthetic market into a store")
    syn.add_argument("--config", required=True, help="synth key-value config")
    syn.add_argument("--store", required=True, help="output bar store directory")
    syn.add_argument("--describe", action="store_true",
                     help="print realized signal statistics after generating")

    run_p = sub.add_parser("run", help="run the walk-forward experiment")
    run_p.add_argument("--config", required=True, help="experiment key-value config")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--store", help="override the config's store path")
    run_p.add_argument("--seed", type=int, help="override the config's seed")
    run_p.add_argument("--workers", type=int, help="override worker count")
    run_p.add_argument("--pnl-relative", action="store_true",
                       help="score P&L on universe-relative returns")
    run_p.add_argument("--split-date", help="early/late boundary YYYY-MM-DD")
    run_p.add_argument("--hft-file", help="monthly CSV: month,hft_ratio")

    rep = sub.add_parser("report", help="recompute report CSVs from daily_returns.csv")
    rep.add_argument("--daily", required=True, help="daily_returns.csv from a run")
    rep.add_argument("--out", required=True)
    rep.add_argument("--split-date", default="2008-09-30")
    rep.add_argument("--hft-file")

    sub.add_parser("selfcheck", help="fast built-in verification of core math")
    return p


# ---------------------------------------------------------------------------

def _cmd_ingest(args) -> int:
    paths = [Path(p) for p in args.trades]
    missing = [str(p) for p in paths if not p.is_file()]
    for opt in (args.symbol_map, args.exclusions):
        if opt and not Path(opt).is_file():
            missing.append(opt)
    if missing:
        print(f"missing input file(s): {', '.join(missing)}", file=sys.stderr)
        return EXIT_DATA
    symbol_map = SymbolMap.from_csv(args.symbol_map, args.exclusions)
    records = []
    totals = None
    for p in paths:
        recs, stats = ingest_trade_csv(p, symbol_map, args.tz)
        records.extend(recs)
        if totals is None:
            totals = stats
        else:
            totals.rows += stats.rows
            totals.malformed += stats.malformed
            totals.excluded += stats.excluded
            totals.emitted += stats.emitted
    records.sort(key=lambda r: (r.symbol, r.timestamp))
    groups = group_by_symbol_day(records, args.tz)
    store = BarStore(args.store)
    dates = sorted({d for d, _ in groups})
    prior_closes: dict[str, float] = {}
    existing = [d for d in store.dates() if dates and d < dates[0]]
    if existing:
        last = existing[-1]
        for sym in store.symbols(last):
            block = store.load_ohlcv(last, sym)
            if block is not None:
                prior_closes[sym] = float(block[-1, 3])
    built = 0
    untradable = 0
    for d in dates:
        session = SessionSpec(d, tz=args.tz)
        day: dict[str, np.ndarray] = {}
        for (gd, sym), trades in sorted(groups.items()):
            if gd != d:
                continue
            bars = build_minute_bars(trades, session, prior_closes.get(sym), totals)
            if bars is None:
                untradable += 1
                continue
            day[sym] = bars_to_array(bars)
            prior_closes[sym] = bars[-1].close
        if not day:
            print(f"note: {d} had no in-session trades; session skipped")
            continue
        store.write_day(d, day)
        built += len(day)
    print(f"rows: {totals.rows}")
    print(f"malformed: {totals.malformed}")
    print(f"excluded: {totals.excluded}")
    print(f"out_of_session: {totals.out_of_session}")
    print(f"symbol_days_built: {built}")
    print(f"untradable_symbol_days: {untradable}")
    print(f"dates: {len(dates)}")
    return EXIT_OK


def _cmd_bars(args) -> int:
    store = BarStore(args.store)
    if args.date is None:
        dates = store.dates()
        print(f"dates: {len(dates)}")
        if dates:
            print(f"first: {dates[0].isoformat()}")
            print(f"last: {dates[-1].isoformat()}")
            print(f"symbols_last_date: {len(store.symbols(dates[-1]))}")
        return EXIT_OK
    d = date.fromisoformat(args.date)
    if not store.has_date(d):
        print(f"no bars for {d}", file=sys.stderr)
        return EXIT_DATA
    if args.symbol is None:
        syms = store.symbols(d)
        print(f"{d} symbols: {len(syms)}")
        for s in syms:
            print(s)
        return EXIT_OK
    block = store.load_ohlcv(d, args.symbol)
    if block is None:
        print(f"{args.symbol} absent on {d}", file=sys.stderr)
        return EXIT_DATA
    lines = ["minute,open,high,low,close,volume"]
    for m in range(block.shape[0]):
        o, h, lo_, c, v = block[m]
        lines.append(f"{m},{o!r},{h!r},{lo_!r},{c!r},{int(v)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_universe(args) -> int:
    store = BarStore(args.store)
    d = date.fromisoformat(args.date)
    selector = UniverseSelector(store, args.size, args.window_months)
    uni = selector.universe(d)
    if args.out:
        write_universe_cache(args.out, [uni])
    else:
        for rank, (sym, dv) in enumerate(zip(uni.symbols, uni.dollar_volumes), start=1):
            print(f"{rank},{sym},{dv!r}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    config = load_synth_config(args.config)
    store = BarStore(args.store)
    summary = gen_market(config, store)
    for key in ("n_dates", "first_date", "last_date", "symbol_days",
                "marked_symbol_days"):
        print(f"{key}: {summary[key]}")
    if args.describe:
        report = describe_market(store, config)
        print(f"planted: {report.planted}")
        print(f"marked_fraction: {report.marked_fraction}")
        print(f"expected_marked_fraction: {report.expected_marked_fraction}")
        print(f"realized_conditional_drift_bps: {report.realized_conditional_drift_bps}")
        print(f"per_minute_log_mean: {report.per_minute_log_mean!r}")
        print(f"per_minute_log_var: {report.per_minute_log_var!r}")
        for note in report.notes:
            print(f"note: {note}")
    return EXIT_OK


def _cmd_run(args) -> int:
    from dataclasses import replace

    overrides = {"store": args.store}
    config = load_experiment_config(args.config, overrides)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    if args.pnl_relative:
        config = replace(config, pnl_relative=True)
    if args.split_date:
        config = replace(config, split_date=date.fromisoformat(args.split_date))
    if not config.store:
        raise ConfigError("no bar store: set 'store' in the config or pass --store")
    store = BarStore(config.store)
    results, manifest = run_experiment(config, store)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hft = read_hft_series(args.hft_file) if args.hft_file else None
    written = write_all_reports(out, results, config.split_date, hft)
    for kind, res in sorted(results.items()):
        write_trade_log(out / f"trade_log_{kind}.csv", res)
        written.append(f"trade_log_{kind}.csv")
    manifest_path = out / "run_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")
    written.append("run_manifest.json")
    for name in written:
        print(f"wrote {out / name}")
    return EXIT_OK


def _cmd_report(args) -> int:
    from .analytics import read_daily_returns

    results = read_daily_returns(args.daily)
    split = date.fromisoformat(args.split_date)
    hft = read_hft_series(args.hft_file) if args.hft_file else None
    written = write_all_reports(args.out, results, split, hft)
    for name in written:
        print(f"wrote {Path(args.out) / name}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# selfcheck: quick internal gauges of the load-bearing math

def _check_nn_gradient() -> bool:
    from .learners import nn_forward, nn_gradient, nn_loss

    rng = np.random.default_rng(11)
    while True:
        # re-draw until no ReLU pre-activation sits near its kink, where a
        # central difference would not measure the analytic derivative
        sizes = (5, 4, 3, 2)
        params = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            params.append(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in))
            params.append(rng.standard_normal(fan_out) * 0.3)
        x = rng.standard_normal((8, 5))
        y = np.zeros((8, 2))
        y[np.arange(8), rng.integers(0, 2, 8)] = 1.0
        _, pre, _ = nn_forward(params, x)
        if min(float(np.abs(z).min()) for z in pre[:-1]) > 1e-4:
            break
    grads = nn_gradient(params, x, y)
    h = 1e-5
    for p, g in zip(params, grads):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for idx in range(0, flat.size, max(1, flat.size // 5)):
            orig = flat[idx]
            flat[idx] = orig + h
            up = nn_loss(params, x, y)
            flat[idx] = orig - h
            dn = nn_loss(params, x, y)
            flat[idx] = orig
            fd = (up - dn) / (2 * h)
            if abs(fd - gflat[idx]) > 1e-5 * max(1.0, abs(fd), abs(gflat[idx])):
                return False
    return True


def _check_logistic_gradient() -> bool:
    from .learners import logistic_gradient, logistic_loss

    rng = np.random.default_rng(12)
    x = rng.standard_normal((16, 6))
    y = rng.integers(0, 2, 16).astype(np.float64)
    w = rng.standard_normal(6) * 0.5
    b = 0.3
    lam = 1e-3
    gw, gb = logistic_gradient(w, b, x, y, lam)
    h = 1e-6
    for idx in range(6):
        orig = w[idx]
        w[idx] = orig + h
        up = logistic_loss(w, b, x, y, lam)
        w[idx] = orig - h
        dn = logistic_loss(w, b, x, y, lam)
        w[idx] = orig
        fd = (up - dn) / (2 * h)
        if abs(fd - gw[idx]) > 1e-6 * max(1.0, abs(fd), abs(gw[idx])):
            return False
    fd_b = (logistic_loss(w, b + h, x, y, lam) - logistic_loss(w, b - h, x, y, lam)) / (2 * h)
    return abs(fd_b - gb) <= 1e-6 * max(1.0, abs(fd_b), abs(gb))


def _check_decide_table() -> bool:
    from .strategy import Action, decide

    table = {(True, False): Action.LONG, (False, True): Action.SHORT,
             (False, False): Action.NO_OPINION, (True, True): Action.CONFLICT}
    return all(decide(u, d) is want for (u, d), want in table.items())


def _check_allocation_balance() -> bool:
    from .strategy import Action, TradeDecision, allocate

    rng = np.random.default_rng(13)
    today = date(2003, 2, 3)
    for _ in range(50):
        decisions = []
        for i in range(rng.integers(0, 12)):
            action = rng.choice(list(Action))
            decisions.append(TradeDecision(f"S{i}", today, action, 385,
                                           action is Action.LONG, action is Action.SHORT))
        port = allocate(decisions)
        total_long = sum(port.long_weights.values())
        total_short = sum(port.short_weights.values())
        if port.is_zero:
            if total_long != 0.0 or total_short != 0.0:
                return False
        elif abs(total_long - 0.5) > 1e-12 or abs(total_short - 0.5) > 1e-12:
            return False
    return True


def _check_observation_anchor() -> bool:
    from .dataset import day_observations, universe_mean_returns

    rng = np.random.default_rng(14)
    closes = 100.0 * np.exp(np.cumsum(rng.normal(0, 1e-3, (6, 30)), axis=1))
    mean_returns = universe_mean_returns(closes)
    for end_x in (-5, -10):
        obs = day_observations(closes, mean_returns, end_x)
        if (obs[:, -1] != 0.0).any():
            return False
    return True


def _check_softmax_rows() -> bool:
    from .learners import nn_forward, nn_init_params

    rng = np.random.default_rng(15)
    params = nn_init_params(7, (4, 3), 15)
    probs, _, _ = nn_forward(params, rng.standard_normal((20, 7)))
    return bool(np.abs(probs.sum(axis=1) - 1.0).max() < 1e-9)


def _cmd_selfcheck(_args) -> int:
    checks = [
        ("nn_gradient_finite_difference", _check_nn_gradient),
        ("logistic_gradient_finite_difference", _check_logistic_gradient),
        ("decide_truth_table", _check_decide_table),
        ("allocation_balance", _check_allocation_balance),
        ("observation_zero_anchor", _check_observation_anchor),
        ("softmax_normalization", _check_softmax_rows),
    ]
    failed = 0
    for name, fn in checks:
        ok = fn()
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        if not ok:
            failed += 1
    return EXIT_OK if failed == 0 else EXIT_CHECK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    handlers = {
        "ingest": _cmd_ingest,
        "bars": _cmd_bars,
        "universe": _cmd_universe,
        "synth": _cmd_synth,
        "run": _cmd_run,
        "report": _cmd_report,
        "selfcheck": _cmd_selfcheck,
    }
    try:
        return handlers[args.command](args)
    except (DataError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

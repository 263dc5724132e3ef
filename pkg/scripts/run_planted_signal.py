#!/usr/bin/env python3
"""Inefficient-market positive control.

Plants cross-sectional intraday momentum (symbols whose universe-relative
strength through minute 360 clears a trigger keep drifting into the close by
20 bps on average, ~10% of symbol-days marked) and runs the full pipeline.
The gradient-trained learners should find the pattern and print trade
precision well above 0.5 with positive cumulative returns; the random control
stays flat.

Usage: python scripts/run_planted_signal.py --out runs/signal [--seed 11]
"""

import argparse
import sys
from pathlib import Path

from effmeter.cli import main as effmeter_main

SYNTH = """n_symbols = 60
start_month = 2001-01
months = 31
seed = {seed}
idio_vol_bps = 4
market_vol_bps = 10
regime = 2001-01-01:2003-07-31,20,360,0.10
"""

EXPERIMENT = """store = {store}
start_month = 2001-01
end_month = 2003-07
learners = neural,logistic,random
universe_size = 40
seed = {seed}
split_date = 2003-07-31
"""


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/signal")
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    store = out / "bars"
    (out / "synth.conf").write_text(SYNTH.format(seed=args.seed))
    (out / "experiment.conf").write_text(
        EXPERIMENT.format(store=store, seed=args.seed))
    rc = effmeter_main(["synth", "--config", str(out / "synth.conf"),
                        "--store", str(store), "--describe"])
    if rc != 0:
        return rc
    return effmeter_main(["run", "--config", str(out / "experiment.conf"),
                          "--out", str(out / "reports")])


if __name__ == "__main__":
    sys.exit(main())

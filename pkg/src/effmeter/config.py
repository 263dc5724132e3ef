"""Key-value config files for experiments and synthetic markets.

Format: one ``key = value`` per line, ``#`` starts a comment, blank lines
ignored. Keys may repeat only where documented (``regime``). Every constant
that shapes a run lives here and is echoed into the run manifest.

Experiment keys (defaults in parentheses):

    store                 bar store directory (required unless given on the CLI)
    start_month           experiment start, YYYY-MM (required)
    end_month             last test month, YYYY-MM (required)
    learners              comma list of neural,logistic,random (all three)
    universe_size         top-N universe (500)
    universe_window_months  trailing window (12)
    universe_mode         rolling | fixed (rolling)
    split_date            early/late boundary, YYYY-MM-DD (2008-09-30)
    seed                  master seed (0)
    cost_bps_per_side     flat cost per traded side in bps (0)
    pnl_relative          true/false: P&L on universe-relative returns (false)
    validation_pooled     true/false: pool validation trades instead of
                          averaging daily precisions (false)
    workers               worker processes for grid training (1)
    adam.step_size (1e-3) adam.beta1 (0.9) adam.beta2 (0.999) adam.epsilon (1e-8)
    nn.batch_size (256) nn.max_epochs (200) nn.patience (5) nn.min_delta (1e-4)
    logistic.l2_lambda (1e-3) logistic.max_iters (250) logistic.grad_tol (1e-6)
    train.dtype           float32 | float64 (float32)

Synth keys:

    n_symbols, start_month, months, seed      (required)
    idio_vol_bps (8) market_vol_bps (10)
    base_price_low (20) base_price_high (180)
    base_volume_low (200) base_volume_high (2000) volume_sigma (0.6)
    regime = START:END,STRENGTH_BPS,WINDOW,MARKED_FRACTION[,DRIFT_START]
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from datetime import date
from pathlib import Path

from .errors import ConfigError
from .learners import KINDS, TrainConfig
from .synth import Regime, SynthConfig
from .tradingcal import Month

logger = logging.getLogger(__name__)

DEFAULT_SPLIT_DATE = date(2008, 9, 30)


def parse_kv_file(path) -> list[tuple[int, str, str]]:
    """(line_number, key, value) triples, comments and blanks stripped."""
    out = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out.append((lineno, key.strip(), value.strip()))
    return out


def _parse_bool(value: str, ctx: str) -> bool:
    v = value.lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{ctx}: expected true/false, got {value!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    start_month: Month
    end_month: Month
    store: str = ""
    learners: tuple[str, ...] = KINDS
    universe_size: int = 500
    universe_window_months: int = 12
    universe_mode: str = "rolling"
    split_date: date = DEFAULT_SPLIT_DATE
    seed: int = 0
    cost_bps_per_side: float = 0.0
    pnl_relative: bool = False
    validation_pooled: bool = False
    workers: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> dict:
        d = {
            "start_month": str(self.start_month),
            "end_month": str(self.end_month),
            "store": self.store,
            "learners": ",".join(self.learners),
            "universe_size": self.universe_size,
            "universe_window_months": self.universe_window_months,
            "universe_mode": self.universe_mode,
            "split_date": self.split_date.isoformat(),
            "seed": self.seed,
            "cost_bps_per_side": self.cost_bps_per_side,
            "pnl_relative": self.pnl_relative,
            "validation_pooled": self.validation_pooled,
            "workers": self.workers,
        }
        for f in fields(TrainConfig):
            v = getattr(self.train, f.name)
            d[f"train.{f.name}"] = list(v) if isinstance(v, tuple) else v
        return d


_TRAIN_KEYS = {
    "adam.step_size": ("step_size", float),
    "adam.beta1": ("beta1", float),
    "adam.beta2": ("beta2", float),
    "adam.epsilon": ("epsilon", float),
    "nn.batch_size": ("batch_size", int),
    "nn.max_epochs": ("max_epochs", int),
    "nn.patience": ("patience", int),
    "nn.min_delta": ("min_delta", float),
    "logistic.l2_lambda": ("l2_lambda", float),
    "logistic.max_iters": ("logistic_max_iters", int),
    "logistic.grad_tol": ("logistic_grad_tol", float),
    "train.dtype": ("train_dtype", str),
}


def load_experiment_config(path, overrides: dict | None = None) -> ExperimentConfig:
    entries = parse_kv_file(path)
    plain: dict[str, str] = {}
    train_kwargs: dict = {}
    for lineno, key, value in entries:
        ctx = f"{path}:{lineno}: {key}"
        if key in _TRAIN_KEYS:
            name, cast = _TRAIN_KEYS[key]
            try:
                train_kwargs[name] = cast(value)
            except ValueError as exc:
                raise ConfigError(f"{ctx}: {exc}") from exc
            continue
        if key in plain:
            raise ConfigError(f"{ctx}: duplicate key")
        plain[key] = value
    if overrides:
        plain.update({k: v for k, v in overrides.items() if v is not None})

    def need(key: str) -> str:
        if key not in plain:
            raise ConfigError(f"{path}: missing required key {key!r}")
        return plain[key]

    try:
        start_month = Month.parse(need("start_month"))
        end_month = Month.parse(need("end_month"))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    learners = tuple(s.strip() for s in plain.get("learners", ",".join(KINDS)).split(",")
                     if s.strip())
    for kind in learners:
        if kind not in KINDS:
            raise ConfigError(f"{path}: unknown learner {kind!r} "
                              f"(expected one of {', '.join(KINDS)})")
    if "split_date" in plain:
        try:
            split = date.fromisoformat(plain["split_date"])
        except ValueError as exc:
            raise ConfigError(f"{path}: split_date: {exc}") from exc
    else:
        split = DEFAULT_SPLIT_DATE
        logger.info("split_date not set; defaulting to %s", split.isoformat())
    mode = plain.get("universe_mode", "rolling")
    if mode not in ("rolling", "fixed"):
        raise ConfigError(f"{path}: universe_mode must be rolling or fixed, got {mode!r}")
    try:
        cfg = ExperimentConfig(
            start_month=start_month,
            end_month=end_month,
            store=plain.get("store", ""),
            learners=learners,
            universe_size=int(plain.get("universe_size", 500)),
            universe_window_months=int(plain.get("universe_window_months", 12)),
            universe_mode=mode,
            split_date=split,
            seed=int(plain.get("seed", 0)),
            cost_bps_per_side=float(plain.get("cost_bps_per_side", 0.0)),
            pnl_relative=_parse_bool(plain["pnl_relative"], "pnl_relative")
            if "pnl_relative" in plain else False,
            validation_pooled=_parse_bool(plain["validation_pooled"], "validation_pooled")
            if "validation_pooled" in plain else False,
            workers=int(plain.get("workers", 1)),
            train=TrainConfig(**train_kwargs),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if cfg.end_month.diff(cfg.start_month) < 25:
        raise ConfigError(f"{path}: end_month must be at least 25 months after "
                          f"start_month (first possible test month is "
                          f"{cfg.start_month.add(25)})")
    return cfg


def _parse_regime(value: str, ctx: str) -> Regime:
    parts = [p.strip() for p in value.split(",")]
    if len(parts) not in (4, 5):
        raise ConfigError(f"{ctx}: expected START:END,STRENGTH,WINDOW,FRACTION"
                          f"[,DRIFT_START], got {value!r}")
    try:
        start_s, end_s = parts[0].split(":")
        kwargs = dict(start=date.fromisoformat(start_s), end=date.fromisoformat(end_s),
                      strength_bps=float(parts[1]), signal_window=int(parts[2]),
                      marked_fraction=float(parts[3]))
        if len(parts) == 5:
            kwargs["drift_start"] = int(parts[4])
        return Regime(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{ctx}: {exc}") from exc


def load_synth_config(path) -> SynthConfig:
    entries = parse_kv_file(path)
    plain: dict[str, str] = {}
    regimes: list[Regime] = []
    for lineno, key, value in entries:
        ctx = f"{path}:{lineno}: {key}"
        if key == "regime":
            regimes.append(_parse_regime(value, ctx))
            continue
        if key in plain:
            raise ConfigError(f"{ctx}: duplicate key")
        plain[key] = value

    def need(key: str) -> str:
        if key not in plain:
            raise ConfigError(f"{path}: missing required key {key!r}")
        return plain[key]

    try:
        return SynthConfig(
            n_symbols=int(need("n_symbols")),
            start_month=Month.parse(need("start_month")),
            n_months=int(need("months")),
            seed=int(need("seed")),
            idio_vol_bps=float(plain.get("idio_vol_bps", 8.0)),
            market_vol_bps=float(plain.get("market_vol_bps", 10.0)),
            base_price_range=(float(plain.get("base_price_low", 20.0)),
                              float(plain.get("base_price_high", 180.0))),
            base_volume_range=(float(plain.get("base_volume_low", 200.0)),
                               float(plain.get("base_volume_high", 2000.0))),
            volume_sigma=float(plain.get("volume_sigma", 0.6)),
            regimes=tuple(regimes),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

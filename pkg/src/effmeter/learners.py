"""Reference classifiers trained from scratch.

Three learners share one train/predict surface so the walk-forward driver is
learner-agnostic:

* neural: feedforward net, two ReLU hidden layers (180, 20), two softmax
  outputs, mini-batch Adam on categorical cross-entropy, early stopping
  against validation loss.
* logistic: binomial logistic regression with an L2 penalty on the weights
  (bias unpenalized), full-batch Adam until the gradient norm is tiny.
* random: positive with the training positive-class rate, from a seeded
  generator keyed to the query batch so prediction is pure.

Gradient-trained learners standardize inputs on the training set (stored in
the model); observation entries are return-scale (~1e-3) and the fixed Adam
step would otherwise barely move the weights. Training math runs in a
configurable dtype (float32 default, for speed); parameters and predictions
are float64.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, SingleClassError

KIND_NEURAL = "neural"
KIND_LOGISTIC = "logistic"
KIND_RANDOM = "random"
KINDS = (KIND_NEURAL, KIND_LOGISTIC, KIND_RANDOM)

HIDDEN_SIZES = (180, 20)


@dataclass(frozen=True)
class TrainConfig:
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 256
    max_epochs: int = 200
    patience: int = 5
    min_delta: float = 1e-4
    hidden_sizes: tuple[int, ...] = HIDDEN_SIZES
    l2_lambda: float = 1e-3
    logistic_max_iters: int = 250
    logistic_grad_tol: float = 1e-6
    train_dtype: str = "float32"


# ---------------------------------------------------------------------------
# Adam

class AdamState:
    """Per-parameter first/second moment accumulators plus a step count."""

    def __init__(self, params: list[np.ndarray]):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray],
             cfg: TrainConfig) -> None:
        self.t += 1
        b1, b2 = cfg.beta1, cfg.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= cfg.step_size * (m / c1) / (np.sqrt(v / c2) + cfg.epsilon)


# ---------------------------------------------------------------------------
# Feedforward network

def nn_init_params(input_size: int, hidden_sizes: tuple[int, ...], seed: int,
                   dtype=np.float64) -> list[np.ndarray]:
    """Fan-in scaled uniform weights, zero biases: W ~ U(+-1/sqrt(fan_in))."""
    rng = np.random.default_rng(seed)
    sizes = (input_size, *hidden_sizes, 2)
    params: list[np.ndarray] = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = 1.0 / np.sqrt(fan_in)
        params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype))
        params.append(np.zeros(fan_out, dtype=dtype))
    return params


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def nn_forward(params: list[np.ndarray], x: np.ndarray):
    """Probabilities plus the per-layer caches backprop needs."""
    acts = [x]
    pre = []
    a = x
    n_layers = len(params) // 2
    for i in range(n_layers):
        w, b = params[2 * i], params[2 * i + 1]
        z = a @ w + b
        pre.append(z)
        a = np.maximum(z, 0.0) if i < n_layers - 1 else z
        acts.append(a)
    probs = _softmax(acts[-1])
    return probs, pre, acts


def nn_loss(params: list[np.ndarray], x: np.ndarray, y_onehot: np.ndarray) -> float:
    probs, _, _ = nn_forward(params, x)
    eps = np.finfo(probs.dtype).tiny
    return float(-(y_onehot * np.log(probs + eps)).sum(axis=1).mean())


def nn_gradient(params: list[np.ndarray], x: np.ndarray,
                y_onehot: np.ndarray) -> list[np.ndarray]:
    """Backpropagation gradient of the mean categorical cross-entropy."""
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    probs, pre, acts = nn_forward(params, x)
    if not np.isfinite(probs).all():
        raise DivergenceError("non-finite activations in forward pass")
    n_layers = len(params) // 2
    grads: list[np.ndarray] = [None] * len(params)
    delta = (probs - y_onehot) / n
    for i in range(n_layers - 1, -1, -1):
        grads[2 * i] = acts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params[2 * i].T) * (pre[i - 1] > 0)
    return grads


def _one_hot(y: np.ndarray, dtype) -> np.ndarray:
    out = np.zeros((y.shape[0], 2), dtype=dtype)
    out[np.arange(y.shape[0]), y.astype(np.int64)] = 1.0
    return out


def _fit_scaler(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    return mean, scale


@dataclass
class NeuralModel:
    kind = KIND_NEURAL
    params: list[np.ndarray]
    mean: np.ndarray
    scale: np.ndarray
    direction: str = ""
    end_x: int = 0
    bps_threshold: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def input_size(self) -> int:
        return self.params[0].shape[0]

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1] != self.input_size:
            raise ValueError(f"observation width {x.shape[1]} != model input "
                             f"size {self.input_size}")
        z = (x - self.mean) / self.scale
        probs, _, _ = nn_forward(self.params, z)
        return probs

    def predict(self, x: np.ndarray) -> np.ndarray:
        probs = self.predict_proba(x)
        return (probs[:, 1] > probs[:, 0]).astype(np.int8)


def nn_train(train_x: np.ndarray, train_y: np.ndarray, val_x: np.ndarray,
             val_y: np.ndarray, seed: int, cfg: TrainConfig | None = None) -> NeuralModel:
    """Mini-batch Adam with early stopping on validation cross-entropy.

    Stops once the validation loss has failed to improve on the best epoch by
    `min_delta` for `patience` consecutive epochs; returns the parameters of
    the best validation epoch.
    """
    cfg = cfg or TrainConfig()
    if train_x.shape[0] == 0 or val_x.shape[0] == 0:
        raise ValueError("empty training or validation set")
    classes = np.unique(train_y)
    if classes.size < 2:
        raise SingleClassError(f"training labels all {classes[0] if classes.size else '?'}")
    dtype = np.dtype(cfg.train_dtype)
    mean64, scale64 = _fit_scaler(np.asarray(train_x, dtype=np.float64))
    x = ((train_x - mean64) / scale64).astype(dtype)
    y1 = _one_hot(np.asarray(train_y), dtype)
    xv = ((val_x - mean64) / scale64).astype(dtype)
    yv1 = _one_hot(np.asarray(val_y), dtype)

    params = nn_init_params(x.shape[1], cfg.hidden_sizes, seed, dtype)
    opt = AdamState(params)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    n = x.shape[0]
    best_loss = np.inf
    best_params = [p.copy() for p in params]
    best_epoch = 0
    bad_epochs = 0
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            sel = order[lo:lo + cfg.batch_size]
            grads = nn_gradient(params, x[sel], y1[sel])
            opt.step(params, grads, cfg)
        val_loss = nn_loss(params, xv, yv1)
        if not np.isfinite(val_loss):
            raise DivergenceError(f"validation loss non-finite at epoch {epoch}")
        if val_loss < best_loss - cfg.min_delta:
            best_loss = val_loss
            best_params = [p.copy() for p in params]
            best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break
    return NeuralModel(params=[p.astype(np.float64) for p in best_params],
                       mean=mean64, scale=scale64, seed=seed,
                       meta={"epochs_run": epoch, "best_epoch": best_epoch,
                             "final_val_loss": float(best_loss)})


# ---------------------------------------------------------------------------
# Logistic regression

def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss(w: np.ndarray, b: float, x: np.ndarray, y: np.ndarray,
                  l2_lambda: float) -> float:
    """Mean negative log-likelihood plus l2_lambda * ||w||^2 (bias exempt)."""
    z = x @ w + b
    # log(1 + exp(-|z|)) formulation is stable for both signs
    nll = np.logaddexp(0.0, -z) * y + np.logaddexp(0.0, z) * (1.0 - y)
    return float(nll.mean() + l2_lambda * float(w @ w))


def logistic_gradient(w: np.ndarray, b: float, x: np.ndarray, y: np.ndarray,
                      l2_lambda: float) -> tuple[np.ndarray, float]:
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    r = _sigmoid(x @ w + b) - y
    gw = x.T @ r / n + 2.0 * l2_lambda * w
    gb = float(r.mean())
    return gw, gb


@dataclass
class LogisticModel:
    kind = KIND_LOGISTIC
    w: np.ndarray
    b: float
    mean: np.ndarray
    scale: np.ndarray
    direction: str = ""
    end_x: int = 0
    bps_threshold: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def input_size(self) -> int:
        return self.w.shape[0]

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1] != self.input_size:
            raise ValueError(f"observation width {x.shape[1]} != model input "
                             f"size {self.input_size}")
        p = _sigmoid((x - self.mean) / self.scale @ self.w + self.b)
        return np.column_stack([1.0 - p, p])

    def predict(self, x: np.ndarray) -> np.ndarray:
        return (self.predict_proba(x)[:, 1] > 0.5).astype(np.int8)


def logistic_train(train_x: np.ndarray, train_y: np.ndarray, seed: int,
                   cfg: TrainConfig | None = None) -> LogisticModel:
    """Full-batch Adam on the penalized negative log-likelihood."""
    cfg = cfg or TrainConfig()
    if train_x.shape[0] == 0:
        raise ValueError("empty training set")
    classes = np.unique(train_y)
    if classes.size < 2:
        raise SingleClassError(f"training labels all {classes[0] if classes.size else '?'}")
    dtype = np.dtype(cfg.train_dtype)
    mean64, scale64 = _fit_scaler(np.asarray(train_x, dtype=np.float64))
    x = ((train_x - mean64) / scale64).astype(dtype)
    y = np.asarray(train_y, dtype=dtype)
    w = np.zeros(x.shape[1], dtype=dtype)
    b = np.zeros(1, dtype=dtype)
    opt = AdamState([w, b])
    iters = 0
    for iters in range(1, cfg.logistic_max_iters + 1):
        gw, gb = logistic_gradient(w, float(b[0]), x, y, cfg.l2_lambda)
        gnorm = float(np.sqrt(gw @ gw + gb * gb))
        if not np.isfinite(gnorm):
            raise DivergenceError(f"non-finite gradient at iteration {iters}")
        if gnorm < cfg.logistic_grad_tol:
            break
        opt.step([w, b], [gw.astype(dtype), np.array([gb], dtype=dtype)], cfg)
    return LogisticModel(w=w.astype(np.float64), b=float(b[0]), mean=mean64,
                         scale=scale64, seed=seed,
                         meta={"iterations": iters})


# ---------------------------------------------------------------------------
# Random control

@dataclass
class RandomModel:
    kind = KIND_RANDOM
    p: float
    direction: str = ""
    end_x: int = 0
    bps_threshold: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        pos = self.predict(x).astype(np.float64)
        return np.column_stack([1.0 - pos, pos])

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Bernoulli(p) per row, from a sub-seed keyed to the batch content.

        Repeated calls on the same batch return the same predictions;
        distinct batches draw fresh, deterministic randomness.
        """
        x = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
        digest = hashlib.blake2b(x.tobytes(), digest_size=8,
                                 key=struct.pack("<q", self.seed)).digest()
        sub = struct.unpack("<Q", digest)[0]
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, sub]))
        return (rng.random(x.shape[0]) < self.p).astype(np.int8)


def random_train(train_y: np.ndarray, seed: int) -> RandomModel:
    y = np.asarray(train_y)
    if y.shape[0] == 0:
        raise ValueError("empty training set")
    return RandomModel(p=float(y.mean()), seed=seed, meta={"n_train": int(y.shape[0])})


@dataclass
class NoTradeModel:
    """Fallback when a training set is single-class: never predicts positive."""

    kind = "notrade"
    direction: str = ""
    end_x: int = 0
    bps_threshold: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(np.asarray(x).shape[0], dtype=np.int8)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        n = np.asarray(x).shape[0]
        return np.column_stack([np.ones(n), np.zeros(n)])


# ---------------------------------------------------------------------------
# Model files

_MODEL_MAGIC = b"MODL"
_KIND_CODES = {KIND_NEURAL: 0, KIND_LOGISTIC: 1, KIND_RANDOM: 2, "notrade": 3}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}
_MODEL_HEADER = struct.Struct("<4sBBBhHqIIdB")


def _model_arrays(model) -> list[np.ndarray]:
    if model.kind == KIND_NEURAL:
        return [*model.params, model.mean, model.scale]
    if model.kind == KIND_LOGISTIC:
        return [model.w, np.array([model.b]), model.mean, model.scale]
    if model.kind == KIND_RANDOM:
        return [np.array([model.p])]
    return []


def save_model(path, model) -> None:
    """Versioned binary model file; round-trips exactly (float64 payloads)."""
    arrays = _model_arrays(model)
    meta = model.meta or {}
    direction_code = {"": 0, "up": 0, "down": 1}[model.direction]
    header = _MODEL_HEADER.pack(
        _MODEL_MAGIC, 1, _KIND_CODES[model.kind], direction_code,
        model.end_x, model.bps_threshold, model.seed,
        int(meta.get("epochs_run", meta.get("iterations", 0))),
        int(meta.get("best_epoch", 0)),
        float(meta.get("final_val_loss", float("nan"))),
        len(arrays))
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in arrays:
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_model(path):
    blob = open(path, "rb").read()
    (magic, _version, kind_code, direction_code, end_x, bps, seed,
     epochs, best_epoch, val_loss, n_arrays) = _MODEL_HEADER.unpack_from(blob)
    if magic != _MODEL_MAGIC:
        raise ValueError(f"not a model file: {path}")
    off = _MODEL_HEADER.size
    arrays = []
    for _ in range(n_arrays):
        ndim = struct.unpack_from("<B", blob, off)[0]
        off += 1
        shape = struct.unpack_from(f"<{ndim}I", blob, off)
        off += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off
                            ).reshape(shape).copy()
        off += count * 8
        arrays.append(arr)
    kind = _KIND_NAMES[kind_code]
    direction = "down" if direction_code == 1 else "up"
    common = dict(direction=direction, end_x=end_x, bps_threshold=bps, seed=seed)
    if kind == KIND_NEURAL:
        meta = {"epochs_run": epochs, "best_epoch": best_epoch, "final_val_loss": val_loss}
        return NeuralModel(params=arrays[:-2], mean=arrays[-2], scale=arrays[-1],
                           meta=meta, **common)
    if kind == KIND_LOGISTIC:
        return LogisticModel(w=arrays[0], b=float(arrays[1][0]), mean=arrays[2],
                             scale=arrays[3], meta={"iterations": epochs}, **common)
    if kind == KIND_RANDOM:
        return RandomModel(p=float(arrays[0][0]), meta={}, **common)
    return NoTradeModel(**common)

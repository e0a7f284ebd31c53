"""Feed-forward ReLU classifier with softmax output, written directly in numpy."""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ARCHITECTURES",
    "MlpModel",
    "TrainConfig",
    "TrainReport",
    "DivergenceError",
    "ModelFormatError",
    "layer_sizes_for",
    "init_mlp",
    "softmax",
    "forward",
    "logits",
    "loss",
    "grad",
    "train",
    "predict",
    "save_model",
    "load_model",
]

PROB_FLOOR = 1e-12
ARCHITECTURES = {"lp": (), "nn1": (5,), "nn5": (30, 30, 30, 30, 30)}
MODEL_MAGIC = b"DPHM"


class DivergenceError(FloatingPointError):
    pass


class ModelFormatError(ValueError):
    pass


def layer_sizes_for(arch: str, n_classes: int, n_in: int = 8) -> tuple[int, ...]:
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch!r}; choose from {sorted(ARCHITECTURES)}")
    return (n_in, *ARCHITECTURES[arch], n_classes)


@dataclass
class MlpModel:
    """Weights ``W[i]`` have shape (size[i+1], size[i]); hidden layers use ReLU."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("number of parameter arrays does not match layer_sizes")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_sizes[i + 1], self.layer_sizes[i])
            if w.shape != want or b.shape != (want[0],):
                raise ValueError(f"layer {i}: got W{w.shape}, b{b.shape}, expected W{want}")

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MlpModel":
        return MlpModel(self.layer_sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def all_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params())


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 300
    max_epochs: int = 100
    early_stop_patience: int = 1
    learning_rate: float = 1e-3
    l1_coeff: float = 0.0
    optimizer: str = "adam"
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.early_stop_patience < 0:
            raise ValueError("early_stop_patience must be >= 0")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.l1_coeff < 0:
            raise ValueError("l1_coeff must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0

    def to_json(self) -> dict:
        return asdict(self)


def init_mlp(layer_sizes, rng: np.random.Generator) -> MlpModel:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or min(sizes) < 1:
        raise ValueError(f"invalid layer sizes {sizes}")
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
        biases.append(np.zeros(n_out))
    return MlpModel(sizes, weights, biases)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_trace(model: MlpModel, x: np.ndarray):
    acts = [x]
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w.T + b
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def logits(model: MlpModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return _forward_trace(model, np.atleast_2d(x))[-1].reshape(*x.shape[:-1], model.n_classes)


def forward(model: MlpModel, x) -> np.ndarray:
    """Class probabilities for one input (8,) or a batch (n, 8)."""
    x = np.asarray(x, dtype=float)
    if not np.isfinite(x).all():
        raise DivergenceError("non-finite input")
    p = softmax(logits(model, x))
    if not np.isfinite(p).all():
        raise DivergenceError("non-finite output; model parameters have diverged")
    return p


def _check_labels(model, y):
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("empty batch")
    if y.min() < 0 or y.max() >= model.n_classes:
        raise ValueError(f"label out of range [0, {model.n_classes})")
    return y


def _l1(model):
    return sum(float(np.abs(w).sum()) for w in model.weights)


def loss(model: MlpModel, x, y, l1_coeff: float = 0.0) -> float:
    """Mean categorical cross-entropy plus ``l1_coeff * sum|W|`` (biases excluded)."""
    y = _check_labels(model, y)
    p = forward(model, np.atleast_2d(x))
    ce = -np.log(np.maximum(p[np.arange(len(y)), y], PROB_FLOOR)).mean()
    return float(ce + l1_coeff * _l1(model)) if l1_coeff else float(ce)


def grad(model: MlpModel, x, y, l1_coeff: float = 0.0) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Exact gradients of :func:`loss` by backpropagation.

    Returns ``(dW, db)`` lists aligned with ``model.weights``/``model.biases``.
    ReLU and |w| both use subgradient 0 at 0.
    """
    y = _check_labels(model, y)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = len(y)
    acts = _forward_trace(model, x)
    p = softmax(acts[-1])
    # the floor makes the loss flat where the true-class probability is below it
    floored = p[np.arange(n), y] < PROB_FLOOR
    delta = p
    delta[np.arange(n), y] -= 1.0
    delta[floored] = 0.0
    delta /= n
    dws = [None] * len(model.weights)
    dbs = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        dws[i] = delta.T @ acts[i]
        dbs[i] = delta.sum(axis=0)
        if l1_coeff:
            dws[i] += l1_coeff * np.sign(model.weights[i])
        if i:
            delta = (delta @ model.weights[i]) * (acts[i] > 0)
    return dws, dbs


def predict(model: MlpModel, x) -> np.ndarray | int:
    """Most probable class; ties resolve to the lowest index."""
    z = logits(model, x)
    out = np.argmax(z, axis=-1)
    return int(out) if np.ndim(out) == 0 else out


def accuracy(model: MlpModel, x, y) -> float:
    return float(np.mean(predict(model, x) == np.asarray(y)))


class _Adam:
    def __init__(self, params, cfg: TrainConfig):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        c = self.cfg
        self.t += 1
        lr = c.learning_rate * np.sqrt(1 - c.beta2**self.t) / (1 - c.beta1**self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            p -= lr * m / (np.sqrt(v) + c.eps)


class _Sgd:
    def __init__(self, params, cfg: TrainConfig):
        self.lr = cfg.learning_rate

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


def train(model: MlpModel, x_train, y_train, x_val, y_val, cfg: TrainConfig | None = None):
    """Mini-batch training with early stopping on validation loss.

    Each epoch visits the training set in a fresh random order; the final
    partial batch is kept. Training stops once the validation loss has not
    improved for ``cfg.early_stop_patience`` consecutive epochs, and the
    parameters of the best validation epoch are returned.

    Returns:
        ``(model, report)``; the input model is not modified.
    """
    cfg = cfg or TrainConfig()
    x_train = np.asarray(x_train, dtype=float)
    x_val = np.asarray(x_val, dtype=float)
    y_train = _check_labels(model, y_train)
    y_val = _check_labels(model, y_val)
    model = model.copy()
    params = model.params()
    opt = (_Adam if cfg.optimizer == "adam" else _Sgd)(params, cfg)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x7A1]))
    report = TrainReport()
    best, best_params, wait = np.inf, [p.copy() for p in params], 0
    n = len(y_train)
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            dws, dbs = grad(model, x_train[idx], y_train[idx], cfg.l1_coeff)
            grads = [g for pair in zip(dws, dbs) for g in pair]
            opt.step(params, grads)
        if not model.all_finite():
            raise DivergenceError(f"parameters became non-finite in epoch {epoch}")
        tl = loss(model, x_train, y_train, cfg.l1_coeff)
        vl = loss(model, x_val, y_val, cfg.l1_coeff)
        if not (np.isfinite(tl) and np.isfinite(vl)):
            raise DivergenceError(f"loss became non-finite in epoch {epoch}")
        report.train_loss.append(tl)
        report.val_loss.append(vl)
        report.train_accuracy.append(accuracy(model, x_train, y_train))
        report.val_accuracy.append(accuracy(model, x_val, y_val))
        report.stopped_epoch = epoch
        if vl < best:
            best, wait = vl, 0
            report.best_epoch = epoch
            best_params = [p.copy() for p in params]
        else:
            wait += 1
            if wait >= cfg.early_stop_patience:
                break
    for p, bp in zip(params, best_params):
        p[...] = bp
    return model, report


def save_model(model: MlpModel, path, *, config: TrainConfig | None = None, extra: dict | None = None) -> Path:
    """Length-prefixed JSON header followed by float64 little-endian parameters."""
    path = Path(path)
    payload = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in model.params())
    header = {
        "layer_sizes": list(model.layer_sizes),
        "config": asdict(config) if config else None,
        "seed": config.seed if config else None,
        "crc32": zlib.crc32(payload),
        "n_bytes": len(payload),
        **(extra or {}),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(MODEL_MAGIC + struct.pack("<I", len(blob)) + blob + payload)
    return path


def load_model(path) -> tuple[MlpModel, dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != MODEL_MAGIC or len(raw) < 8:
        raise ModelFormatError(f"{path}: not a model file")
    (n_blob,) = struct.unpack("<I", raw[4:8])
    try:
        header = json.loads(raw[8 : 8 + n_blob].decode("utf-8"))
        sizes = tuple(header["layer_sizes"])
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: unreadable header ({exc})") from exc
    payload = raw[8 + n_blob :]
    if len(payload) != header.get("n_bytes") or zlib.crc32(payload) != header.get("crc32"):
        raise ModelFormatError(f"{path}: payload truncated or corrupted")
    flat = np.frombuffer(payload, dtype="<f8")
    weights, biases, pos = [], [], 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        weights.append(flat[pos : pos + n_in * n_out].reshape(n_out, n_in).copy())
        pos += n_in * n_out
        biases.append(flat[pos : pos + n_out].copy())
        pos += n_out
    if pos != len(flat):
        raise ModelFormatError(f"{path}: parameter count does not match layer sizes")
    return MlpModel(sizes, weights, biases), header

"""Feed-forward price surrogate written directly on numpy.

Network: 8 standardized inputs -> ELU hidden layers -> one linear output,
trained with Adam in float64. Three training losses are supported:

* ``mse``: squared error on the standardized price;
* ``inv_premium``: price-space squared error weighted by (y + eps)^-alpha;
* ``log_target``: squared error on standardized log(y + eps).
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DivergenceError, DomainError, SchemaVersionError

MODEL_FORMAT = "roughvix-mlp"
MODEL_VERSION = 1
LOSSES = ("mse", "inv_premium", "log_target")
N_FEATURES = 8


# -- building blocks -----------------------------------------------------------

def elu(z, alpha: float = 1.0):
    return np.where(z > 0, z, alpha * np.expm1(np.minimum(z, 0.0)))


def elu_grad(z, alpha: float = 1.0):
    return np.where(z > 0, 1.0, alpha * np.exp(np.minimum(z, 0.0)))


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int = N_FEATURES
    hidden: tuple[int, ...] = (64, 32, 32)
    output_dim: int = 1
    elu_alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if min((self.input_dim, self.output_dim, *self.hidden)) < 1:
            raise DomainError("layer sizes must be positive")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)

    def n_params(self) -> int:
        s = self.sizes
        return sum(a * b + b for a, b in zip(s[:-1], s[1:]))


def init_params(spec: MlpSpec, rng: np.random.Generator) -> list[np.ndarray]:
    """Glorot-uniform weights, zero biases, as a flat list [W1, b1, W2, b2, ...]."""
    params = []
    for fan_in, fan_out in zip(spec.sizes[:-1], spec.sizes[1:]):
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def forward(params, X, elu_alpha: float = 1.0):
    """Network output plus the pre-activations needed for backprop."""
    acts, pre = [X], []
    h = X
    n_layers = len(params) // 2
    for k in range(n_layers):
        z = h @ params[2 * k] + params[2 * k + 1]
        if k < n_layers - 1:
            pre.append(z)
            h = elu(z, elu_alpha)
            acts.append(h)
        else:
            h = z
    return h[:, 0], (acts, pre)


def backward(params, cache, d_out, elu_alpha: float = 1.0):
    """Gradients of a scalar loss given dL/d(output) per sample."""
    acts, pre = cache
    grads = [None] * len(params)
    delta = d_out[:, None]
    for k in range(len(params) // 2 - 1, -1, -1):
        grads[2 * k] = acts[k].T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k:
            delta = (delta @ params[2 * k].T) * elu_grad(pre[k - 1], elu_alpha)
    return grads


# -- scaling -----------------------------------------------------------------

@dataclass(frozen=True)
class ScalerStats:
    x_mean: tuple[float, ...]
    x_std: tuple[float, ...]
    y_mean: float
    y_std: float

    @classmethod
    def fit(cls, X, y) -> "ScalerStats":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        xs = X.std(axis=0)
        # constant columns (e.g. the fixed c) are centred but not rescaled
        xs = np.where(xs > 0, xs, 1.0)
        ys = float(y.std()) or 1.0
        return cls(tuple(map(float, X.mean(axis=0))), tuple(map(float, xs)), float(y.mean()), ys)

    def scale_x(self, X):
        return (np.asarray(X, dtype=float) - np.array(self.x_mean)) / np.array(self.x_std)

    def unscale_x(self, Z):
        return np.asarray(Z) * np.array(self.x_std) + np.array(self.x_mean)

    def scale_y(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_std

    def unscale_y(self, z):
        return np.asarray(z) * self.y_std + self.y_mean


# -- losses ------------------------------------------------------------------

def loss_mse(pred, target) -> float:
    d = np.asarray(pred, dtype=float) - np.asarray(target, dtype=float)
    return float(np.mean(d * d))


def loss_inv_premium(pred, target, alpha: float = 0.5, eps: float = 0.01) -> float:
    """Mean of (y + eps)^-alpha * (pred - y)^2."""
    if not eps > 0 or not 0 <= alpha <= 1:
        raise DomainError("need eps > 0 and alpha in [0, 1]")
    y = np.asarray(target, dtype=float)
    d = np.asarray(pred, dtype=float) - y
    return float(np.mean((y + eps) ** -alpha * d * d))


def loss_log_target(pred, target, eps: float = 0.01) -> float:
    """Mean of (log(pred + eps) - log(y + eps))^2."""
    if not eps > 0:
        raise DomainError("need eps > 0")
    p = np.asarray(pred, dtype=float)
    y = np.asarray(target, dtype=float)
    if np.any(p + eps <= 0) or np.any(y + eps <= 0):
        raise DomainError("log-target loss needs pred + eps > 0 and target + eps > 0")
    d = np.log(p + eps) - np.log(y + eps)
    return float(np.mean(d * d))


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 1024
    max_epochs: int = 2000
    patience: int = 25
    plateau_patience: int = 10
    plateau_factor: float = 0.5
    plateau_threshold: float = 1e-6
    min_lr: float = 1e-6
    loss: str = "mse"
    loss_alpha: float = 0.5
    loss_eps: float = 0.01
    fractions: tuple[float, float, float] = (0.9, 0.05, 0.05)
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    time_budget: float | None = None  # seconds; stop after the current epoch
    spec: MlpSpec = field(default_factory=MlpSpec)

    def __post_init__(self):
        if self.patience < 1 or self.plateau_patience < 1:
            raise DomainError("patience values must be >= 1")
        if not 0 < self.plateau_factor < 1:
            raise DomainError("plateau_factor must lie in (0, 1)")
        if self.loss not in LOSSES:
            raise DomainError(f"loss must be one of {LOSSES}")
        if abs(sum(self.fractions) - 1) > 1e-9 or min(self.fractions) < 0:
            raise DomainError("split fractions must be non-negative and sum to 1")
        if self.batch_size < 1 or self.lr <= 0:
            raise DomainError("batch_size and lr must be positive")


def _target_space(cfg: TrainConfig, y):
    return np.log(y + cfg.loss_eps) if cfg.loss == "log_target" else np.asarray(y, dtype=float)


def _loss_grad(out, t_scaled, y_price, scaler: ScalerStats, cfg: TrainConfig):
    """Loss on network output ``out`` and its derivative per sample."""
    n = len(out)
    if cfg.loss == "inv_premium":
        w = (y_price + cfg.loss_eps) ** -cfg.loss_alpha
        d = scaler.unscale_y(out) - y_price
        return float(np.mean(w * d * d)), 2.0 * w * d * scaler.y_std / n
    d = out - t_scaled
    return float(np.mean(d * d)), 2.0 * d / n


def loss_and_grads(params, X_scaled, t_scaled, y_price, scaler, cfg: TrainConfig):
    out, cache = forward(params, X_scaled, cfg.spec.elu_alpha)
    loss, d_out = _loss_grad(out, t_scaled, y_price, scaler, cfg)
    return loss, backward(params, cache, d_out, cfg.spec.elu_alpha)


# -- model -------------------------------------------------------------------

@dataclass
class SurrogateModel:
    spec: MlpSpec
    params: list[np.ndarray]
    scaler: ScalerStats
    target: str = "price"  # or "log_price"
    target_eps: float = 0.01
    meta: dict = field(default_factory=dict)


def predict(model: SurrogateModel, features):
    """Prices for one 8-vector (returns float) or a batch (returns array)."""
    X = np.asarray(features, dtype=float)
    single = X.ndim == 1
    X2 = X.reshape(1, -1) if single else X
    if X2.ndim != 2 or X2.shape[1] != model.spec.input_dim:
        raise DomainError(f"expected feature rows of length {model.spec.input_dim}, got shape {X.shape}")
    out, _ = forward(model.params, model.scaler.scale_x(X2), model.spec.elu_alpha)
    y = model.scaler.unscale_y(out)
    if model.target == "log_price":
        y = np.exp(y) - model.target_eps
    return float(y[0]) if single else y


def split_dataset(table, fractions=(0.9, 0.05, 0.05), seed: int = 0, cell_cols=(6, 7)):
    """Partition rows into (train, val, test), stratified by (t, K) cell.

    Global sizes are round(N * f) for val and test. Each cell contributes
    floor or ceil of its proportional share, with the extra rows going to
    the cells with the largest fractional remainders.
    """
    table = np.asarray(table, dtype=float)
    if not len(table):
        raise DataError("cannot split an empty table")
    f = np.asarray(fractions, dtype=float)
    if f.shape != (3,) or abs(f.sum() - 1) > 1e-9 or np.any(f < 0):
        raise DomainError("fractions must be three non-negative numbers summing to 1")
    rng = np.random.default_rng(seed)
    keys = np.ascontiguousarray(table[:, list(cell_cols)])
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    cells = [np.flatnonzero(inverse == c) for c in range(inverse.max() + 1)]
    cells = [rng.permutation(idx) for idx in cells]
    sizes = np.array([len(c) for c in cells])
    N = len(table)
    taken = np.zeros(len(cells), dtype=int)
    parts = []
    for frac in f[1:]:
        target = int(round(N * frac))
        ideal = sizes * frac
        alloc = np.minimum(np.floor(ideal).astype(int), sizes - taken)
        order = np.lexsort((rng.random(len(cells)), -(ideal - np.floor(ideal))))
        short = target - alloc.sum()
        for c in order:
            if short <= 0:
                break
            if taken[c] + alloc[c] < sizes[c] and alloc[c] < math.ceil(ideal[c]):
                alloc[c] += 1
                short -= 1
        for c in order:  # only if ceilings alone could not reach the target
            if short <= 0:
                break
            if taken[c] + alloc[c] < sizes[c]:
                alloc[c] += 1
                short -= 1
        parts.append(np.concatenate([cells[c][taken[c] : taken[c] + alloc[c]] for c in range(len(cells))]))
        taken += alloc
    train = np.concatenate([cells[c][taken[c] :] for c in range(len(cells))])
    val, test = parts
    return table[np.sort(train)], table[np.sort(val)], table[np.sort(test)]


def rmse(a, b) -> float:
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return float(np.sqrt(np.mean(d * d)))


def evaluate(model: SurrogateModel, table, tick: float = 0.01) -> dict:
    """Absolute RMSE, relative RMSE and MAPE (the last two over rows priced above one tick)."""
    table = np.asarray(table, dtype=float)
    pred = predict(model, table[:, :N_FEATURES])
    y = table[:, N_FEATURES]
    m = y > tick
    rel = (pred[m] - y[m]) / y[m]
    return {
        "abs_rmse": rmse(pred, y),
        "rel_rmse": float(np.sqrt(np.mean(rel * rel))) if m.any() else float("nan"),
        "mape": float(np.mean(np.abs(rel)) * 100) if m.any() else float("nan"),
        "n": int(len(y)),
    }


def fit(train, val, cfg: TrainConfig = TrainConfig()) -> SurrogateModel:
    """Train with Adam and return the checkpoint with the lowest validation loss.

    The scaler is fitted on ``train`` only. The full training curve is kept
    in ``model.meta["curve"]``.
    """
    train = np.asarray(train, dtype=float)
    val = np.asarray(val, dtype=float)
    if not len(train) or not len(val):
        raise DataError("train and validation splits must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    Xtr, ytr = train[:, :N_FEATURES], train[:, N_FEATURES]
    Xva, yva = val[:, :N_FEATURES], val[:, N_FEATURES]
    if cfg.loss == "log_target" and (np.any(ytr + cfg.loss_eps <= 0) or np.any(yva + cfg.loss_eps <= 0)):
        raise DomainError("log target needs price + eps > 0 on every row")
    ttr, tva = _target_space(cfg, ytr), _target_space(cfg, yva)
    scaler = ScalerStats.fit(Xtr, ttr)
    Ztr, Zva = scaler.scale_x(Xtr), scaler.scale_x(Xva)
    str_, sva = scaler.scale_y(ttr), scaler.scale_y(tva)
    spec = replace_spec_dim(cfg.spec, Xtr.shape[1])
    params = init_params(spec, rng)
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    step, lr = 0, cfg.lr
    best = (math.inf, 0, [p.copy() for p in params])
    since_best = since_plateau = 0
    plateau_ref = math.inf
    curve = []
    target = "log_price" if cfg.loss == "log_target" else "price"
    started = time.monotonic()

    def val_metrics(ps):
        out, _ = forward(ps, Zva, spec.elu_alpha)
        loss, _ = _loss_grad(out, sva, yva, scaler, cfg)
        price = scaler.unscale_y(out)
        if target == "log_price":
            price = np.exp(price) - cfg.loss_eps
        return loss, rmse(price, yva)

    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(Ztr))
        tot = 0.0
        for s in range(0, len(order), cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            loss, grads = loss_and_grads(params, Ztr[idx], str_[idx], ytr[idx], scaler, cfg)
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}")
            tot += loss * len(idx)
            step += 1
            c1 = 1 - cfg.beta1**step
            c2 = 1 - cfg.beta2**step
            for k, g in enumerate(grads):
                m[k] = cfg.beta1 * m[k] + (1 - cfg.beta1) * g
                v[k] = cfg.beta2 * v[k] + (1 - cfg.beta2) * g * g
                params[k] -= lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + cfg.adam_eps)
        vloss, vrmse = val_metrics(params)
        if not math.isfinite(vloss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        curve.append({"epoch": epoch, "train_loss": tot / len(Ztr), "val_loss": vloss, "val_rmse": vrmse, "lr": lr})
        if vloss < best[0]:
            best = (vloss, epoch, [p.copy() for p in params])
            since_best = 0
        else:
            since_best += 1
        if vloss < plateau_ref - cfg.plateau_threshold:
            plateau_ref, since_plateau = vloss, 0
        else:
            since_plateau += 1
            if since_plateau >= cfg.plateau_patience:
                lr = max(cfg.min_lr, lr * cfg.plateau_factor)
                since_plateau = 0
        if since_best >= cfg.patience:
            break
        if cfg.time_budget is not None and time.monotonic() - started > cfg.time_budget:
            break

    meta = {
        "seed": cfg.seed,
        "loss": cfg.loss,
        "epochs_run": epoch,
        "best_epoch": best[1],
        "best_val_loss": best[0],
        "best_val_rmse": curve[best[1] - 1]["val_rmse"],
        "curve": curve,
    }
    return SurrogateModel(spec, best[2], scaler, target, cfg.loss_eps, meta)


def replace_spec_dim(spec: MlpSpec, input_dim: int) -> MlpSpec:
    if spec.input_dim == input_dim:
        return spec
    return MlpSpec(input_dim, spec.hidden, spec.output_dim, spec.elu_alpha)


# -- persistence -------------------------------------------------------------

def save_model(path, model: SurrogateModel) -> None:
    """Self-describing JSON container; floats keep their exact binary value."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "spec": asdict(model.spec),
        "scaler": asdict(model.scaler),
        "target": model.target,
        "target_eps": model.target_eps,
        "layers": [
            {"W": model.params[2 * k].tolist(), "b": model.params[2 * k + 1].tolist()}
            for k in range(len(model.params) // 2)
        ],
        "meta": model.meta,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_model(path) -> SurrogateModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"unreadable model file: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise DataError("not a roughvix model file")
    if doc.get("version") != MODEL_VERSION:
        raise SchemaVersionError(f"unsupported model version {doc.get('version')!r}")
    try:
        spec = MlpSpec(**doc["spec"])
        sc = doc["scaler"]
        scaler = ScalerStats(tuple(sc["x_mean"]), tuple(sc["x_std"]), float(sc["y_mean"]), float(sc["y_std"]))
        params = []
        for layer in doc["layers"]:
            params.append(np.array(layer["W"], dtype=float))
            params.append(np.array(layer["b"], dtype=float))
        sizes = spec.sizes
        for k, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            if params[2 * k].shape != (a, b) or params[2 * k + 1].shape != (b,):
                raise ValueError(f"layer {k} shape mismatch")
        if len(params) != 2 * (len(sizes) - 1):
            raise ValueError("layer count mismatch")
        if not all(np.all(np.isfinite(p)) for p in params):
            raise ValueError("non-finite weights")
        return SurrogateModel(spec, params, scaler, doc["target"], float(doc["target_eps"]), doc.get("meta", {}))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise DataError(f"corrupt model file: {exc}") from None

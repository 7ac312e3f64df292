"""Desk-scale differentiable classifiers: logistic regression and a
two-layer ReLU network, with analytic gradients and a finite-difference
verifier.  Everything is plain numpy; no autodiff framework."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_VERSION = 1


@dataclass
class ModelParams:
    """Parameters of one classifier.

    ``arch`` is "linear" (w, b) or "mlp" (W1, b1, w2, b2 with ReLU hidden
    activations).  Unused arrays stay None.
    """

    arch: str
    w: np.ndarray | None = None
    b: float = 0.0
    W1: np.ndarray | None = None
    b1: np.ndarray | None = None
    w2: np.ndarray | None = None
    b2: float = 0.0

    def arrays(self):
        """(name, array) pairs in declaration order; scalars as 0-d arrays."""
        if self.arch == "linear":
            return [("w", self.w), ("b", np.float64(self.b))]
        return [
            ("W1", self.W1),
            ("b1", self.b1),
            ("w2", self.w2),
            ("b2", np.float64(self.b2)),
        ]

    def copy(self) -> "ModelParams":
        return ModelParams(
            arch=self.arch,
            w=None if self.w is None else self.w.copy(),
            b=self.b,
            W1=None if self.W1 is None else self.W1.copy(),
            b1=None if self.b1 is None else self.b1.copy(),
            w2=None if self.w2 is None else self.w2.copy(),
            b2=self.b2,
        )


@dataclass
class GradientBuffer:
    """Gradient of the weighted loss, shape-matched to its ModelParams."""

    arch: str
    w: np.ndarray | None = None
    b: float = 0.0
    W1: np.ndarray | None = None
    b1: np.ndarray | None = None
    w2: np.ndarray | None = None
    b2: float = 0.0


def init_params(arch: str, dim: int, hidden: int = 16,
                rng: np.random.Generator | None = None) -> ModelParams:
    """Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] initialization."""
    rng = rng if rng is not None else np.random.default_rng(0)
    if arch == "linear":
        bound = 1.0 / np.sqrt(dim)
        return ModelParams(
            arch="linear",
            w=rng.uniform(-bound, bound, size=dim),
            b=float(rng.uniform(-bound, bound)),
        )
    if arch == "mlp":
        bound1 = 1.0 / np.sqrt(dim)
        bound2 = 1.0 / np.sqrt(hidden)
        return ModelParams(
            arch="mlp",
            W1=rng.uniform(-bound1, bound1, size=(hidden, dim)),
            b1=rng.uniform(-bound1, bound1, size=hidden),
            w2=rng.uniform(-bound2, bound2, size=hidden),
            b2=float(rng.uniform(-bound2, bound2)),
        )
    raise ValueError(f"unknown architecture {arch!r}")


def forward(params: ModelParams, features: np.ndarray) -> np.ndarray:
    """Logits for a batch (n, d) or a single feature vector (d,)."""
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if params.arch == "linear":
        if X.shape[1] != params.w.size:
            raise ValueError(f"expected {params.w.size} features, got {X.shape[1]}")
        out = X @ params.w + params.b
    else:
        if X.shape[1] != params.W1.shape[1]:
            raise ValueError(
                f"expected {params.W1.shape[1]} features, got {X.shape[1]}"
            )
        hidden = np.maximum(X @ params.W1.T + params.b1, 0.0)
        out = hidden @ params.w2 + params.b2
    return out[0] if np.asarray(features).ndim == 1 else out


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_loss(logits, labels) -> np.ndarray:
    """Binary cross-entropy, branch-free and overflow-safe; always >= 0."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    # softplus(z) - y*z with softplus(z) = max(z, 0) + log1p(exp(-|z|))
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z))) - y * z


def backward(params: ModelParams, features: np.ndarray, labels: np.ndarray,
             sample_weights: np.ndarray) -> GradientBuffer:
    """Analytic gradient of sum_i w_i * logistic_loss(f(x_i), y_i)."""
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels, dtype=np.float64).ravel()
    w = np.asarray(sample_weights, dtype=np.float64).ravel()
    if X.shape[0] != y.size or X.shape[0] != w.size:
        raise ValueError("features, labels and sample_weights must align")
    if np.any(w < 0):
        raise ValueError("sample weights must be non-negative")
    if params.arch == "linear":
        z = X @ params.w + params.b
        g = w * (_sigmoid(z) - y)
        return GradientBuffer(arch="linear", w=X.T @ g, b=float(g.sum()))
    pre = X @ params.W1.T + params.b1
    act = np.maximum(pre, 0.0)
    z = act @ params.w2 + params.b2
    g = w * (_sigmoid(z) - y)
    d_act = np.outer(g, params.w2) * (pre > 0.0)
    return GradientBuffer(
        arch="mlp",
        W1=d_act.T @ X,
        b1=d_act.sum(axis=0),
        w2=act.T @ g,
        b2=float(g.sum()),
    )


def weighted_loss(params: ModelParams, features, labels, sample_weights) -> float:
    return float(
        np.dot(
            np.asarray(sample_weights, dtype=np.float64).ravel(),
            logistic_loss(forward(params, np.atleast_2d(features)), labels),
        )
    )


def finite_difference_check(params: ModelParams, features, labels,
                            sample_weights, h: float = 1e-5) -> float:
    """Max relative error between central differences and backward()."""
    if h <= 0:
        raise ValueError("h must be positive")
    analytic = backward(params, features, labels, sample_weights)
    worst = 0.0
    for name, arr in params.arrays():
        grad = getattr(analytic, name)
        flat = np.atleast_1d(np.asarray(arr, dtype=np.float64)).ravel()
        grad_flat = np.atleast_1d(np.asarray(grad, dtype=np.float64)).ravel()
        for i in range(flat.size):
            plus = params.copy()
            minus = params.copy()
            _bump(plus, name, i, +h)
            _bump(minus, name, i, -h)
            numeric = (
                weighted_loss(plus, features, labels, sample_weights)
                - weighted_loss(minus, features, labels, sample_weights)
            ) / (2.0 * h)
            denom = max(abs(grad_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(grad_flat[i] - numeric) / denom)
    return worst


def _bump(params: ModelParams, name: str, index: int, delta: float) -> None:
    value = getattr(params, name)
    if np.isscalar(value) or np.ndim(value) == 0:
        setattr(params, name, float(value) + delta)
    else:
        value.ravel()[index] += delta


def apply_gradient(params: ModelParams, velocity: GradientBuffer,
                   grad: GradientBuffer, lr: float, momentum: float,
                   weight_decay: float) -> None:
    """One momentum-SGD step with L2 weight decay, in place."""
    for name, arr in params.arrays():
        g = getattr(grad, name)
        v = getattr(velocity, name)
        scalar = np.ndim(arr) == 0
        theta = float(arr) if scalar else arr
        step = momentum * (0.0 if v is None else v) + g + weight_decay * theta
        setattr(velocity, name, step)
        if scalar:
            setattr(params, name, theta - lr * (step if np.isscalar(step) else float(step)))
        else:
            arr -= lr * step


def save_checkpoint(params: ModelParams, path) -> None:
    """Versioned binary record; round-trips bit-exactly."""
    payload = {"version": np.int64(CHECKPOINT_VERSION), "arch": np.str_(params.arch)}
    for name, arr in params.arrays():
        payload[name] = np.asarray(arr, dtype=np.float64)
    np.savez(path, **payload)


def load_checkpoint(path) -> ModelParams:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        arch = str(data["arch"])
        if arch == "linear":
            return ModelParams(arch="linear", w=data["w"], b=float(data["b"]))
        return ModelParams(
            arch="mlp",
            W1=data["W1"],
            b1=data["b1"],
            w2=data["w2"],
            b2=float(data["b2"]),
        )

"""Small fully-connected network trained with Adam, all in float64 numpy.

The model is a ReLU MLP with an identity output layer. Everything is kept
deliberately explicit (no autograd) so that update semantics are pinned down
and bitwise reproducible for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DivergenceError",
    "MlpModel",
    "AdamState",
    "init_mlp",
    "forward",
    "softmax",
    "softmax_cross_entropy",
    "weighted_batch_grad",
    "adam_step",
    "predict_class",
]


class DivergenceError(RuntimeError):
    """Raised when training produces a non-finite loss or gradient."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


@dataclass
class MlpModel:
    """Weights of a fully-connected ReLU network.

    ``weights[l]`` has shape (fan_in, fan_out); ``biases[l]`` has shape
    (fan_out,). ``layer_dims`` is [d_in, h1, ..., d_out].
    """

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "MlpModel":
        return MlpModel(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def to_dict(self) -> dict:
        return {
            "layer_dims": [int(d) for d in self.layer_dims],
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        dims = [int(x) for x in d["layer_dims"]]
        weights = [np.asarray(w, dtype=np.float64) for w in d["weights"]]
        biases = [np.asarray(b, dtype=np.float64) for b in d["biases"]]
        model = cls(dims, weights, biases)
        _check_shapes(model)
        return model


def _check_shapes(model: MlpModel) -> None:
    dims = model.layer_dims
    if len(model.weights) != len(dims) - 1 or len(model.biases) != len(dims) - 1:
        raise ValueError("layer count does not match layer_dims")
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        if w.shape != (dims[l], dims[l + 1]) or b.shape != (dims[l + 1],):
            raise ValueError(
                f"layer {l}: weight shape {w.shape} / bias shape {b.shape} "
                f"inconsistent with dims {dims[l]}->{dims[l + 1]}"
            )


def init_mlp(layer_dims, seed=0) -> MlpModel:
    """Glorot-uniform initialization: W ~ U(-a, a), a = sqrt(6/(fan_in+fan_out)),
    biases zero. Draws are made layer by layer from one seeded generator."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"layer_dims must list >=2 positive sizes, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(dims, weights, biases)


def _forward_cached(model: MlpModel, x: np.ndarray):
    """Forward pass keeping post-activation values of every layer."""
    acts = [x]
    h = x
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        h = z if l == last else np.maximum(z, 0.0)
        acts.append(h)
    return h, acts


def forward(model: MlpModel, x) -> np.ndarray:
    """Logits for a batch. Accepts (n, d) or a single (d,) row."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.layer_dims[0]:
        raise ValueError(
            f"input has {x.shape[1]} features, model expects {model.layer_dims[0]}"
        )
    logits, _ = _forward_cached(model, x)
    return logits[0] if single else logits


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax along the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _log_sum_exp(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1)
    return m + np.log(np.exp(z - m[..., None]).sum(axis=-1))


def softmax_cross_entropy(logits, y):
    """Cross entropy -log softmax(logits)[y] via the log-sum-exp form.

    ``y`` holds 0-based class column indices. Accepts a single (K,) row with
    scalar ``y`` or an (n, K) batch with ``y`` of shape (n,).
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim == 1:
        yi = int(y)
        if not 0 <= yi < z.shape[0]:
            raise IndexError(f"class index {yi} out of range for {z.shape[0]} classes")
        return float(_log_sum_exp(z) - z[yi])
    yi = np.asarray(y, dtype=np.int64)
    if np.any(yi < 0) or np.any(yi >= z.shape[1]):
        raise IndexError(f"class index out of range for {z.shape[1]} classes")
    return _log_sum_exp(z) - z[np.arange(z.shape[0]), yi]


def weighted_batch_grad(model: MlpModel, x: np.ndarray, w: np.ndarray):
    """Gradient of the weighted batch loss
        (1/n) sum_i sum_y w[i, y] * ce(logits_i, y)
    with respect to all parameters.

    Returns ((grad_weights, grad_biases), loss). Uses the closed form
    d loss / d logits_i = (sum_y w[i, y]) * softmax(logits_i) - w[i].
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.ndim != 2 or w.ndim != 2 or x.shape[0] != w.shape[0]:
        raise ValueError(f"batch shapes disagree: x {x.shape}, w {w.shape}")
    if w.shape[1] != model.layer_dims[-1]:
        raise ValueError(
            f"weight rows have {w.shape[1]} classes, model outputs {model.layer_dims[-1]}"
        )
    n = x.shape[0]
    logits, acts = _forward_cached(model, x)

    lse = _log_sum_exp(logits)
    row_mass = w.sum(axis=1)
    loss = float(np.mean(row_mass * lse - (w * logits).sum(axis=1)))

    # Backprop. delta holds d loss / d z for the current layer.
    delta = (row_mass[:, None] * softmax(logits) - w) / n
    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    for l in range(len(model.weights) - 1, -1, -1):
        grad_w[l] = acts[l].T @ delta
        grad_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ model.weights[l].T) * (acts[l] > 0)
    return (grad_w, grad_b), loss


@dataclass
class AdamState:
    """First/second moment accumulators and the step counter."""

    t: int = 0
    m_w: list = field(default_factory=list)
    v_w: list = field(default_factory=list)
    m_b: list = field(default_factory=list)
    v_b: list = field(default_factory=list)

    @classmethod
    def init(cls, model: MlpModel) -> "AdamState":
        return cls(
            t=0,
            m_w=[np.zeros_like(p) for p in model.weights],
            v_w=[np.zeros_like(p) for p in model.weights],
            m_b=[np.zeros_like(p) for p in model.biases],
            v_b=[np.zeros_like(p) for p in model.biases],
        )


def adam_step(
    model: MlpModel,
    state: AdamState,
    grads,
    learning_rate: float,
    weight_decay: float = 0.0,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One Adam update with bias correction, in place.

    Weight decay is decoupled from the moment estimates: when the coefficient
    is positive, the parameter is first shrunk by ``1 - lr * weight_decay``
    and the Adam delta is subtracted from the shrunk value. Raises
    DivergenceError on non-finite gradients.
    """
    grad_w, grad_b = grads
    for g in (*grad_w, *grad_b):
        if not np.all(np.isfinite(g)):
            raise DivergenceError("non-finite gradient in adam_step")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for params, gs, ms, vs in (
        (model.weights, grad_w, state.m_w, state.v_w),
        (model.biases, grad_b, state.m_b, state.v_b),
    ):
        for p, g, m, v in zip(params, gs, ms, vs):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            if weight_decay > 0.0:
                p *= 1.0 - learning_rate * weight_decay
            p -= learning_rate * (m / c1) / (np.sqrt(v / c2) + eps)


def predict_class(model: MlpModel, x) -> np.ndarray:
    """Argmax class column per row; ties go to the lowest index."""
    logits = forward(model, x)
    if logits.ndim == 1:
        return int(np.argmax(logits))
    return np.argmax(logits, axis=1)

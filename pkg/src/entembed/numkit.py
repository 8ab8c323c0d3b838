"""Small deterministic math kernel for the dense networks in this package.

Everything is float64 numpy.  The kernel deliberately stays tiny: dense
affine maps, ReLU/sigmoid with derivatives, mean binary cross-entropy,
Adam, a seeded generator factory, fan-based weight init, and a central
finite-difference gradient checker used to validate the hand-written
backprop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError

BCE_EPS = 1e-7


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator; the single RNG entry point so streams are reproducible."""
    return np.random.default_rng(seed)


def ensure_finite(name: str, arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite entries")
    return arr


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    """Uniform init in +/- sqrt(6 / (fan_in + fan_out)), shape (fan_out, fan_in)."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


# ---------------------------------------------------------------------------
# Layers and activations


def dense_forward(w: np.ndarray, b: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Affine map W x + b.

    ``w`` is (out, in); ``x`` may be a single (in,) vector or an (n, in)
    batch, giving (out,) or (n, out) respectively.
    """
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.ndim != 2 or b.shape != (w.shape[0],):
        raise ValueError(f"inconsistent layer shapes w={w.shape} b={b.shape}")
    if x.shape[-1] != w.shape[1]:
        raise ValueError(f"input width {x.shape[-1]} != layer fan-in {w.shape[1]}")
    return x @ w.T + b


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_grad(x: np.ndarray) -> np.ndarray:
    """Derivative of relu w.r.t. its input; 0 at exactly 0."""
    return (np.asarray(x, dtype=np.float64) > 0.0).astype(np.float64)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic: exp() is only ever taken of a non-positive value."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_grad(s: np.ndarray) -> np.ndarray:
    """Derivative in terms of the sigmoid *output* s: s(1-s)."""
    s = np.asarray(s, dtype=np.float64)
    return s * (1.0 - s)


def bce_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean binary cross-entropy; predictions clamped to [eps, 1-eps]."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
    return float(np.mean(-(target * np.log(p) + (1.0 - target) * np.log(1.0 - p))))


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """Per-parameter Adam accumulators plus the shared hyperparameters."""

    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    return AdamState(
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
        t=0,
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(params, grads, state: AdamState):
    """One Adam update over parallel lists of arrays.

    Parameters and accumulators are updated in place; (params, state) is
    returned for call-site chaining.  Uses bias correction and the
    lr * m_hat / (sqrt(v_hat) + eps) form.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads, and Adam state must be parallel lists")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


# ---------------------------------------------------------------------------
# Gradient checking


def finite_diff_check(f, x: np.ndarray, analytic_grad: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error between ``analytic_grad`` and central differences of f.

    The relative error per coordinate divides by max(1, |analytic|), so
    near-zero gradients are compared absolutely.
    """
    x = np.asarray(x, dtype=np.float64)
    analytic = np.asarray(analytic_grad, dtype=np.float64)
    if x.shape != analytic.shape:
        raise ValueError("x and analytic_grad shapes differ")
    if h <= 0:
        raise ValueError("h must be positive")
    flat = x.reshape(-1)
    worst = 0.0
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = float(f(x))
        flat[i] = orig - h
        f_minus = float(f(x))
        flat[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(f"finite_diff_check: non-finite f at coordinate {i}")
        numeric = (f_plus - f_minus) / (2.0 * h)
        a = analytic.reshape(-1)[i]
        err = abs(numeric - a) / max(1.0, abs(a))
        worst = max(worst, err)
    return worst

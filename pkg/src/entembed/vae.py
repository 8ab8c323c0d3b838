"""Variational autoencoder over one-hot entity vectors, written on numkit.

Architecture: input -> hidden (ReLU) -> 25-dim mean and log-variance heads
-> hidden (ReLU) -> input-sized sigmoid output.  The latent heads are
linear by default; a ReLU-head variant is available behind
``relu_latent_heads`` for comparison runs (ReLU on the mean head forbids
negative means, so it is not the default).  Backpropagation is derived by
hand for this fixed architecture and validated by finite differences.

The deterministic embedding of a state is the mean head's output; sampling
(via the reparameterization z = mu + exp(0.5 logvar) * noise) happens only
during training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import weightdoc
from .errors import DataFormatError, NumericError
from .numkit import (
    adam_init,
    adam_step,
    bce_loss,
    dense_forward,
    glorot_uniform,
    make_rng,
    relu,
    relu_grad,
    sigmoid,
    BCE_EPS,
)
from .onehot import VECTOR_SIZE, decode_vector
from .rule_corpus import EntityState

DEFAULT_HIDDEN = 256
DEFAULT_LATENT = 25

_PARAM_NAMES = (
    "enc_w", "enc_b", "mu_w", "mu_b", "lv_w", "lv_b",
    "dec_w1", "dec_b1", "dec_w2", "dec_b2",
)


@dataclass
class VaeModel:
    enc_w: np.ndarray
    enc_b: np.ndarray
    mu_w: np.ndarray
    mu_b: np.ndarray
    lv_w: np.ndarray
    lv_b: np.ndarray
    dec_w1: np.ndarray
    dec_b1: np.ndarray
    dec_w2: np.ndarray
    dec_b2: np.ndarray
    hidden_size: int
    latent_size: int
    input_size: int
    kl_weight: float = 1.0
    relu_latent_heads: bool = False
    seed: int = 0

    def params(self) -> list:
        """Parameter arrays in the fixed optimizer/persistence order."""
        return [getattr(self, n) for n in _PARAM_NAMES]

    def param_count(self) -> int:
        return sum(p.size for p in self.params())

    def validate_shapes(self) -> None:
        h, l, d = self.hidden_size, self.latent_size, self.input_size
        expected = {
            "enc_w": (h, d), "enc_b": (h,),
            "mu_w": (l, h), "mu_b": (l,),
            "lv_w": (l, h), "lv_b": (l,),
            "dec_w1": (h, l), "dec_b1": (h,),
            "dec_w2": (d, h), "dec_b2": (d,),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ValueError(f"{name} has shape {actual}, expected {shape}")


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 32
    lr: float = 0.001
    seed: int = 0
    kl_weight: float = 1.0
    shuffle: bool = True

    def validate(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.kl_weight < 0:
            raise ValueError("kl_weight must be >= 0")


def init_model(hidden_size: int = DEFAULT_HIDDEN, latent_size: int = DEFAULT_LATENT,
               seed: int = 0, input_size: int = VECTOR_SIZE, kl_weight: float = 1.0,
               relu_latent_heads: bool = False) -> VaeModel:
    """Fan-based deterministic initialization; biases start at zero."""
    if min(hidden_size, latent_size, input_size) < 1:
        raise ValueError("all layer sizes must be >= 1")
    rng = make_rng(seed)
    h, l, d = hidden_size, latent_size, input_size
    model = VaeModel(
        enc_w=glorot_uniform(rng, h, d),
        enc_b=np.zeros(h),
        mu_w=glorot_uniform(rng, l, h),
        mu_b=np.zeros(l),
        lv_w=glorot_uniform(rng, l, h),
        lv_b=np.zeros(l),
        dec_w1=glorot_uniform(rng, h, l),
        dec_b1=np.zeros(h),
        dec_w2=glorot_uniform(rng, d, h),
        dec_b2=np.zeros(d),
        hidden_size=h,
        latent_size=l,
        input_size=d,
        kl_weight=kl_weight,
        relu_latent_heads=relu_latent_heads,
        seed=seed,
    )
    model.validate_shapes()
    return model


# ---------------------------------------------------------------------------
# Inference


def encode(model: VaeModel, x) -> tuple[np.ndarray, np.ndarray]:
    """(mu, logvar) for one vector or a batch; mu is the deterministic embedding."""
    h = relu(dense_forward(model.enc_w, model.enc_b, x))
    mu = dense_forward(model.mu_w, model.mu_b, h)
    logvar = dense_forward(model.lv_w, model.lv_b, h)
    if model.relu_latent_heads:
        mu, logvar = relu(mu), relu(logvar)
    return mu, logvar


def embed(model: VaeModel, x) -> np.ndarray:
    return encode(model, x)[0]


def reparameterize(mu, logvar, noise) -> np.ndarray:
    """z = mu + exp(0.5 logvar) * noise."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    return mu + np.exp(0.5 * logvar) * noise


def decode(model: VaeModel, z) -> np.ndarray:
    """Latent point(s) -> probability vector(s), every entry strictly in (0,1)."""
    h = relu(dense_forward(model.dec_w1, model.dec_b1, z))
    return sigmoid(dense_forward(model.dec_w2, model.dec_b2, h))


def kl_divergence(mu, logvar) -> float:
    """-0.5 * sum(1 + logvar - mu^2 - exp(logvar)); mean over rows if batched."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    per = -0.5 * np.sum(1.0 + logvar - np.square(mu) - np.exp(logvar), axis=-1)
    return float(np.mean(per))


def loss(x, x_hat, mu, logvar, kl_weight: float = 1.0) -> tuple[float, float, float]:
    """(total, recon, kl): mean BCE plus weighted closed-form KL."""
    recon = bce_loss(np.asarray(x_hat), np.asarray(x))
    kl = kl_divergence(mu, logvar)
    return recon + kl_weight * kl, recon, kl


def reconstruct(model: VaeModel, x) -> EntityState:
    """Decode the mean-path reconstruction back to an integer entity state."""
    return decode_vector(decode(model, embed(model, x)))


# ---------------------------------------------------------------------------
# Training


def loss_and_grads(model: VaeModel, x_batch: np.ndarray, noise: np.ndarray,
                   kl_weight: float):
    """Forward + hand-derived backward pass for one batch and fixed noise.

    Returns (total, recon, kl, grads) with grads parallel to model.params().
    The BCE gradient is taken through the clamp: elements whose sigmoid
    output falls outside [eps, 1-eps] sit on the clamp plateau and
    contribute zero gradient, matching the loss actually evaluated.
    """
    x = np.asarray(x_batch, dtype=np.float64)
    eps_n = np.asarray(noise, dtype=np.float64)
    batch, width = x.shape
    n_elem = batch * width

    h_pre = x @ model.enc_w.T + model.enc_b
    h = relu(h_pre)
    mu_pre = h @ model.mu_w.T + model.mu_b
    lv_pre = h @ model.lv_w.T + model.lv_b
    if model.relu_latent_heads:
        mu, lv = relu(mu_pre), relu(lv_pre)
    else:
        mu, lv = mu_pre, lv_pre
    std = np.exp(0.5 * lv)
    z = mu + std * eps_n
    d_pre = z @ model.dec_w1.T + model.dec_b1
    d = relu(d_pre)
    y_pre = d @ model.dec_w2.T + model.dec_b2
    y = sigmoid(y_pre)

    total, recon, kl = loss(x, y, mu, lv, kl_weight)

    # dL/dy_pre: (y - t)/N inside the clamp window, 0 on the plateau.
    interior = (y > BCE_EPS) & (y < 1.0 - BCE_EPS)
    g_ypre = np.where(interior, (y - x) / n_elem, 0.0)

    g_dec_w2 = g_ypre.T @ d
    g_dec_b2 = g_ypre.sum(axis=0)
    g_dpre = (g_ypre @ model.dec_w2) * relu_grad(d_pre)
    g_dec_w1 = g_dpre.T @ z
    g_dec_b1 = g_dpre.sum(axis=0)
    g_z = g_dpre @ model.dec_w1

    g_mu = g_z + kl_weight * mu / batch
    g_lv = g_z * (0.5 * std * eps_n) + kl_weight * 0.5 * (np.exp(lv) - 1.0) / batch
    if model.relu_latent_heads:
        g_mu = g_mu * relu_grad(mu_pre)
        g_lv = g_lv * relu_grad(lv_pre)

    g_mu_w = g_mu.T @ h
    g_mu_b = g_mu.sum(axis=0)
    g_lv_w = g_lv.T @ h
    g_lv_b = g_lv.sum(axis=0)
    g_hpre = (g_mu @ model.mu_w + g_lv @ model.lv_w) * relu_grad(h_pre)
    g_enc_w = g_hpre.T @ x
    g_enc_b = g_hpre.sum(axis=0)

    grads = [g_enc_w, g_enc_b, g_mu_w, g_mu_b, g_lv_w, g_lv_b,
             g_dec_w1, g_dec_b1, g_dec_w2, g_dec_b2]
    return total, recon, kl, grads


def train(model: VaeModel, data, config: TrainConfig):
    """Train in place with Adam; returns (model, per-epoch loss history).

    Deterministic given (seed, data order, config): one generator drives
    both the per-epoch shuffle and the reparameterization noise.
    """
    config.validate()
    x_all = np.asarray(data, dtype=np.float64)
    if x_all.ndim != 2 or x_all.shape[0] == 0:
        raise ValueError("data must be a non-empty list of input vectors")
    if x_all.shape[1] != model.input_size:
        raise ValueError(f"data width {x_all.shape[1]} != model input size {model.input_size}")
    rng = make_rng(config.seed)
    params = model.params()
    opt = adam_init(params, lr=config.lr)
    history: list[dict] = []
    n = x_all.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        sums = {"total": 0.0, "recon": 0.0, "kl": 0.0}
        for b_start in range(0, n, config.batch_size):
            idx = order[b_start : b_start + config.batch_size]
            xb = x_all[idx]
            noise = rng.standard_normal((len(idx), model.latent_size))
            total, recon, kl, grads = loss_and_grads(model, xb, noise, config.kl_weight)
            if not np.isfinite(total):
                raise NumericError(
                    f"non-finite loss at epoch {epoch + 1}, batch {b_start // config.batch_size + 1}"
                )
            adam_step(params, grads, opt)
            w = len(idx)
            sums["total"] += total * w
            sums["recon"] += recon * w
            sums["kl"] += kl * w
        history.append({k: v / n for k, v in sums.items()})
    model.kl_weight = config.kl_weight
    return model, history


# ---------------------------------------------------------------------------
# Persistence


def save_model(model: VaeModel, target, extra_meta: dict | None = None) -> None:
    meta = {
        "hidden_size": model.hidden_size,
        "latent_size": model.latent_size,
        "input_size": model.input_size,
        "kl_weight": model.kl_weight,
        "relu_latent_heads": model.relu_latent_heads,
        "seed": model.seed,
    }
    if extra_meta:
        meta.update(extra_meta)
    arrays = {name: getattr(model, name) for name in _PARAM_NAMES}
    weightdoc.write_weight_doc(target, "vae", meta, arrays)


def load_model(source) -> VaeModel:
    kind, meta, arrays = weightdoc.read_weight_doc(source)
    if kind != "vae":
        raise DataFormatError(f"expected a vae weight document, got kind {kind!r}")
    missing = [n for n in _PARAM_NAMES if n not in arrays]
    if missing:
        raise DataFormatError(f"weight document is missing arrays {missing}")
    try:
        model = VaeModel(
            **{n: arrays[n] for n in _PARAM_NAMES},
            hidden_size=int(meta["hidden_size"]),
            latent_size=int(meta["latent_size"]),
            input_size=int(meta["input_size"]),
            kl_weight=float(meta.get("kl_weight", 1.0)),
            relu_latent_heads=bool(meta.get("relu_latent_heads", False)),
            seed=int(meta.get("seed", 0)),
        )
    except KeyError as exc:
        raise DataFormatError(f"weight document meta is missing {exc}") from None
    try:
        model.validate_shapes()
    except ValueError as exc:
        raise DataFormatError(str(exc)) from None
    return model

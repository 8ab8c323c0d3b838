"""Latent-space exploration tools built on a trained model.

Includes paired averaging (integer floor-average vs. decoded latent
average), bounded random perturbation around an embedding, pairwise
latent distance tables, and a small from-scratch t-SNE projector for
2-D visualization exports.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericError
from .numkit import make_rng
from .onehot import decode_vector, encode_state
from .rule_corpus import EntityState
from .vae import VaeModel, decode, embed

P_FLOOR = 1e-12


def average_pair(a: EntityState, b: EntityState, model: VaeModel) -> dict:
    """Integer-space vs. latent-space averages of two states.

    vector_avg floors (a_k + b_k)/2 per feature; latent_avg decodes the
    midpoint of the two mean embeddings.
    """
    vector_avg = EntityState.from_sequence(
        (x + y) // 2 for x, y in zip(a.as_tuple(), b.as_tuple())
    )
    mu_a = embed(model, encode_state(a))
    mu_b = embed(model, encode_state(b))
    latent_avg = decode_vector(decode(model, (mu_a + mu_b) / 2.0))
    return {"vector_avg": vector_avg, "latent_avg": latent_avg}


def perturb(center: EntityState, n: int, offset_range: float, seed: int,
            model: VaeModel, distribution: str = "uniform") -> list:
    """Decode n random nudges of the center's embedding.

    Offsets are i.i.d. uniform in [-offset_range, +offset_range] per latent
    coordinate; ``distribution="truncated_normal"`` swaps in rejection-
    sampled normals (std = offset_range/2) bounded to the same window.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if offset_range <= 0:
        raise ValueError("offset_range must be positive")
    if distribution not in ("uniform", "truncated_normal"):
        raise ValueError(f"unknown distribution {distribution!r}")
    mu = embed(model, encode_state(center))
    rng = make_rng(seed)
    k = mu.shape[0]
    if distribution == "uniform":
        offsets = rng.uniform(-offset_range, offset_range, size=(n, k))
    else:
        sigma = offset_range / 2.0
        offsets = np.empty((n, k))
        for i in range(n):
            for j in range(k):
                draw = rng.standard_normal() * sigma
                while abs(draw) > offset_range:
                    draw = rng.standard_normal() * sigma
                offsets[i, j] = draw
    return [decode_vector(decode(model, mu + off)) for off in offsets]


def distance_table(states, model: VaeModel) -> np.ndarray:
    """Symmetric pairwise Euclidean distances between mean embeddings."""
    states = list(states)
    if len(states) < 2:
        raise ValueError("need at least 2 states")
    mus = np.vstack([embed(model, encode_state(s)) for s in states])
    diffs = mus[:, None, :] - mus[None, :, :]
    table = np.sqrt(np.sum(diffs**2, axis=-1))
    np.fill_diagonal(table, 0.0)
    return table


def write_distance_csv(target, table: np.ndarray, labels, config: dict | None = None) -> None:
    """Square CSV with a label header row and a label column."""
    labels = list(labels)
    if table.shape != (len(labels), len(labels)):
        raise ValueError("label count does not match table shape")

    def _emit(f):
        if config is not None:
            f.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        writer = csv.writer(f)
        writer.writerow([""] + labels)
        for label, row in zip(labels, table):
            writer.writerow([label] + [repr(float(v)) for v in row])

    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as f:
            _emit(f)
    else:
        _emit(target)


# ---------------------------------------------------------------------------
# t-SNE


@dataclass
class TsneConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    seed: int = 0
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    momentum_switch: int = 250
    early_exaggeration: float = 12.0
    exaggeration_until: int = 250

    def validate(self) -> None:
        if self.perplexity < 2:
            raise ValueError("perplexity must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def _squared_distances(x: np.ndarray) -> np.ndarray:
    sq = np.sum(x**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _entropy_and_row(d2_row: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    """Shannon entropy (nats) and probabilities of one Gaussian row at precision beta."""
    logits = -beta * d2_row
    logits -= logits.max()  # max-shift so exp never underflows to an all-zero row
    e = np.exp(logits)
    p = e / e.sum()
    nz = p[p > 0.0]
    h = float(-np.sum(nz * np.log(nz)))
    return h, p


def conditional_affinities(x: np.ndarray, perplexity: float) -> np.ndarray:
    """Row-stochastic high-dimensional affinities at the requested perplexity.

    Per row, the Gaussian precision is found by binary search until the
    row entropy matches log(perplexity) within 1e-5, capped at 50 steps.
    """
    n = x.shape[0]
    d2 = _squared_distances(x)
    target = np.log(perplexity)
    p_cond = np.zeros((n, n))
    for i in range(n):
        row = np.delete(d2[i], i)
        beta, beta_lo, beta_hi = 1.0, 0.0, np.inf
        h, p = _entropy_and_row(row, beta)
        for _ in range(50):
            if abs(h - target) <= 1e-5:
                break
            if h > target:
                beta_lo = beta
                beta = beta * 2.0 if np.isinf(beta_hi) else (beta + beta_hi) / 2.0
            else:
                beta_hi = beta
                beta = (beta + beta_lo) / 2.0
            h, p = _entropy_and_row(row, beta)
        p_cond[i, np.arange(n) != i] = p
    return p_cond


def joint_affinities(x: np.ndarray, perplexity: float) -> np.ndarray:
    """Symmetrized, floored joint P matrix; entries sum to ~1."""
    n = x.shape[0]
    p_cond = conditional_affinities(x, perplexity)
    p = (p_cond + p_cond.T) / (2.0 * n)
    return np.maximum(p, P_FLOOR)


def _low_dim_affinities(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    num = 1.0 / (1.0 + _squared_distances(y))
    np.fill_diagonal(num, 0.0)
    q = num / num.sum()
    return np.maximum(q, P_FLOOR), num


def kl_and_grad(p: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """KL(P||Q) and its gradient w.r.t. the 2-D coordinates.

    grad_i = 4 * sum_j (p_ij - q_ij) * num_ij * (y_i - y_j); with the
    floored P and Q sharing the floor on the diagonal, the diagonal terms
    vanish.
    """
    q, num = _low_dim_affinities(y)
    kl = float(np.sum(p * np.log(p / q)))
    pqn = (p - q) * num
    grad = 4.0 * (pqn.sum(axis=1)[:, None] * y - pqn @ y)
    return kl, grad


def tsne_with_history(points, config: TsneConfig):
    """Full t-SNE run; returns (coords, kl_history).

    kl_history holds (iteration, KL against the un-exaggerated P) pairs
    recorded at the first iteration, every 50th, and the last.
    """
    config.validate()
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("points must be a 2-d array")
    n = x.shape[0]
    if n < 4:
        raise ValueError("t-SNE needs at least 4 points")
    if not np.all(np.isfinite(x)):
        raise NumericError("t-SNE input has non-finite entries")

    perplexity = min(config.perplexity, (n - 1) / 3.0)
    p = joint_affinities(x, perplexity)

    rng = make_rng(config.seed)
    y = rng.standard_normal((n, 2)) * 1e-4
    velocity = np.zeros_like(y)
    history: list[tuple[int, float]] = []
    for t in range(1, config.iterations + 1):
        exaggerating = t <= config.exaggeration_until
        p_eff = p * config.early_exaggeration if exaggerating else p
        _, grad = kl_and_grad(p_eff, y)
        momentum = config.momentum_start if t <= config.momentum_switch else config.momentum_final
        velocity = momentum * velocity - config.learning_rate * grad
        y = y + velocity
        y = y - y.mean(axis=0)
        if t == 1 or t % 50 == 0 or t == config.iterations:
            kl, _ = kl_and_grad(p, y)
            history.append((t, kl))
    return y, history


def tsne(points, config: TsneConfig | None = None) -> np.ndarray:
    """2-D t-SNE coordinates for the given points (deterministic per seed)."""
    coords, _ = tsne_with_history(points, config if config is not None else TsneConfig())
    return coords


TSNE_CSV_HEADER = ("index", "x", "y", "game_id", "entity_id")


def write_tsne_csv(target, coords: np.ndarray, game_ids, entity_ids,
                   config: dict | None = None) -> None:
    coords = np.asarray(coords, dtype=np.float64)
    game_ids = list(game_ids)
    entity_ids = list(entity_ids)
    if not (coords.shape[0] == len(game_ids) == len(entity_ids)):
        raise ValueError("coords, game_ids, and entity_ids lengths differ")

    def _emit(f):
        if config is not None:
            f.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        writer = csv.writer(f)
        writer.writerow(TSNE_CSV_HEADER)
        for i, (xy, g, e) in enumerate(zip(coords, game_ids, entity_ids)):
            writer.writerow([i, repr(float(xy[0])), repr(float(xy[1])), g, e])

    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as f:
            _emit(f)
    else:
        _emit(target)

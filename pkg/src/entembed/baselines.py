"""Comparison methods: nearest training entity and a PCA reconstructor.

Nearest-entity is an exact linear scan over the training states under
either distance.  PCA is written from scratch: deflated power iteration
on the sample covariance, with Gram-Schmidt re-orthogonalization against
already-found components at every step, so only the k needed directions
are ever computed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import weightdoc
from .errors import DataFormatError
from .evalharness import euclidean_distance, jaccard_distance
from .numkit import make_rng
from .rule_corpus import EntityState

POWER_TOL = 1e-10
POWER_MAX_ITERS = 10000

_METRICS = {
    "jaccard": jaccard_distance,
    "euclidean": euclidean_distance,
}


def nearest_entity(train, query: EntityState, metric: str = "euclidean") -> EntityState:
    """Closest training state under the chosen metric; earliest index wins ties."""
    if metric not in _METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {sorted(_METRICS)}")
    train = list(train)
    if not train:
        raise ValueError("training set is empty")
    dist = _METRICS[metric]
    best = train[0]
    best_d = dist(train[0], query)
    for candidate in train[1:]:
        d = dist(candidate, query)
        if d < best_d:
            best, best_d = candidate, d
    return best


# ---------------------------------------------------------------------------
# PCA


@dataclass
class PcaModel:
    mean: np.ndarray              # (d,)
    components: np.ndarray        # (k, d), orthonormal rows
    explained_variance: np.ndarray  # (k,), non-increasing


def _orthogonalize(v: np.ndarray, basis: list) -> np.ndarray:
    for b in basis:
        v = v - np.dot(b, v) * b
    return v


def pca_fit(train_vectors, k: int, seed: int = 0) -> PcaModel:
    """Top-k principal directions of the sample covariance (1/(n-1) scaling).

    Each direction is found by power iteration, kept orthogonal to the
    previous ones at every step; convergence is a successive-direction
    change below 1e-10 (sign-aligned) or 10000 iterations.  Directions the
    data does not span (possible once k approaches n-1 on degenerate
    inputs) are filled with arbitrary orthonormal vectors at zero variance.
    """
    x = np.asarray(train_vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least 2 training vectors")
    n, d = x.shape
    if not 1 <= k <= min(n - 1, d):
        raise ValueError(f"k={k} outside [1, min(n-1, d)] = [1, {min(n - 1, d)}]")
    mean = x.mean(axis=0)
    centered = x - mean
    if not np.any(centered):
        raise ValueError("degenerate input: all training vectors are identical (zero covariance)")
    cov = (centered.T @ centered) / (n - 1)

    rng = make_rng(seed)
    components: list = []
    variances: list = []
    for _ in range(k):
        v = rng.standard_normal(d)
        v = _orthogonalize(v, components)
        norm = np.linalg.norm(v)
        v = v / norm
        converged = False
        for _ in range(POWER_MAX_ITERS):
            w = cov @ v
            w = _orthogonalize(w, components)
            norm = np.linalg.norm(w)
            if norm < 1e-300:
                # the remaining subspace carries no variance
                break
            w /= norm
            if min(np.linalg.norm(w - v), np.linalg.norm(w + v)) < POWER_TOL:
                v = w
                converged = True
                break
            v = w
        del converged  # convergence failures still yield a usable direction
        lam = float(v @ (cov @ v))
        if lam < 0.0:
            lam = 0.0
        # canonical sign: largest-magnitude coordinate positive
        if v[int(np.argmax(np.abs(v)))] < 0:
            v = -v
        components.append(v)
        variances.append(lam)

    comp = np.vstack(components)
    var = np.array(variances)
    order = np.argsort(-var, kind="stable")
    return PcaModel(mean=mean, components=comp[order], explained_variance=var[order])


def pca_reconstruct(model: PcaModel, x) -> np.ndarray:
    """Project onto the fitted components: mean + sum_j <x - mean, c_j> c_j."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.mean.shape[0]:
        raise ValueError(f"input width {x.shape[-1]} != model width {model.mean.shape[0]}")
    centered = x - model.mean
    coords = centered @ model.components.T
    return model.mean + coords @ model.components


def save_pca(model: PcaModel, target, extra_meta: dict | None = None) -> None:
    meta = {
        "k": int(model.components.shape[0]),
        "input_size": int(model.mean.shape[0]),
    }
    if extra_meta:
        meta.update(extra_meta)
    weightdoc.write_weight_doc(
        target,
        "pca",
        meta,
        {
            "mean": model.mean,
            "components": model.components,
            "explained_variance": model.explained_variance,
        },
    )


def load_pca(source) -> PcaModel:
    kind, meta, arrays = weightdoc.read_weight_doc(source)
    if kind != "pca":
        raise DataFormatError(f"expected a pca weight document, got kind {kind!r}")
    for name in ("mean", "components", "explained_variance"):
        if name not in arrays:
            raise DataFormatError(f"weight document is missing array {name!r}")
    mean = arrays["mean"]
    comp = arrays["components"]
    var = arrays["explained_variance"]
    if comp.ndim != 2 or comp.shape[1] != mean.shape[0] or var.shape != (comp.shape[0],):
        raise DataFormatError(
            f"inconsistent pca shapes: mean {mean.shape}, components {comp.shape}, "
            f"explained_variance {var.shape}"
        )
    return PcaModel(mean=mean, components=comp, explained_variance=var)

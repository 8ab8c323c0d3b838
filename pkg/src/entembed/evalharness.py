"""Distances over entity states and the multi-method evaluation report.

All methods are scored in the same space: each produces a predicted
EntityState for a test state, and both distances are computed on the
8-feature integer vectors.  Jaccard treats a state as the set of its
(feature-index, value) pairs, so the same value appearing under different
features never counts as an intersection.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .numkit import make_rng
from .onehot import decode_vector, encode_state
from .rule_corpus import NUM_FEATURES, EntityState

METHOD_VAE = "VAE"
METHOD_PCA = "PCA"
METHOD_SE_EUCLIDEAN = "SE_Euclidean"
METHOD_SE_JACCARD = "SE_Jaccard"
METHODS = (METHOD_VAE, METHOD_PCA, METHOD_SE_EUCLIDEAN, METHOD_SE_JACCARD)

PER_ENTITY_HEADER = ("test_index", "method", "equal_count", "unequal_abs_diff", "jaccard", "euclidean")


def jaccard_distance(a: EntityState, b: EntityState) -> float:
    """1 - m/(16-m) where m counts positionally equal features.

    m equal pairs intersect; the union holds m shared pairs plus 2*(8-m)
    mismatched ones, hence |A union B| = 16 - m.
    """
    m = sum(x == y for x, y in zip(a.as_tuple(), b.as_tuple()))
    return 1.0 - m / (2 * NUM_FEATURES - m)


def euclidean_distance(a: EntityState, b: EntityState) -> float:
    diff = a.as_array() - b.as_array()
    return float(np.sqrt(np.sum(diff.astype(np.float64) ** 2)))


def per_entity_comparison(original: EntityState, predicted: EntityState) -> dict:
    """Per-pair scores: equal feature count, total |diff| over mismatches, both distances."""
    a, b = original.as_tuple(), predicted.as_tuple()
    equal = sum(x == y for x, y in zip(a, b))
    abs_diff = sum(abs(x - y) for x, y in zip(a, b) if x != y)
    return {
        "equal_count": equal,
        "unequal_abs_diff": abs_diff,
        "jaccard": jaccard_distance(original, predicted),
        "euclidean": euclidean_distance(original, predicted),
    }


@dataclass
class EvalReport:
    per_method: dict = field(default_factory=dict)
    per_entity: list = field(default_factory=list)
    exact_match_rate: float = 0.0


def evaluate(vae_model, pca_model, train, test, allow_overlap: bool = False) -> EvalReport:
    """Score VAE, PCA, and both nearest-entity baselines on held-out states.

    ``train`` is the pool the nearest-entity baselines search (the same
    states the models were fitted on); ``test`` must be disjoint from it
    unless ``allow_overlap`` is set for sanity runs.
    """
    from . import baselines  # deferred: baselines imports this module's distances
    from .vae import reconstruct

    train = list(train)
    test = list(test)
    if not test:
        raise ValueError("test set is empty")
    if not train:
        raise ValueError("train set is empty")
    if not allow_overlap:
        train_keys = {s.as_tuple() for s in train}
        overlap = sum(1 for s in test if s.as_tuple() in train_keys)
        if overlap:
            raise ValueError(
                f"{overlap} test state(s) also appear in train; held-out contract violated "
                "(pass allow_overlap=True for sanity runs)"
            )

    rows = []
    exact = 0
    for i, state in enumerate(test):
        x = encode_state(state)
        predictions = {
            METHOD_VAE: reconstruct(vae_model, x),
            METHOD_PCA: decode_vector(baselines.pca_reconstruct(pca_model, x)),
            METHOD_SE_EUCLIDEAN: baselines.nearest_entity(train, state, "euclidean"),
            METHOD_SE_JACCARD: baselines.nearest_entity(train, state, "jaccard"),
        }
        for method in METHODS:
            row = {"test_index": i, "method": method}
            row.update(per_entity_comparison(state, predictions[method]))
            rows.append(row)
        if predictions[METHOD_VAE] == state:
            exact += 1

    per_method = {}
    for method in METHODS:
        mrows = [r for r in rows if r["method"] == method]
        per_method[method] = {
            "mean_jaccard": float(np.mean([r["jaccard"] for r in mrows])),
            "mean_euclidean": float(np.mean([r["euclidean"] for r in mrows])),
        }
    return EvalReport(per_method, rows, exact / len(test))


def sample_comparison_rows(report: EvalReport, fraction: float = 0.2, seed: int = 0) -> list:
    """Seeded sample of test indices (default 20%); returns their rows for every method."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    indices = sorted({r["test_index"] for r in report.per_entity})
    n_pick = max(1, int(np.floor(fraction * len(indices) + 0.5)))
    rng = make_rng(seed)
    picked = set(rng.permutation(len(indices))[:n_pick])
    chosen = {indices[i] for i in picked}
    return [r for r in report.per_entity if r["test_index"] in chosen]


# ---------------------------------------------------------------------------
# Report files


def render_report(report: EvalReport, config: dict | None = None) -> str:
    """Structured text: one block per method, means to 4 decimals, then the exact-match rate."""
    out = io.StringIO()
    if config is not None:
        out.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    out.write("method comparison\n")
    for method in METHODS:
        means = report.per_method[method]
        out.write(
            f"  {method}: mean_jaccard={means['mean_jaccard']:.4f} "
            f"mean_euclidean={means['mean_euclidean']:.4f}\n"
        )
    out.write(f"exact_match_rate (VAE): {report.exact_match_rate:.4f}\n")
    return out.getvalue()


def write_report(target, report: EvalReport, config: dict | None = None) -> None:
    text = render_report(report, config)
    if isinstance(target, (str, Path)):
        Path(target).write_text(text, encoding="utf-8")
    else:
        target.write(text)


def write_per_entity_csv(target, rows, config: dict | None = None) -> None:
    def _emit(f):
        if config is not None:
            f.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        writer = csv.writer(f)
        writer.writerow(PER_ENTITY_HEADER)
        for r in rows:
            writer.writerow([r[k] for k in PER_ENTITY_HEADER])

    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as f:
            _emit(f)
    else:
        _emit(target)


def read_per_entity_csv(source) -> list:
    def _consume(f):
        rows = csv.reader(line for line in f if not line.startswith("#"))
        header = next(rows, None)
        if header is None or tuple(header) != PER_ENTITY_HEADER:
            raise DataFormatError(f"unexpected per-entity header {header!r}")
        out = []
        for row in rows:
            if not row:
                continue
            out.append(
                {
                    "test_index": int(row[0]),
                    "method": row[1],
                    "equal_count": int(row[2]),
                    "unequal_abs_diff": int(row[3]),
                    "jaccard": float(row[4]),
                    "euclidean": float(row[5]),
                }
            )
        return out

    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as f:
            return _consume(f)
    return _consume(source)

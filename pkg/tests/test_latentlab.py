"""Latent tools: averaging, perturbation, distance tables, and t-SNE."""

import io

import numpy as np
import pytest

from entembed.errors import NumericError
from entembed.latentlab import (
    TsneConfig,
    average_pair,
    conditional_affinities,
    distance_table,
    joint_affinities,
    kl_and_grad,
    perturb,
    tsne,
    tsne_with_history,
    write_distance_csv,
    write_tsne_csv,
)
from entembed.numkit import finite_diff_check
from entembed.onehot import encode_state
from entembed.rule_corpus import EntityState
from entembed.vae import reconstruct


# ---------------------------------------------------------------------------
# averaging


def test_average_same_state_is_identity(overfit_model, tiny_states):
    s = tiny_states[0]
    result = average_pair(s, s, overfit_model)
    assert result["vector_avg"] == s
    # mu midpoint of identical inputs is the input's own embedding
    assert result["latent_avg"] == reconstruct(overfit_model, encode_state(s))


def test_vector_average_floors(overfit_model):
    a = EntityState(0, 4, 4, 0, 0, 10, 10, 0)
    b = EntityState(0, 7, 4, 0, 0, 10, 10, 0)
    assert average_pair(a, b, overfit_model)["vector_avg"].size_x == 5  # floor of 5.5
    neg_a = EntityState(0, 4, 4, -3, 0, 10, 10, 0)
    neg_b = EntityState(0, 4, 4, 0, 0, 10, 10, 0)
    # floors toward negative infinity, not toward zero
    assert average_pair(neg_a, neg_b, overfit_model)["vector_avg"].vel_x == -2


def test_average_pair_full(overfit_model, tiny_states):
    a, b = tiny_states[0], tiny_states[4]
    result = average_pair(a, b, overfit_model)
    assert result["vector_avg"].size_x == (a.size_x + b.size_x) // 2
    # latent average decodes to a structurally valid state
    assert isinstance(result["latent_avg"], EntityState)
    for v in result["latent_avg"].as_tuple():
        assert -100 <= v <= 99


# ---------------------------------------------------------------------------
# perturbation


def test_perturb_deterministic(overfit_model, tiny_states):
    a = perturb(tiny_states[0], n=8, offset_range=0.2, seed=3, model=overfit_model)
    b = perturb(tiny_states[0], n=8, offset_range=0.2, seed=3, model=overfit_model)
    assert a == b
    c = perturb(tiny_states[0], n=8, offset_range=0.2, seed=4, model=overfit_model)
    assert len(c) == 8


def test_perturb_tiny_range_matches_reconstruction(overfit_model, tiny_states):
    center = tiny_states[2]
    base = reconstruct(overfit_model, encode_state(center))
    for s in perturb(center, n=5, offset_range=1e-9, seed=1, model=overfit_model):
        assert s == base


def test_perturb_drift_grows_with_range(overfit_model, tiny_states):
    # expected number of changed features is non-decreasing over widening ranges
    center = tiny_states[1]
    base = reconstruct(overfit_model, encode_state(center))
    means = []
    for r in (0.05, 0.2, 1.0):
        variants = perturb(center, n=120, offset_range=r, seed=7, model=overfit_model)
        changed = [
            sum(x != y for x, y in zip(v.as_tuple(), base.as_tuple())) for v in variants
        ]
        means.append(float(np.mean(changed)))
    assert means[0] <= means[1] + 1e-9
    assert means[1] <= means[2] + 1e-9


def test_perturb_truncated_normal_switch(overfit_model, tiny_states):
    a = perturb(tiny_states[0], n=6, offset_range=0.2, seed=5, model=overfit_model,
                distribution="truncated_normal")
    b = perturb(tiny_states[0], n=6, offset_range=0.2, seed=5, model=overfit_model,
                distribution="truncated_normal")
    assert a == b
    with pytest.raises(ValueError, match="distribution"):
        perturb(tiny_states[0], n=1, offset_range=0.2, seed=0, model=overfit_model,
                distribution="lognormal")


def test_perturb_rejects_bad_args(overfit_model, tiny_states):
    with pytest.raises(ValueError):
        perturb(tiny_states[0], n=0, offset_range=0.2, seed=0, model=overfit_model)
    with pytest.raises(ValueError):
        perturb(tiny_states[0], n=1, offset_range=0.0, seed=0, model=overfit_model)


# ---------------------------------------------------------------------------
# distance tables


def test_distance_table_matches_brute_force(overfit_model, tiny_states):
    chosen = tiny_states[:4]
    table = distance_table(chosen, overfit_model)
    from entembed.vae import embed

    for i in range(4):
        for j in range(4):
            mu_i = embed(overfit_model, encode_state(chosen[i]))
            mu_j = embed(overfit_model, encode_state(chosen[j]))
            assert abs(table[i, j] - np.linalg.norm(mu_i - mu_j)) < 1e-12


def test_distance_table_symmetric_zero_diagonal(overfit_model, tiny_states):
    table = distance_table(tiny_states, overfit_model)
    assert np.abs(table - table.T).max() < 1e-12
    assert np.array_equal(np.diag(table), np.zeros(len(tiny_states)))


def test_distance_table_duplicates_give_zero(overfit_model, tiny_states):
    table = distance_table([tiny_states[0], tiny_states[0], tiny_states[3]], overfit_model)
    assert table[0, 1] == 0.0


def test_distance_table_triangle_inequality(overfit_model, tiny_states):
    table = distance_table(tiny_states, overfit_model)
    n = len(tiny_states)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                assert table[i, j] <= table[i, k] + table[k, j] + 1e-9


def test_distance_csv_has_label_headers(overfit_model, tiny_states):
    table = distance_table(tiny_states[:3], overfit_model)
    buf = io.StringIO()
    write_distance_csv(buf, table, ["a", "b", "c"], config={"cmd": "t"})
    lines = buf.getvalue().splitlines()
    assert lines[0].startswith("# config:")
    assert lines[1] == ",a,b,c"
    assert lines[2].split(",")[0] == "a"


# ---------------------------------------------------------------------------
# t-SNE affinities


def test_equidistant_points_give_uniform_rows():
    # scaled identity rows are mutually equidistant
    x = np.eye(6) * 2.0
    p = conditional_affinities(x, perplexity=2.0)
    for i in range(6):
        row = np.delete(p[i], i)
        assert np.abs(row - 1.0 / 5.0).max() < 1e-6
        assert p[i, i] == 0.0


def test_joint_p_matrix_properties():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(30, 10))
    p = joint_affinities(x, perplexity=8.0)
    assert np.all(p >= 0.0)
    assert np.abs(p - p.T).max() < 1e-15
    assert abs(p.sum() - 1.0) < 1e-8


def test_binary_search_hits_requested_perplexity():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(40, 5))
    for perplexity in (5.0, 10.0):
        p = conditional_affinities(x, perplexity)
        for i in range(40):
            row = np.delete(p[i], i)
            nz = row[row > 0]
            entropy = -np.sum(nz * np.log(nz))
            assert abs(entropy - np.log(perplexity)) < 1e-4


def test_tsne_gradient_passes_finite_differences():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(5, 7))
    p = joint_affinities(pts, perplexity=2.0)
    y = rng.normal(size=(5, 2)) * 0.1
    _, grad = kl_and_grad(p, y)
    err = finite_diff_check(lambda v: kl_and_grad(p, v)[0], y, grad, h=1e-5)
    assert err < 1e-4, f"relative error {err}"


# ---------------------------------------------------------------------------
# t-SNE runs


def two_cluster_points(rng, per_cluster=25, dim=25, gap=8.0):
    a = rng.normal(size=(per_cluster, dim)) * 0.5
    b = rng.normal(size=(per_cluster, dim)) * 0.5 + gap
    return np.vstack([a, b])


def test_tsne_kl_decreases_on_two_clusters():
    rng = np.random.default_rng(4)
    pts = two_cluster_points(rng)
    coords, history = tsne_with_history(pts, TsneConfig(perplexity=10, iterations=600, seed=3))
    assert coords.shape == (50, 2)
    assert history[-1][1] < history[0][1]


def test_tsne_separates_two_clusters():
    rng = np.random.default_rng(5)
    pts = two_cluster_points(rng)
    coords = tsne(pts, TsneConfig(perplexity=10, iterations=600, seed=3))
    labels = np.array([0] * 25 + [1] * 25)
    d = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(-1))
    same = labels[:, None] == labels[None, :]
    off_diag = ~np.eye(50, dtype=bool)
    intra = d[same & off_diag].mean()
    inter = d[~same].mean()
    assert intra < inter


def test_tsne_deterministic_per_seed():
    rng = np.random.default_rng(6)
    pts = rng.normal(size=(12, 4))
    a = tsne(pts, TsneConfig(perplexity=3, iterations=100, seed=8))
    b = tsne(pts, TsneConfig(perplexity=3, iterations=100, seed=8))
    assert np.array_equal(a, b)
    c = tsne(pts, TsneConfig(perplexity=3, iterations=100, seed=9))
    assert not np.array_equal(a, c)


def test_tsne_clamps_large_perplexity():
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(7, 4))
    coords = tsne(pts, TsneConfig(perplexity=30, iterations=50, seed=1))
    assert coords.shape == (7, 2)
    assert np.all(np.isfinite(coords))


def test_tsne_rejects_bad_inputs():
    rng = np.random.default_rng(8)
    with pytest.raises(ValueError, match="at least 4"):
        tsne(rng.normal(size=(3, 5)), TsneConfig(iterations=10))
    bad = rng.normal(size=(6, 5))
    bad[0, 0] = np.inf
    with pytest.raises(NumericError):
        tsne(bad, TsneConfig(iterations=10))
    with pytest.raises(ValueError):
        TsneConfig(perplexity=1.0).validate()
    with pytest.raises(ValueError):
        TsneConfig(iterations=0).validate()


def test_tsne_csv_layout(tmp_path):
    coords = np.array([[1.5, -2.0], [0.0, 3.25]])
    path = tmp_path / "coords.csv"
    write_tsne_csv(path, coords, [0, 1], [4, 5], config={"seed": 1})
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config:")
    assert lines[1] == "index,x,y,game_id,entity_id"
    assert lines[2] == "0,1.5,-2.0,0,4"

"""Poke around a trained model's latent space.

Shows the two flavors of averaging (integer floor vs. decoded latent
midpoint), random perturbations around one embedding, a pairwise latent
distance table, and a t-SNE projection of two well-separated latent
clusters.  Takes ~10 s.

    python3 demos/04_latent_space_tour.py
"""

from pathlib import Path

import numpy as np

from entembed import latentlab, rule_corpus, vae
from entembed.onehot import encode_state, encode_states

OUT = Path(__file__).parent / "out"


def train_small_model(states):
    model = vae.init_model(hidden_size=64, latent_size=25, seed=3, kl_weight=1 / 1600)
    model, _ = vae.train(model, encode_states(states),
                         vae.TrainConfig(epochs=200, batch_size=8, lr=0.003, seed=3,
                                         kl_weight=1 / 1600))
    return model


def main():
    OUT.mkdir(exist_ok=True)

    config = rule_corpus.SyntheticConfig(games=2, archetypes_per_game=2, states_per_archetype=10)
    corpus = rule_corpus.generate_synthetic_corpus(config, seed=5)
    states = corpus.states
    print(f"training a small model on {len(states)} states...")
    model = train_small_model(states)

    a, b = states[0], states[len(states) // 2]
    result = latentlab.average_pair(a, b, model)
    print()
    print("== averaging two states ==")
    print(f"a:          {a.as_tuple()}")
    print(f"b:          {b.as_tuple()}")
    print(f"vector avg: {result['vector_avg'].as_tuple()}  (per-feature floor)")
    print(f"latent avg: {result['latent_avg'].as_tuple()}  (decoded midpoint)")

    print()
    print("== perturbing one embedding ==")
    center = states[0]
    for offset_range in (0.1, 0.5):
        variants = latentlab.perturb(center, n=4, offset_range=offset_range, seed=9, model=model)
        changed = [
            sum(x != y for x, y in zip(v.as_tuple(), center.as_tuple())) for v in variants
        ]
        print(f"offset range {offset_range}: features changed per draw {changed}")

    print()
    print("== latent distance table ==")
    chosen = states[:4]
    table = latentlab.distance_table(chosen, model)
    np.set_printoptions(precision=2, suppress=True)
    print(table)
    labels = [f"e{s.entity_id}_g{s.game_id}" for s in chosen]
    latentlab.write_distance_csv(OUT / "demo_distances.csv", table, labels)

    print()
    print("== t-SNE on two latent clusters ==")
    rng = np.random.default_rng(0)
    cluster_a = rng.normal(size=(25, 25)) * 0.5
    cluster_b = rng.normal(size=(25, 25)) * 0.5 + 8.0
    points = np.vstack([cluster_a, cluster_b])
    tsne_config = latentlab.TsneConfig(perplexity=10, iterations=500, learning_rate=50, seed=3)
    coords, history = latentlab.tsne_with_history(points, tsne_config)
    print(f"KL divergence {history[0][1]:.3f} -> {history[-1][1]:.3f} over {history[-1][0]} iters")
    d = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(-1))
    same = np.arange(50) // 25
    mask = same[:, None] == same[None, :]
    off_diag = ~np.eye(50, dtype=bool)
    print(f"mean 2-D distance: intra-cluster {d[mask & off_diag].mean():.2f}, "
          f"inter-cluster {d[~mask].mean():.2f}")
    latentlab.write_tsne_csv(OUT / "demo_tsne.csv", coords,
                             game_ids=same.tolist(), entity_ids=list(range(50)))
    print(f"wrote projections -> {OUT / 'demo_tsne.csv'}")


if __name__ == "__main__":
    main()

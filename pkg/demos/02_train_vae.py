"""Train the autoencoder until it memorizes a small corpus, then persist it.

The run takes ~15 s on a laptop-class CPU.  A longer schedule (the
acceptance suite uses 3000 epochs at hidden size 256) pushes the exact
reconstruction rate past 95%; this demo stops early and reports honestly.

    python3 demos/02_train_vae.py
"""

from pathlib import Path

from entembed import rule_corpus, vae
from entembed.onehot import encode_state, encode_states

OUT = Path(__file__).parent / "out"


def main():
    OUT.mkdir(exist_ok=True)

    config = rule_corpus.SyntheticConfig(games=2, archetypes_per_game=4, states_per_archetype=8)
    corpus = rule_corpus.generate_synthetic_corpus(config, seed=7)
    states = corpus.states[:50]
    data = encode_states(states)
    print(f"training on {len(states)} states ({data.shape[0]}x{data.shape[1]} one-hot matrix)")

    # kl_weight 1/1600 keeps the prior term proportional to the per-bit
    # reconstruction term; with the default 1.0 the prior dominates and the
    # model collapses to the dataset mean.
    model = vae.init_model(hidden_size=128, latent_size=25, seed=7, kl_weight=1 / 1600)
    train_config = vae.TrainConfig(epochs=1200, batch_size=32, lr=0.002, seed=7,
                                   kl_weight=1 / 1600)
    model, history = vae.train(model, data, train_config)

    print("loss trajectory (total / reconstruction / prior):")
    for epoch in (1, 10, 100, 400, 800, 1200):
        row = history[epoch - 1]
        print(f"  epoch {epoch:>4}: {row['total']:.4f} / {row['recon']:.4f} / {row['kl']:.4f}")

    exact = sum(vae.reconstruct(model, encode_state(s)) == s for s in states)
    print(f"exact reconstructions: {exact}/{len(states)}")

    model_path = OUT / "demo_model.txt"
    vae.save_model(model, model_path)
    reloaded = vae.load_model(model_path)
    assert vae.reconstruct(reloaded, encode_state(states[0])) == vae.reconstruct(
        model, encode_state(states[0]))
    print(f"saved and reloaded weight document -> {model_path}")


if __name__ == "__main__":
    main()

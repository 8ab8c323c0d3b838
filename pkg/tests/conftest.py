"""Shared fixtures: a tiny memorizable corpus and a model overfit on it."""

import numpy as np
import pytest

from entembed import onehot, rule_corpus, vae


def well_separated_states():
    """Eight states chosen so every feature differs widely across the set."""
    rows = [
        (0, 8, 4, 0, 0, 79, 17, 0),
        (1, 2, 6, 0, -7, 30, 60, 0),
        (2, 12, 10, -3, 1, 55, 40, 0),
        (3, 5, 5, 0, 0, 10, 85, 0),
        (4, 16, 14, 4, 0, 90, 75, 1),
        (5, 1, 3, 0, -9, 45, 20, 1),
        (6, 9, 9, 2, 2, 66, 50, 1),
        (7, 6, 11, -1, 0, 22, 33, 1),
    ]
    return [rule_corpus.EntityState(*r) for r in rows]


@pytest.fixture(scope="session")
def tiny_states():
    return well_separated_states()


@pytest.fixture(scope="session")
def tiny_inputs(tiny_states):
    return onehot.encode_states(tiny_states)


@pytest.fixture(scope="session")
def overfit_model(tiny_inputs):
    """A model trained until it memorizes the tiny corpus (a few seconds)."""
    model = vae.init_model(hidden_size=64, latent_size=25, seed=3)
    config = vae.TrainConfig(epochs=300, batch_size=2, lr=0.003, seed=3, kl_weight=1.0 / 1600)
    model, _ = vae.train(model, tiny_inputs, config)
    return model


@pytest.fixture(scope="session")
def synth_corpus():
    config = rule_corpus.SyntheticConfig(games=2, archetypes_per_game=4, states_per_archetype=25)
    return rule_corpus.generate_synthetic_corpus(config, seed=7)

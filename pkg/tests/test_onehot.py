"""Codec tests: bit placement, argmax decoding, round-trip properties."""

import numpy as np
import pytest

from entembed.errors import NumericError
from entembed.onehot import (
    SEGMENT_WIDTH,
    VECTOR_SIZE,
    decode_vector,
    decode_vectors,
    encode_state,
    encode_states,
)
from entembed.rule_corpus import EntityState


def random_state(rng):
    return EntityState(
        entity_id=int(rng.integers(0, 100)),
        size_x=int(rng.integers(0, 100)),
        size_y=int(rng.integers(0, 100)),
        vel_x=int(rng.integers(-99, 100)),
        vel_y=int(rng.integers(-99, 100)),
        pos_x=int(rng.integers(0, 100)),
        pos_y=int(rng.integers(0, 100)),
        game_id=int(rng.integers(0, 100)),
    )


def test_known_state_bits():
    state = EntityState(0, 8, 4, 0, 0, 79, 17, 0)
    vec = encode_state(state)
    assert vec.shape == (VECTOR_SIZE,)
    assert sorted(np.nonzero(vec)[0].tolist()) == [100, 308, 504, 700, 900, 1179, 1317, 1500]


def test_negative_velocity_bit():
    vec = encode_state(EntityState(0, 0, 0, -5, 0, 0, 0, 0))
    assert vec[3 * SEGMENT_WIDTH + 95] == 1.0  # index 695
    assert vec[695] == 1.0


def test_all_zero_state_bits():
    vec = encode_state(EntityState(0, 0, 0, 0, 0, 0, 0, 0))
    assert sorted(np.nonzero(vec)[0].tolist()) == [100, 300, 500, 700, 900, 1100, 1300, 1500]


def test_round_trip_random_states():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        state = random_state(rng)
        assert decode_vector(encode_state(state)) == state


def test_encode_injective_on_samples():
    rng = np.random.default_rng(99)
    seen = {}
    for _ in range(500):
        state = random_state(rng)
        key = encode_state(state).tobytes()
        if key in seen:
            assert seen[key] == state
        seen[key] = state


def test_tie_breaks_to_lowest_index():
    vec = np.zeros(VECTOR_SIZE)
    vec[0:SEGMENT_WIDTH] = 0.5  # a whole segment of equal values
    state = decode_vector(vec)
    assert state.entity_id == -100


def test_segment_scale_invariance():
    rng = np.random.default_rng(5)
    vec = rng.random(VECTOR_SIZE)
    base = decode_vector(vec)
    for k in range(8):
        scaled = vec.copy()
        scaled[k * SEGMENT_WIDTH : (k + 1) * SEGMENT_WIDTH] *= 37.5
        assert decode_vector(scaled) == base


def test_decode_soft_peaks():
    # sigmoid-like outputs: low-level noise everywhere, bumps at the target bits
    target = EntityState(0, 8, 4, 0, 0, 79, 17, 0)
    rng = np.random.default_rng(7)
    vec = rng.uniform(0.01, 0.3, size=VECTOR_SIZE)
    for bit in (100, 308, 504, 700, 900, 1179, 1317, 1500):
        vec[bit] = rng.uniform(0.8, 0.99)
    assert decode_vector(vec) == target


def test_encode_rejects_out_of_range():
    with pytest.raises(ValueError, match="outside"):
        encode_state(EntityState(0, 0, 0, 0, 0, 150, 0, 0))
    with pytest.raises(ValueError, match="outside"):
        encode_state(EntityState(0, 0, 0, -101, 0, 0, 0, 0))


def test_decode_rejects_bad_inputs():
    with pytest.raises(ValueError, match="1600"):
        decode_vector(np.zeros(100))
    bad = np.zeros(VECTOR_SIZE)
    bad[3] = np.nan
    with pytest.raises(NumericError):
        decode_vector(bad)


def test_batch_helpers_match_scalar_paths():
    rng = np.random.default_rng(11)
    states = [random_state(rng) for _ in range(20)]
    mat = encode_states(states)
    assert mat.shape == (20, VECTOR_SIZE)
    for row, state in zip(mat, states):
        assert np.array_equal(row, encode_state(state))
    assert decode_vectors(mat) == states

"""One-hot codec for entity states.

Each of the 8 features owns a 200-wide segment of a 1600-dimensional
vector; a feature value v sets bit ``segment*200 + (v + 100)``, so the
signed window [-100, 99] maps onto slot indices [0, 199].  Decoding takes
the per-segment argmax, which also turns continuous reconstructions (for
example sigmoid outputs) back into integer states.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError
from .rule_corpus import NUM_FEATURES, EntityState

SEGMENT_WIDTH = 200
VECTOR_SIZE = NUM_FEATURES * SEGMENT_WIDTH  # 1600
VALUE_OFFSET = 100


def encode_state(state: EntityState) -> np.ndarray:
    """Encode one EntityState as a float64 one-hot vector of length 1600."""
    vec = np.zeros(VECTOR_SIZE, dtype=np.float64)
    for k, value in enumerate(state.as_tuple()):
        slot = value + VALUE_OFFSET
        if not 0 <= slot < SEGMENT_WIDTH:
            raise ValueError(f"feature {k} value {value} outside [-100, 99]")
        vec[k * SEGMENT_WIDTH + slot] = 1.0
    return vec


def encode_states(states) -> np.ndarray:
    """Encode a sequence of states into an (n, 1600) float64 matrix."""
    out = np.zeros((len(states), VECTOR_SIZE), dtype=np.float64)
    for i, s in enumerate(states):
        out[i] = encode_state(s)
    return out


def decode_vector(x) -> EntityState:
    """Decode a 1600-entry real vector via per-segment argmax.

    Ties go to the lowest index.  The decoded value for segment k is
    ``argmax_index - 100``; no range re-validation is applied beyond what
    the segment width forces.
    """
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.shape[0] != VECTOR_SIZE:
        raise ValueError(f"expected {VECTOR_SIZE} entries, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise NumericError("decode_vector: input has non-finite entries")
    segments = arr.reshape(NUM_FEATURES, SEGMENT_WIDTH)
    slots = segments.argmax(axis=1)  # numpy argmax already returns the first maximum
    values = slots - VALUE_OFFSET
    return EntityState.from_sequence(values)


def decode_vectors(xs) -> list[EntityState]:
    arr = np.asarray(xs, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a 2-d array of row vectors")
    return [decode_vector(row) for row in arr]

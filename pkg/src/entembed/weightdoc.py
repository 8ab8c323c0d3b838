"""Versioned plain-text weight documents.

Both the VAE and the PCA reconstructor persist to this one format: a
header line with the format version, a model kind, a JSON metadata line
(hyperparameters, seeds, resolved config), then named array blocks.
Floats are written with repr(), which round-trips float64 bit-exactly, so
a saved model reproduces inference outputs to the last bit.

    entembed-weights v1
    kind: vae
    meta: {"hidden_size": 4, ...}
    array enc_b 4
    0.0 0.0 0.0 0.0
    array enc_w 4 8
    ... one line per row ...
    end
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataFormatError

FORMAT_HEADER = "entembed-weights v1"


def _format_row(row) -> str:
    return " ".join(repr(float(v)) for v in row)


def write_weight_doc(target, kind: str, meta: dict, arrays: dict) -> None:
    """Write a weight document; ``arrays`` maps name -> 1-d or 2-d float array."""
    lines = [FORMAT_HEADER, f"kind: {kind}", "meta: " + json.dumps(meta, sort_keys=True)]
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 1:
            lines.append(f"array {name} {arr.shape[0]}")
            lines.append(_format_row(arr))
        elif arr.ndim == 2:
            lines.append(f"array {name} {arr.shape[0]} {arr.shape[1]}")
            lines.extend(_format_row(row) for row in arr)
        else:
            raise ValueError(f"array {name!r} has unsupported ndim {arr.ndim}")
    lines.append("end")
    text = "\n".join(lines) + "\n"
    if isinstance(target, (str, Path)):
        Path(target).write_text(text, encoding="utf-8")
    else:
        target.write(text)


def _parse_row(line: str, width: int, lineno: int) -> np.ndarray:
    parts = line.split()
    if len(parts) != width:
        raise DataFormatError(f"line {lineno}: expected {width} values, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts], dtype=np.float64)
    except ValueError as exc:
        raise DataFormatError(f"line {lineno}: {exc}") from None


def read_weight_doc(source):
    """Read a weight document; returns (kind, meta, arrays)."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    lines = text.split("\n")
    if not lines or lines[0] != FORMAT_HEADER:
        raise DataFormatError(f"not a weight document (expected {FORMAT_HEADER!r} header)")
    if len(lines) < 3 or not lines[1].startswith("kind: "):
        raise DataFormatError("missing 'kind:' line")
    kind = lines[1][len("kind: ") :].strip()
    if not lines[2].startswith("meta: "):
        raise DataFormatError("missing 'meta:' line")
    try:
        meta = json.loads(lines[2][len("meta: ") :])
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"bad meta JSON: {exc}") from None

    arrays: dict[str, np.ndarray] = {}
    i = 3
    ended = False
    while i < len(lines):
        line = lines[i]
        if not line.strip():
            i += 1
            continue
        if line == "end":
            ended = True
            i += 1
            break
        parts = line.split()
        if parts[0] != "array" or len(parts) not in (3, 4):
            raise DataFormatError(f"line {i + 1}: expected 'array <name> <shape>' or 'end'")
        name = parts[1]
        if name in arrays:
            raise DataFormatError(f"line {i + 1}: duplicate array {name!r}")
        try:
            dims = [int(p) for p in parts[2:]]
        except ValueError:
            raise DataFormatError(f"line {i + 1}: non-integer shape") from None
        if any(d < 1 for d in dims):
            raise DataFormatError(f"line {i + 1}: non-positive dimension in {dims}")
        i += 1
        if len(dims) == 1:
            if i >= len(lines):
                raise DataFormatError(f"array {name!r}: missing data row")
            arrays[name] = _parse_row(lines[i], dims[0], i + 1)
            i += 1
        else:
            rows = []
            for r in range(dims[0]):
                if i >= len(lines):
                    raise DataFormatError(f"array {name!r}: expected {dims[0]} rows, got {r}")
                rows.append(_parse_row(lines[i], dims[1], i + 1))
                i += 1
            arrays[name] = np.vstack(rows)
    if not ended:
        raise DataFormatError("weight document is truncated (no 'end' line)")
    if any(line.strip() for line in lines[i:]):
        raise DataFormatError("trailing content after 'end'")
    return kind, meta, arrays

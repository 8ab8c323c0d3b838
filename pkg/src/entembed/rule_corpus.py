"""Rule-text corpora: parsing, entity-state extraction, synthetic generation, splits.

Rule files are UTF-8 and line oriented.  Every rule is a header line, one
effect line, and one or more condition lines, terminated by a blank line
(or end of file):

    RULE jump_right
    VelocityXFact: [A, 0]->VelocityXFact: [A, 5]
    VelocityXFact: [A, 0]
    VelocityYFact: [A, 0]
    AnimationFact: [A, (8, 4, 3)]
    PositionXFact: [A, 79]
    PositionYFact: [A, 17]

Animation facts carry a triple (the first two entries are the entity's
width and height, the third is ignored); every other fact carries a single
signed integer.  Extraction turns each rule's conditions into one
8-feature mechanical state per entity that has a complete fact set, plus a
second state with the effect's post value substituted in.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DataFormatError, ExtractionError, RuleSyntaxError

log = logging.getLogger(__name__)

FEATURE_NAMES = (
    "entity_id",
    "size_x",
    "size_y",
    "vel_x",
    "vel_y",
    "pos_x",
    "pos_y",
    "game_id",
)
NUM_FEATURES = 8

# Fields that must be non-negative; velocities are the only signed features.
_UNSIGNED_FIELDS = ("entity_id", "size_x", "size_y", "pos_x", "pos_y", "game_id")

MAX_SYMBOLS = 100  # entity and game id capacity: ids live in [0, 99]


class FactKind(Enum):
    ANIMATION = "Animation"
    VELOCITY_X = "VelocityX"
    VELOCITY_Y = "VelocityY"
    POSITION_X = "PositionX"
    POSITION_Y = "PositionY"

    @property
    def arity(self) -> int:
        return 3 if self is FactKind.ANIMATION else 1


_KIND_BY_NAME = {k.value: k for k in FactKind}

# Condition rendering order used by the serializer.
_RENDER_ORDER = (
    FactKind.VELOCITY_X,
    FactKind.VELOCITY_Y,
    FactKind.ANIMATION,
    FactKind.POSITION_X,
    FactKind.POSITION_Y,
)


@dataclass(frozen=True)
class Fact:
    kind: FactKind
    entity: str
    values: tuple[int, ...]


@dataclass(frozen=True)
class RuleRecord:
    name: str
    pre_effect: Fact
    post_effect: Fact
    conditions: tuple[Fact, ...]


@dataclass(frozen=True)
class EntityState:
    """One mechanical state of one entity: 8 signed-integer features."""

    entity_id: int
    size_x: int
    size_y: int
    vel_x: int
    vel_y: int
    pos_x: int
    pos_y: int
    game_id: int

    def as_tuple(self) -> tuple[int, ...]:
        return (
            self.entity_id,
            self.size_x,
            self.size_y,
            self.vel_x,
            self.vel_y,
            self.pos_x,
            self.pos_y,
            self.game_id,
        )

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.int64)

    @classmethod
    def from_sequence(cls, values) -> "EntityState":
        vals = [int(v) for v in values]
        if len(vals) != NUM_FEATURES:
            raise ValueError(f"expected {NUM_FEATURES} features, got {len(vals)}")
        return cls(*vals)

    def validate(self) -> None:
        """Raise ValueError on any out-of-range feature."""
        for name, value in zip(FEATURE_NAMES, self.as_tuple()):
            if abs(value) > 99:
                raise ValueError(f"{name}={value} has magnitude >= 100")
            if name in _UNSIGNED_FIELDS and value < 0:
                raise ValueError(f"{name}={value} must be non-negative")


@dataclass
class Corpus:
    """Deduplicated entity states plus the symbol tables that named them."""

    states: list[EntityState] = field(default_factory=list)
    entity_symbols: dict[str, int] = field(default_factory=dict)
    game_symbols: dict[str, int] = field(default_factory=dict)
    skipped_incomplete: int = 0


# ---------------------------------------------------------------------------
# Parsing


def _syntax_error(message, line_no, col, game_label=""):
    prefix = f"{game_label}: " if game_label else ""
    return RuleSyntaxError(prefix + message, line_no, col)


def _parse_int_token(token, line_no, col, game_label):
    tok = token.strip()
    try:
        return int(tok, 10)
    except ValueError:
        raise _syntax_error(f"non-integer value token {tok!r}", line_no, col, game_label) from None


def _parse_fact(line, pos, line_no, game_label):
    """Parse one fact starting at ``pos`` in ``line``; return (Fact, next_pos).

    Columns in errors are 1-based offsets into the line.
    """
    n = len(line)
    i = pos
    while i < n and line[i].isspace():
        i += 1
    start = i
    colon = line.find(":", i)
    if colon < 0:
        raise _syntax_error("expected a fact like 'VelocityXFact: [A, 0]'", line_no, start + 1, game_label)
    head = line[start:colon].strip()
    if not head.endswith("Fact"):
        raise _syntax_error(f"expected '<kind>Fact:', got {head!r}", line_no, start + 1, game_label)
    kind_name = head[: -len("Fact")]
    kind = _KIND_BY_NAME.get(kind_name)
    if kind is None:
        raise _syntax_error(f"unknown fact kind {kind_name!r}", line_no, start + 1, game_label)
    i = colon + 1
    while i < n and line[i] == " ":
        i += 1
    if i >= n or line[i] != "[":
        raise _syntax_error("expected '[' after fact kind", line_no, i + 1, game_label)
    i += 1
    comma = line.find(",", i)
    if comma < 0:
        raise _syntax_error("expected ',' after entity name", line_no, i + 1, game_label)
    entity = line[i:comma].strip()
    if not entity or any(c in entity for c in "[](),"):
        raise _syntax_error(f"invalid entity name {line[i:comma]!r}", line_no, i + 1, game_label)
    i = comma + 1
    while i < n and line[i] == " ":
        i += 1
    if i < n and line[i] == "(":
        close_paren = line.find(")", i)
        if close_paren < 0:
            raise _syntax_error("unterminated '(' in value tuple", line_no, i + 1, game_label)
        parts = line[i + 1 : close_paren].split(",")
        if len(parts) != 3:
            raise _syntax_error(
                f"value tuples carry exactly 3 integers, got {len(parts)}", line_no, i + 1, game_label
            )
        values = tuple(_parse_int_token(p, line_no, i + 1, game_label) for p in parts)
        i = close_paren + 1
    else:
        close = line.find("]", i)
        if close < 0:
            raise _syntax_error("expected ']' to close the fact", line_no, i + 1, game_label)
        values = (_parse_int_token(line[i:close], line_no, i + 1, game_label),)
        i = close
    while i < n and line[i] == " ":
        i += 1
    if i >= n or line[i] != "]":
        raise _syntax_error("expected ']' to close the fact", line_no, i + 1, game_label)
    i += 1
    if len(values) != kind.arity:
        raise _syntax_error(
            f"{kind.value} facts carry exactly {kind.arity} integer(s), got {len(values)}",
            line_no,
            start + 1,
            game_label,
        )
    return Fact(kind, entity, values), i


def _parse_condition_line(line, line_no, game_label):
    fact, end = _parse_fact(line, 0, line_no, game_label)
    if line[end:].strip():
        raise _syntax_error(f"trailing text after fact: {line[end:].strip()!r}", line_no, end + 1, game_label)
    return fact


def _parse_effect_line(line, line_no, game_label):
    pre, i = _parse_fact(line, 0, line_no, game_label)
    n = len(line)
    while i < n and line[i] == " ":
        i += 1
    if line[i : i + 2] != "->":
        raise _syntax_error("expected '->' between pre- and post-effect", line_no, i + 1, game_label)
    post, end = _parse_fact(line, i + 2, line_no, game_label)
    if line[end:].strip():
        raise _syntax_error(f"trailing text after effect: {line[end:].strip()!r}", line_no, end + 1, game_label)
    if pre.kind is not post.kind:
        raise _syntax_error(
            f"effect kinds mismatched: {pre.kind.value} -> {post.kind.value}", line_no, 1, game_label
        )
    if pre.entity != post.entity:
        raise _syntax_error(
            f"effect entities mismatched: {pre.entity!r} -> {post.entity!r}", line_no, 1, game_label
        )
    return pre, post


def parse_rule_file(text: str, game_label: str = "") -> list[RuleRecord]:
    """Parse whole rule text into RuleRecords, in file order.

    ``game_label`` is used only to prefix error messages.  A rule ends at a
    blank line; end of file also terminates the last rule.
    """
    lines = text.split("\n")
    records: list[RuleRecord] = []
    i = 0
    total = len(lines)
    while i < total:
        if not lines[i].strip():
            i += 1
            continue
        header = lines[i]
        if header.split(None, 1)[0] != "RULE":
            raise _syntax_error("expected 'RULE <name>' header", i + 1, 1, game_label)
        name = header[len("RULE") :].strip()
        if name.endswith(":"):
            name = name[:-1].strip()
        if not name:
            raise _syntax_error("rule name is empty", i + 1, len("RULE") + 1, game_label)
        i += 1
        if i >= total or not lines[i].strip():
            raise _syntax_error(f"rule {name!r} is missing its effect line", i + 1, 1, game_label)
        pre, post = _parse_effect_line(lines[i], i + 1, game_label)
        i += 1
        conditions: list[Fact] = []
        while i < total and lines[i].strip():
            if lines[i].split(None, 1)[0] == "RULE":
                raise _syntax_error(
                    f"rule {name!r} must be terminated by a blank line", i + 1, 1, game_label
                )
            conditions.append(_parse_condition_line(lines[i], i + 1, game_label))
            i += 1
        if not conditions:
            raise _syntax_error(f"rule {name!r} has no condition facts", i + 1, 1, game_label)
        records.append(RuleRecord(name, pre, post, tuple(conditions)))
    return records


def render_fact(fact: Fact) -> str:
    if fact.kind.arity == 3:
        a, b, c = fact.values
        return f"{fact.kind.value}Fact: [{fact.entity}, ({a}, {b}, {c})]"
    return f"{fact.kind.value}Fact: [{fact.entity}, {fact.values[0]}]"


def render_rule(record: RuleRecord) -> str:
    """Serialize one rule back to the file grammar (includes the blank terminator)."""
    lines = [f"RULE {record.name}"]
    lines.append(f"{render_fact(record.pre_effect)}->{render_fact(record.post_effect)}")
    lines.extend(render_fact(f) for f in record.conditions)
    lines.append("")
    return "\n".join(lines) + "\n"


def render_rule_file(records) -> str:
    return "".join(render_rule(r) for r in records)


# ---------------------------------------------------------------------------
# Extraction

_KIND_FIELDS = {
    FactKind.VELOCITY_X: ("vel_x",),
    FactKind.VELOCITY_Y: ("vel_y",),
    FactKind.POSITION_X: ("pos_x",),
    FactKind.POSITION_Y: ("pos_y",),
    FactKind.ANIMATION: ("size_x", "size_y"),
}


def _apply_fact(features: dict, fact: Fact) -> None:
    fields = _KIND_FIELDS[fact.kind]
    for name, value in zip(fields, fact.values):
        features[name] = value


def extract_entity_states(rules, game_label: str, corpus: Corpus | None = None) -> Corpus:
    """Extract deduplicated entity states from parsed rules into a new Corpus.

    Per rule, conditions are grouped by entity name; an entity with all five
    fact kinds present yields its condition state plus the state with the
    effect's post value substituted.  Entities with incomplete fact sets are
    skipped and counted.  Symbol ids are assigned in first-emission order.
    """
    base = corpus if corpus is not None else Corpus()
    states = list(base.states)
    seen = {s.as_tuple() for s in states}
    entity_symbols = dict(base.entity_symbols)
    game_symbols = dict(base.game_symbols)
    skipped = base.skipped_incomplete

    if game_label not in game_symbols:
        if len(game_symbols) >= MAX_SYMBOLS:
            raise ExtractionError(f"more than {MAX_SYMBOLS} distinct games")
        game_symbols[game_label] = len(game_symbols)
    game_id = game_symbols[game_label]

    for rule in rules:
        groups: dict[str, dict[FactKind, Fact]] = {}
        order: list[str] = []
        for fact in rule.conditions:
            if fact.entity not in groups:
                groups[fact.entity] = {}
                order.append(fact.entity)
            # first occurrence of a kind wins within one rule
            groups[fact.entity].setdefault(fact.kind, fact)
        for entity in order:
            kinds = groups[entity]
            if len(kinds) < len(FactKind):
                skipped += 1
                missing = [k.value for k in FactKind if k not in kinds]
                log.debug("rule %r: entity %r missing %s; skipped", rule.name, entity, missing)
                continue
            features: dict[str, int] = {}
            for fact in kinds.values():
                _apply_fact(features, fact)
            variants = [dict(features)]
            if rule.pre_effect.entity == entity:
                post_features = dict(features)
                _apply_fact(post_features, rule.post_effect)
                variants.append(post_features)
            for feats in variants:
                if entity not in entity_symbols:
                    if len(entity_symbols) >= MAX_SYMBOLS:
                        raise ExtractionError(f"more than {MAX_SYMBOLS} distinct entities")
                    entity_symbols[entity] = len(entity_symbols)
                state = EntityState(
                    entity_id=entity_symbols[entity], game_id=game_id, **feats
                )
                try:
                    state.validate()
                except ValueError as exc:
                    raise ExtractionError(
                        f"rule {rule.name!r}, entity {entity!r}: {exc}"
                    ) from None
                key = state.as_tuple()
                if key not in seen:
                    seen.add(key)
                    states.append(state)
    return Corpus(states, entity_symbols, game_symbols, skipped)


# ---------------------------------------------------------------------------
# Synthetic corpora

_ROLE_ORDER = ("player", "bullet", "enemy", "destructible")

# (low, high) inclusive sampling ranges per feature, plus which features a
# rule effect may change for that role.
_ROLE_PROFILES = {
    "player": {
        "size_x": (8, 16),
        "size_y": (8, 16),
        "vel_x": (-3, 3),
        "vel_y": (0, 0),
        "pos_x": (10, 90),
        "pos_y": (70, 95),
        "mutable": ("vel_x", "pos_x"),
    },
    "bullet": {
        "size_x": (1, 3),
        "size_y": (2, 6),
        "vel_x": (0, 0),
        "vel_y": (-9, -4),
        "pos_x": (5, 95),
        "pos_y": (10, 80),
        "mutable": ("pos_y", "pos_x"),
    },
    "enemy": {
        "size_x": (6, 14),
        "size_y": (6, 12),
        "vel_x": (-4, 4),
        "vel_y": (0, 2),
        "pos_x": (5, 95),
        "pos_y": (10, 60),
        "mutable": ("pos_x", "vel_x"),
    },
    "destructible": {
        "size_x": (4, 10),
        "size_y": (4, 10),
        "vel_x": (0, 0),
        "vel_y": (0, 0),
        "pos_x": (5, 95),
        "pos_y": (30, 85),
        "mutable": ("pos_x", "pos_y"),
    },
}

_MUTATION_KIND = {
    "vel_x": FactKind.VELOCITY_X,
    "vel_y": FactKind.VELOCITY_Y,
    "pos_x": FactKind.POSITION_X,
    "pos_y": FactKind.POSITION_Y,
}


@dataclass(frozen=True)
class SyntheticConfig:
    games: int = 2
    archetypes_per_game: int = 4
    states_per_archetype: int = 25

    def validate(self) -> None:
        if min(self.games, self.archetypes_per_game, self.states_per_archetype) < 1:
            raise ValueError("all synthetic counts must be positive")
        if self.games < 2:
            raise ValueError("synthetic corpora need at least two games")
        if self.games > MAX_SYMBOLS:
            raise ValueError(f"games={self.games} exceeds the game-id capacity of {MAX_SYMBOLS}")
        total_entities = self.games * self.archetypes_per_game
        if total_entities > MAX_SYMBOLS:
            raise ValueError(
                f"games*archetypes={total_entities} exceeds the entity-id capacity of {MAX_SYMBOLS}"
            )


def _condition_facts(entity, feats, anim_third):
    anim = Fact(FactKind.ANIMATION, entity, (feats["size_x"], feats["size_y"], anim_third))
    by_kind = {
        FactKind.VELOCITY_X: Fact(FactKind.VELOCITY_X, entity, (feats["vel_x"],)),
        FactKind.VELOCITY_Y: Fact(FactKind.VELOCITY_Y, entity, (feats["vel_y"],)),
        FactKind.ANIMATION: anim,
        FactKind.POSITION_X: Fact(FactKind.POSITION_X, entity, (feats["pos_x"],)),
        FactKind.POSITION_Y: Fact(FactKind.POSITION_Y, entity, (feats["pos_y"],)),
    }
    return tuple(by_kind[k] for k in _RENDER_ORDER)


def generate_synthetic_rules(config: SyntheticConfig, seed: int) -> dict[str, str]:
    """Deterministically generate rule-file text per game label.

    Each archetype is a random walk over its role's mutable features; rule i
    carries the walk's state i as conditions and the step to state i+1 as its
    effect, so parse + extract reproduce the walk exactly.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    files: dict[str, str] = {}
    for g in range(config.games):
        label = f"game{g:02d}"
        rules: list[RuleRecord] = []
        for a in range(config.archetypes_per_game):
            role = _ROLE_ORDER[a % len(_ROLE_ORDER)]
            profile = _ROLE_PROFILES[role]
            entity = f"{role}{a}_g{g}"
            feats = {
                name: int(rng.integers(lo, hi + 1))
                for name, (lo, hi) in profile.items()
                if name != "mutable"
            }
            anim_third = int(rng.integers(0, 10))
            if config.states_per_archetype == 1:
                hold = Fact(FactKind.VELOCITY_X, entity, (feats["vel_x"],))
                rules.append(
                    RuleRecord(f"{entity}_r0", hold, hold, _condition_facts(entity, feats, anim_third))
                )
                continue
            for r in range(config.states_per_archetype - 1):
                feat = profile["mutable"][int(rng.integers(0, len(profile["mutable"])))]
                lo, hi = profile[feat]
                if lo == hi:
                    lo, hi = lo - 1, hi + 1  # degenerate range: allow a one-pixel wiggle
                new_value = int(rng.integers(lo, hi + 1))
                while new_value == feats[feat]:
                    new_value = int(rng.integers(lo, hi + 1))
                pre = Fact(_MUTATION_KIND[feat], entity, (feats[feat],))
                post = Fact(_MUTATION_KIND[feat], entity, (new_value,))
                rules.append(
                    RuleRecord(f"{entity}_r{r}", pre, post, _condition_facts(entity, feats, anim_third))
                )
                feats[feat] = new_value
        files[label] = render_rule_file(rules)
    return files


def generate_synthetic_corpus(config: SyntheticConfig, seed: int) -> Corpus:
    """Generate a seeded synthetic corpus by parsing generated rule files."""
    corpus = Corpus()
    for label, text in generate_synthetic_rules(config, seed).items():
        rules = parse_rule_file(text, label)
        corpus = extract_entity_states(rules, label, corpus)
    return corpus


# ---------------------------------------------------------------------------
# Splitting


def split_dataset(corpus, test_fraction: float, seed: int):
    """Seeded uniform split into (train, test) lists of EntityState.

    ``corpus`` may be a Corpus or any sequence of states.  The test size is
    round(test_fraction * n) clamped to [1, n-1].
    """
    states = list(corpus.states) if isinstance(corpus, Corpus) else list(corpus)
    n = len(states)
    if n == 0:
        raise ValueError("cannot split an empty corpus")
    if n < 2:
        raise ValueError("need at least 2 states to split")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction={test_fraction} must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_test = int(np.floor(test_fraction * n + 0.5))
    n_test = max(1, min(n - 1, n_test))
    test = [states[i] for i in perm[:n_test]]
    train = [states[i] for i in perm[n_test:]]
    return train, test


# ---------------------------------------------------------------------------
# Dataset files

STATE_HEADER = FEATURE_NAMES
SYMBOL_HEADER = ("symbol", "id")


@contextmanager
def _open_for_write(target):
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as f:
            yield f
    else:
        yield target


@contextmanager
def _open_for_read(source):
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as f:
            yield f
    else:
        yield source


def _write_provenance(f, config):
    if config is not None:
        f.write("# config: " + json.dumps(config, sort_keys=True) + "\n")


def write_states(target, states, config: dict | None = None) -> None:
    with _open_for_write(target) as f:
        _write_provenance(f, config)
        writer = csv.writer(f)
        writer.writerow(STATE_HEADER)
        for s in states:
            writer.writerow(s.as_tuple())


def read_states(source) -> list[EntityState]:
    with _open_for_read(source) as f:
        rows = csv.reader(line for line in f if not line.startswith("#"))
        try:
            header = next(rows)
        except StopIteration:
            raise DataFormatError("dataset file is empty") from None
        if tuple(header) != STATE_HEADER:
            raise DataFormatError(f"unexpected dataset header {header!r}")
        states = []
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != NUM_FEATURES:
                raise DataFormatError(f"row {lineno}: expected {NUM_FEATURES} columns, got {len(row)}")
            try:
                states.append(EntityState.from_sequence(int(v) for v in row))
            except ValueError as exc:
                raise DataFormatError(f"row {lineno}: {exc}") from None
    return states


def write_symbols(target, symbols: dict[str, int], config: dict | None = None) -> None:
    with _open_for_write(target) as f:
        _write_provenance(f, config)
        writer = csv.writer(f)
        writer.writerow(SYMBOL_HEADER)
        for symbol, sid in symbols.items():
            writer.writerow((symbol, sid))


def read_symbols(source) -> dict[str, int]:
    with _open_for_read(source) as f:
        rows = csv.reader(line for line in f if not line.startswith("#"))
        try:
            header = next(rows)
        except StopIteration:
            raise DataFormatError("symbol file is empty") from None
        if tuple(header) != SYMBOL_HEADER:
            raise DataFormatError(f"unexpected symbol header {header!r}")
        out: dict[str, int] = {}
        for lineno, row in enumerate(rows, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataFormatError(f"row {lineno}: expected 2 columns")
            try:
                out[row[0]] = int(row[1])
            except ValueError:
                raise DataFormatError(f"row {lineno}: non-integer id {row[1]!r}") from None
    return out

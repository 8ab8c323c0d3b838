"""Parser, extraction, synthetic generation, split, and dataset file tests."""

import io

import numpy as np
import pytest

from entembed import onehot
from entembed.errors import DataFormatError, ExtractionError, RuleSyntaxError
from entembed.rule_corpus import (
    Corpus,
    EntityState,
    Fact,
    FactKind,
    RuleRecord,
    SyntheticConfig,
    extract_entity_states,
    generate_synthetic_corpus,
    generate_synthetic_rules,
    parse_rule_file,
    read_states,
    read_symbols,
    render_rule_file,
    split_dataset,
    write_states,
    write_symbols,
)

JUMP_RULE = """RULE jump_right
VelocityXFact: [A, 0]->VelocityXFact: [A, 5]
VelocityXFact: [A, 0]
VelocityYFact: [A, 0]
AnimationFact: [A, (8, 4, 3)]
PositionXFact: [A, 79]
PositionYFact: [A, 17]
AnimationFact: [B, (5, 6, 3)]
PositionXFact: [B, 93]
PositionYFact: [B, 42]
"""


# ---------------------------------------------------------------------------
# parsing


def test_parse_effect_line():
    records = parse_rule_file(JUMP_RULE, "g")
    assert len(records) == 1
    rule = records[0]
    assert rule.name == "jump_right"
    assert rule.pre_effect == Fact(FactKind.VELOCITY_X, "A", (0,))
    assert rule.post_effect == Fact(FactKind.VELOCITY_X, "A", (5,))
    assert len(rule.conditions) == 8


def test_parse_animation_tuple():
    rule = parse_rule_file(JUMP_RULE, "g")[0]
    anims = [f for f in rule.conditions if f.kind is FactKind.ANIMATION]
    assert Fact(FactKind.ANIMATION, "B", (5, 6, 3)) in anims


def test_parse_empty_file():
    assert parse_rule_file("", "g") == []
    assert parse_rule_file("\n\n\n", "g") == []


def test_parse_multiple_rules_in_order():
    text = JUMP_RULE + "\nRULE second\nPositionXFact: [A, 1]->PositionXFact: [A, 2]\nVelocityXFact: [A, 0]\n"
    records = parse_rule_file(text, "g")
    assert [r.name for r in records] == ["jump_right", "second"]


def test_parse_error_carries_line_and_column():
    bad = "RULE r\nVelocityXFact: [A, x]->VelocityXFact: [A, 5]\nVelocityXFact: [A, 0]\n"
    with pytest.raises(RuleSyntaxError) as err:
        parse_rule_file(bad, "g")
    assert err.value.line == 2
    assert err.value.column > 0
    assert "non-integer" in str(err.value)


def test_parse_rejects_unknown_kind():
    bad = "RULE r\nWarpFact: [A, 1]->WarpFact: [A, 2]\nVelocityXFact: [A, 0]\n"
    with pytest.raises(RuleSyntaxError, match="unknown fact kind"):
        parse_rule_file(bad, "g")


def test_parse_rejects_wrong_arity():
    bad = "RULE r\nVelocityXFact: [A, 0]->VelocityXFact: [A, 5]\nAnimationFact: [A, 7]\n"
    with pytest.raises(RuleSyntaxError, match="exactly 3"):
        parse_rule_file(bad, "g")
    bad2 = "RULE r\nAnimationFact: [A, (1, 2)]->AnimationFact: [A, (1, 2)]\nVelocityXFact: [A, 0]\n"
    with pytest.raises(RuleSyntaxError, match="3 integers"):
        parse_rule_file(bad2, "g")


def test_parse_rejects_mismatched_effect():
    kinds = "RULE r\nVelocityXFact: [A, 0]->VelocityYFact: [A, 5]\nVelocityXFact: [A, 0]\n"
    with pytest.raises(RuleSyntaxError, match="kinds mismatched"):
        parse_rule_file(kinds, "g")
    entities = "RULE r\nVelocityXFact: [A, 0]->VelocityXFact: [B, 5]\nVelocityXFact: [A, 0]\n"
    with pytest.raises(RuleSyntaxError, match="entities mismatched"):
        parse_rule_file(entities, "g")


def test_parse_requires_blank_line_between_rules():
    bad = (
        "RULE one\nVelocityXFact: [A, 0]->VelocityXFact: [A, 5]\nVelocityXFact: [A, 0]\n"
        "RULE two\nVelocityXFact: [A, 0]->VelocityXFact: [A, 5]\nVelocityXFact: [A, 0]\n"
    )
    with pytest.raises(RuleSyntaxError, match="blank line"):
        parse_rule_file(bad, "g")


def test_parse_rejects_missing_conditions_and_effect():
    with pytest.raises(RuleSyntaxError, match="no condition"):
        parse_rule_file("RULE r\nVelocityXFact: [A, 0]->VelocityXFact: [A, 5]\n\n", "g")
    with pytest.raises(RuleSyntaxError, match="missing its effect"):
        parse_rule_file("RULE r\n", "g")


def _random_fact(rng, kind, entity):
    if kind is FactKind.ANIMATION:
        values = tuple(int(v) for v in rng.integers(0, 100, size=3))
    else:
        values = (int(rng.integers(-99, 100)),)
    return Fact(kind, entity, values)


def test_render_parse_round_trip_random_rules():
    # property: serializing and re-parsing reproduces the records exactly
    rng = np.random.default_rng(123)
    kinds = list(FactKind)
    for trial in range(100):
        rules = []
        for r in range(int(rng.integers(1, 4))):
            entity = f"ent{rng.integers(0, 5)}"
            effect_kind = kinds[int(rng.integers(1, len(kinds)))]  # single-valued kinds only
            pre = _random_fact(rng, effect_kind, entity)
            post = Fact(effect_kind, entity, (int(rng.integers(-99, 100)),))
            n_conditions = int(rng.integers(1, 7))
            conditions = tuple(
                _random_fact(rng, kinds[int(rng.integers(0, len(kinds)))], f"ent{rng.integers(0, 5)}")
                for _ in range(n_conditions)
            )
            rules.append(RuleRecord(f"rule_{trial}_{r}", pre, post, conditions))
        assert parse_rule_file(render_rule_file(rules), "g") == rules


# ---------------------------------------------------------------------------
# extraction


def test_extract_emits_condition_and_effect_states():
    rules = parse_rule_file(JUMP_RULE, "g")
    corpus = extract_entity_states(rules, "first_game")
    assert [s.as_tuple() for s in corpus.states] == [
        (0, 8, 4, 0, 0, 79, 17, 0),
        (0, 8, 4, 5, 0, 79, 17, 0),
    ]


def test_extract_skips_incomplete_entity_with_count():
    # entity B above carries only Animation and Position facts
    rules = parse_rule_file(JUMP_RULE, "g")
    corpus = extract_entity_states(rules, "g")
    assert corpus.skipped_incomplete == 1
    assert "B" not in corpus.entity_symbols


def test_extract_is_idempotent():
    rules = parse_rule_file(JUMP_RULE, "g")
    corpus = extract_entity_states(rules, "g")
    again = extract_entity_states(rules, "g", corpus)
    assert len(again.states) == len(corpus.states)
    assert again.entity_symbols == corpus.entity_symbols


def test_extract_assigns_ids_first_seen():
    text = (
        "RULE a\nVelocityXFact: [zig, 0]->VelocityXFact: [zig, 1]\n"
        "VelocityXFact: [zig, 0]\nVelocityYFact: [zig, 0]\nAnimationFact: [zig, (2, 2, 0)]\n"
        "PositionXFact: [zig, 5]\nPositionYFact: [zig, 6]\n"
        "\n"
        "RULE b\nVelocityXFact: [zag, 0]->VelocityXFact: [zag, 1]\n"
        "VelocityXFact: [zag, 0]\nVelocityYFact: [zag, 0]\nAnimationFact: [zag, (3, 3, 0)]\n"
        "PositionXFact: [zag, 7]\nPositionYFact: [zag, 8]\n"
    )
    corpus = extract_entity_states(parse_rule_file(text, "g"), "g")
    assert corpus.entity_symbols == {"zig": 0, "zag": 1}
    assert corpus.game_symbols == {"g": 0}
    second = extract_entity_states(parse_rule_file(text, "g2"), "g2", corpus)
    assert second.game_symbols == {"g": 0, "g2": 1}


def test_extract_rejects_out_of_range_values():
    text = (
        "RULE r\nVelocityXFact: [A, 0]->VelocityXFact: [A, 1]\n"
        "VelocityXFact: [A, 0]\nVelocityYFact: [A, 0]\nAnimationFact: [A, (2, 2, 0)]\n"
        "PositionXFact: [A, 150]\nPositionYFact: [A, 6]\n"
    )
    with pytest.raises(ExtractionError, match="pos_x"):
        extract_entity_states(parse_rule_file(text, "g"), "g")


def test_extract_rejects_negative_position():
    text = (
        "RULE r\nVelocityXFact: [A, 0]->VelocityXFact: [A, 1]\n"
        "VelocityXFact: [A, 0]\nVelocityYFact: [A, 0]\nAnimationFact: [A, (2, 2, 0)]\n"
        "PositionXFact: [A, -4]\nPositionYFact: [A, 6]\n"
    )
    with pytest.raises(ExtractionError, match="non-negative"):
        extract_entity_states(parse_rule_file(text, "g"), "g")


def _complete_rule(name, entity):
    return (
        f"RULE {name}\nVelocityXFact: [{entity}, 0]->VelocityXFact: [{entity}, 1]\n"
        f"VelocityXFact: [{entity}, 0]\nVelocityYFact: [{entity}, 0]\n"
        f"AnimationFact: [{entity}, (2, 2, 0)]\n"
        f"PositionXFact: [{entity}, 5]\nPositionYFact: [{entity}, 6]\n\n"
    )


def test_extract_entity_capacity():
    text = "".join(_complete_rule(f"r{i}", f"e{i}") for i in range(101))
    with pytest.raises(ExtractionError, match="100 distinct entities"):
        extract_entity_states(parse_rule_file(text, "g"), "g")


def test_extract_game_capacity():
    corpus = Corpus()
    rules = parse_rule_file(_complete_rule("r", "e"), "g")
    for i in range(100):
        corpus.game_symbols[f"pad{i}"] = i
    with pytest.raises(ExtractionError, match="100 distinct games"):
        extract_entity_states(rules, "one_too_many", corpus)


def test_entity_state_validate():
    EntityState(0, 1, 2, -3, 4, 5, 6, 7).validate()
    with pytest.raises(ValueError):
        EntityState(0, 1, 2, -3, 4, 5, 6, 100).validate()
    with pytest.raises(ValueError):
        EntityState(-1, 1, 2, 3, 4, 5, 6, 7).validate()


# ---------------------------------------------------------------------------
# synthetic corpora


def test_synthetic_deterministic():
    config = SyntheticConfig(games=2, archetypes_per_game=4, states_per_archetype=25)
    a = generate_synthetic_corpus(config, seed=7)
    b = generate_synthetic_corpus(config, seed=7)
    assert [s.as_tuple() for s in a.states] == [s.as_tuple() for s in b.states]
    assert a.entity_symbols == b.entity_symbols
    c = generate_synthetic_corpus(config, seed=8)
    assert [s.as_tuple() for s in a.states] != [s.as_tuple() for s in c.states]


def test_synthetic_counts(synth_corpus):
    assert len(synth_corpus.states) <= 200
    assert len(synth_corpus.entity_symbols) == 8
    assert len(synth_corpus.game_symbols) == 2


def test_synthetic_states_all_encodable(synth_corpus):
    # every generated state must satisfy the field ranges the encoder enforces
    for state in synth_corpus.states:
        state.validate()
        vec = onehot.encode_state(state)
        assert vec.sum() == 8.0


def test_synthetic_rule_files_parse(tmp_path):
    config = SyntheticConfig(games=2, archetypes_per_game=2, states_per_archetype=3)
    files = generate_synthetic_rules(config, seed=1)
    assert sorted(files) == ["game00", "game01"]
    for label, text in files.items():
        assert parse_rule_file(text, label)


def test_synthetic_config_validation():
    with pytest.raises(ValueError, match="at least two games"):
        SyntheticConfig(games=1).validate()
    with pytest.raises(ValueError, match="entity-id capacity"):
        SyntheticConfig(games=21, archetypes_per_game=5).validate()
    with pytest.raises(ValueError, match="positive"):
        SyntheticConfig(games=2, states_per_archetype=0).validate()


def test_synthetic_single_state_chains():
    config = SyntheticConfig(games=2, archetypes_per_game=2, states_per_archetype=1)
    corpus = generate_synthetic_corpus(config, seed=5)
    # an identity effect adds no second state, so one state per archetype
    assert len(corpus.states) == 4


# ---------------------------------------------------------------------------
# splitting


def test_split_ninety_ten(synth_corpus):
    states = synth_corpus.states[:100]
    train, test = split_dataset(states, 0.1, seed=0)
    assert len(train) == 90
    assert len(test) == 10


def test_split_clamps_tiny_sets(synth_corpus):
    train, test = split_dataset(synth_corpus.states[:2], 0.1, seed=0)
    assert len(train) == 1 and len(test) == 1


def test_split_partitions(synth_corpus):
    states = synth_corpus.states
    for seed in range(5):
        train, test = split_dataset(states, 0.25, seed=seed)
        assert len(train) + len(test) == len(states)
        train_keys = {s.as_tuple() for s in train}
        test_keys = {s.as_tuple() for s in test}
        assert train_keys.isdisjoint(test_keys)
        assert train_keys | test_keys == {s.as_tuple() for s in states}


def test_split_seed_determinism(synth_corpus):
    a = split_dataset(synth_corpus, 0.1, seed=11)
    b = split_dataset(synth_corpus, 0.1, seed=11)
    assert [s.as_tuple() for s in a[1]] == [s.as_tuple() for s in b[1]]


def test_split_rejects_bad_inputs(synth_corpus):
    with pytest.raises(ValueError):
        split_dataset([], 0.1, seed=0)
    with pytest.raises(ValueError):
        split_dataset(synth_corpus, 0.0, seed=0)
    with pytest.raises(ValueError):
        split_dataset(synth_corpus, 1.0, seed=0)


# ---------------------------------------------------------------------------
# dataset files


def test_states_csv_round_trip(synth_corpus, tmp_path):
    path = tmp_path / "data.csv"
    write_states(path, synth_corpus.states, {"seed": 7})
    back = read_states(path)
    assert [s.as_tuple() for s in back] == [s.as_tuple() for s in synth_corpus.states]
    assert path.read_text().startswith("# config:")


def test_symbols_csv_round_trip(synth_corpus, tmp_path):
    path = tmp_path / "symbols.csv"
    write_symbols(path, synth_corpus.entity_symbols)
    assert read_symbols(path) == synth_corpus.entity_symbols


def test_read_states_rejects_bad_header():
    with pytest.raises(DataFormatError, match="header"):
        read_states(io.StringIO("a,b,c\n1,2,3\n"))


def test_read_states_rejects_bad_row():
    good_header = "entity_id,size_x,size_y,vel_x,vel_y,pos_x,pos_y,game_id\n"
    with pytest.raises(DataFormatError, match="row 2"):
        read_states(io.StringIO(good_header + "1,2,3\n"))
    with pytest.raises(DataFormatError, match="row 2"):
        read_states(io.StringIO(good_header + "1,2,3,4,5,6,7,x\n"))

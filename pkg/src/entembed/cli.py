"""Command-line pipeline: generate/parse corpora, split, train, evaluate, explore.

Every command resolves its settings as defaults <- JSON config file <-
explicit flags, validates them before touching the filesystem, embeds the
resolved configuration into each artifact it writes (as ``# config:``
comment lines or weight-document metadata), and writes atomically via a
temp file + rename so interrupted runs never leave partial artifacts.

Exit codes: 0 success, 2 usage/validation error, 3 data or file-format
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import baselines, evalharness, latentlab, rule_corpus, vae
from .errors import DataFormatError, EntembedError, NumericError
from .onehot import decode_vector, encode_states

PROG = "entembed"


@contextmanager
def atomic_write(path):
    """Yield a text handle to a temp file that replaces ``path`` on success."""
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise ValueError(f"missing required option(s): {flags}")


def _provenance(cfg: dict, command: str) -> dict:
    clean = {k: v for k, v in cfg.items() if v is not None}
    return {"command": command, **clean}


def _read_states(path) -> list:
    states = rule_corpus.read_states(path)
    if not states:
        raise DataFormatError(f"{path}: dataset has no rows")
    return states


# ---------------------------------------------------------------------------
# Commands


def cmd_gen_synthetic(cfg: dict) -> None:
    _require(cfg, "out")
    config = rule_corpus.SyntheticConfig(
        games=int(cfg["games"]),
        archetypes_per_game=int(cfg["archetypes"]),
        states_per_archetype=int(cfg["states"]),
    )
    config.validate()
    seed = int(cfg["seed"])
    prov = _provenance(cfg, "gen-synthetic")
    out_dir = Path(cfg["out"])
    rule_files = rule_corpus.generate_synthetic_rules(config, seed)
    corpus = rule_corpus.Corpus()
    for label, text in rule_files.items():
        rules = rule_corpus.parse_rule_file(text, label)
        corpus = rule_corpus.extract_entity_states(rules, label, corpus)
    out_dir.mkdir(parents=True, exist_ok=True)
    for label, text in rule_files.items():
        with atomic_write(out_dir / f"{label}.rules") as f:
            f.write(text)
    with atomic_write(out_dir / "dataset.csv") as f:
        rule_corpus.write_states(f, corpus.states, prov)
    with atomic_write(out_dir / "entities.csv") as f:
        rule_corpus.write_symbols(f, corpus.entity_symbols, prov)
    with atomic_write(out_dir / "games.csv") as f:
        rule_corpus.write_symbols(f, corpus.game_symbols, prov)
    print(f"wrote {len(corpus.states)} states across {config.games} games to {out_dir}")


def _iter_rule_paths(path: Path):
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.is_file())
        if not files:
            raise DataFormatError(f"{path}: no rule files in directory")
        return files
    return [path]


def cmd_parse(cfg: dict) -> None:
    _require(cfg, "game", "out")
    entries = cfg["game"]
    if isinstance(entries, str):
        entries = [entries]
    pairs = []
    for item in entries:
        label, sep, path = str(item).partition("=")
        if not sep or not label or not path:
            raise ValueError(f"--game expects label=path, got {item!r}")
        pairs.append((label, Path(path)))
    prov = _provenance(cfg, "parse")
    corpus = rule_corpus.Corpus()
    for label, path in pairs:
        if not path.exists():
            raise FileNotFoundError(f"rule path {path} does not exist")
        for rule_path in _iter_rule_paths(path):
            text = rule_path.read_text(encoding="utf-8")
            rules = rule_corpus.parse_rule_file(text, f"{label}:{rule_path.name}")
            corpus = rule_corpus.extract_entity_states(rules, label, corpus)
    out = Path(cfg["out"])
    with atomic_write(out) as f:
        rule_corpus.write_states(f, corpus.states, prov)
    with atomic_write(out.with_suffix(".entities.csv")) as f:
        rule_corpus.write_symbols(f, corpus.entity_symbols, prov)
    with atomic_write(out.with_suffix(".games.csv")) as f:
        rule_corpus.write_symbols(f, corpus.game_symbols, prov)
    note = f" ({corpus.skipped_incomplete} incomplete entity group(s) skipped)" if corpus.skipped_incomplete else ""
    print(f"wrote {len(corpus.states)} states to {out}{note}")


def cmd_split(cfg: dict) -> None:
    _require(cfg, "data", "out_train", "out_test")
    frac = float(cfg["test_frac"])
    seed = int(cfg["seed"])
    states = _read_states(cfg["data"])
    train, test = rule_corpus.split_dataset(states, frac, seed)
    prov = _provenance(cfg, "split")
    with atomic_write(cfg["out_train"]) as f:
        rule_corpus.write_states(f, train, prov)
    with atomic_write(cfg["out_test"]) as f:
        rule_corpus.write_states(f, test, prov)
    print(f"split {len(states)} states into {len(train)} train / {len(test)} test")


def cmd_train(cfg: dict) -> None:
    _require(cfg, "train", "model_out")
    config = vae.TrainConfig(
        epochs=int(cfg["epochs"]),
        batch_size=int(cfg["batch"]),
        lr=float(cfg["lr"]),
        seed=int(cfg["seed"]),
        kl_weight=float(cfg["kl_weight"]),
        shuffle=not cfg["no_shuffle"],
    )
    config.validate()
    states = _read_states(cfg["train"])
    model = vae.init_model(
        hidden_size=int(cfg["hidden"]),
        latent_size=int(cfg["latent"]),
        seed=int(cfg["seed"]),
        kl_weight=float(cfg["kl_weight"]),
        relu_latent_heads=bool(cfg["relu_heads"]),
    )
    data = encode_states(states)
    model, history = vae.train(model, data, config)
    prov = _provenance(cfg, "train")
    with atomic_write(cfg["model_out"]) as f:
        vae.save_model(model, f, extra_meta={"config": prov})
    if cfg.get("history_out"):
        with atomic_write(cfg["history_out"]) as f:
            f.write("# config: " + json.dumps(prov, sort_keys=True) + "\n")
            writer = csv.writer(f)
            writer.writerow(("epoch", "total", "recon", "kl"))
            for epoch, row in enumerate(history, start=1):
                writer.writerow((epoch, repr(row["total"]), repr(row["recon"]), repr(row["kl"])))
    last = f"; final total loss {history[-1]['total']:.6f}" if history else ""
    print(f"trained {config.epochs} epoch(s) on {len(states)} states{last}")


def cmd_eval(cfg: dict) -> None:
    _require(cfg, "model", "train", "test", "report_out", "per_entity_out")
    sample_frac = float(cfg["sample_frac"])
    if not 0 < sample_frac <= 1:
        raise ValueError("--sample-frac must lie in (0, 1]")
    model = vae.load_model(cfg["model"])
    train = _read_states(cfg["train"])
    test = _read_states(cfg["test"])
    k = int(cfg["k"])
    pca = baselines.pca_fit(encode_states(train), k, seed=int(cfg["seed"]))
    report = evalharness.evaluate(model, pca, train, test, allow_overlap=bool(cfg["allow_overlap"]))
    rows = evalharness.sample_comparison_rows(report, sample_frac, int(cfg["seed"]))
    prov = _provenance(cfg, "eval")
    with atomic_write(cfg["report_out"]) as f:
        evalharness.write_report(f, report, prov)
    with atomic_write(cfg["per_entity_out"]) as f:
        evalharness.write_per_entity_csv(f, rows, prov)
    means = ", ".join(
        f"{m}: j={report.per_method[m]['mean_jaccard']:.4f}/e={report.per_method[m]['mean_euclidean']:.4f}"
        for m in evalharness.METHODS
    )
    print(f"evaluated {len(test)} test states ({means}); exact match {report.exact_match_rate:.4f}")


def _embed_header(latent_size: int):
    return ["index"] + [f"z{i + 1}" for i in range(latent_size)] + ["game_id", "entity_id"]


def cmd_embed(cfg: dict) -> None:
    _require(cfg, "model", "data", "out")
    model = vae.load_model(cfg["model"])
    states = _read_states(cfg["data"])
    mus = vae.embed(model, encode_states(states))
    prov = _provenance(cfg, "embed")
    with atomic_write(cfg["out"]) as f:
        f.write("# config: " + json.dumps(prov, sort_keys=True) + "\n")
        writer = csv.writer(f)
        writer.writerow(_embed_header(model.latent_size))
        for i, (state, mu) in enumerate(zip(states, mus)):
            writer.writerow([i] + [repr(float(v)) for v in mu] + [state.game_id, state.entity_id])
    print(f"embedded {len(states)} states into {cfg['out']}")


def read_embeddings(path):
    """Read an embed-command CSV back: (matrix, game_ids, entity_ids)."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = csv.reader(line for line in f if not line.startswith("#"))
        header = next(rows, None)
        if not header or header[0] != "index" or header[-2:] != ["game_id", "entity_id"]:
            raise DataFormatError(f"{path}: not an embedding CSV")
        width = len(header) - 3
        zs, games, entities = [], [], []
        for row in rows:
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{path}: ragged row of {len(row)} columns")
            zs.append([float(v) for v in row[1 : 1 + width]])
            games.append(int(row[-2]))
            entities.append(int(row[-1]))
    if not zs:
        raise DataFormatError(f"{path}: embedding CSV has no rows")
    return np.array(zs, dtype=np.float64), games, entities


def _read_latents(path, latent_size: int) -> np.ndarray:
    """Accept either an embed-command CSV or headerless rows of floats."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        first = None
        for line in f:
            if not line.startswith("#") and line.strip():
                first = next(csv.reader([line]))
                break
    if first is None:
        raise DataFormatError(f"{path}: no latent rows")
    try:
        [float(v) for v in first]
        headerless = True
    except ValueError:
        headerless = False
    if not headerless:
        z, _, _ = read_embeddings(path)
    else:
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = csv.reader(line for line in f if not line.startswith("#") and line.strip())
            z = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != latent_size:
        raise DataFormatError(
            f"{path}: expected {latent_size}-wide latent rows, got shape {z.shape}"
        )
    return z


def cmd_decode(cfg: dict) -> None:
    _require(cfg, "model", "latent", "out")
    model = vae.load_model(cfg["model"])
    z = _read_latents(cfg["latent"], model.latent_size)
    states = [decode_vector(vae.decode(model, row)) for row in z]
    prov = _provenance(cfg, "decode")
    with atomic_write(cfg["out"]) as f:
        rule_corpus.write_states(f, states, prov)
    print(f"decoded {len(states)} latent rows into {cfg['out']}")


ROLE_STATE_HEADER = ("role",) + rule_corpus.STATE_HEADER


def _write_role_states(target_or_handle, rows, prov):
    """CSV of (role label, entity state) pairs used by the explore commands."""

    def _emit(f):
        f.write("# config: " + json.dumps(prov, sort_keys=True) + "\n")
        writer = csv.writer(f)
        writer.writerow(ROLE_STATE_HEADER)
        for role, state in rows:
            writer.writerow((role,) + state.as_tuple())

    if target_or_handle is None:
        _emit(sys.stdout)
    else:
        with atomic_write(target_or_handle) as f:
            _emit(f)


def cmd_explore_average(cfg: dict) -> None:
    _require(cfg, "model", "data", "i", "j")
    model = vae.load_model(cfg["model"])
    states = _read_states(cfg["data"])
    i, j = int(cfg["i"]), int(cfg["j"])
    for idx in (i, j):
        if not 0 <= idx < len(states):
            raise ValueError(f"index {idx} outside dataset of {len(states)} states")
    result = latentlab.average_pair(states[i], states[j], model)
    rows = [
        ("a", states[i]),
        ("b", states[j]),
        ("vector_avg", result["vector_avg"]),
        ("latent_avg", result["latent_avg"]),
    ]
    _write_role_states(cfg.get("out"), rows, _provenance(cfg, "explore average"))


def cmd_explore_perturb(cfg: dict) -> None:
    _require(cfg, "model", "data", "i")
    model = vae.load_model(cfg["model"])
    states = _read_states(cfg["data"])
    i = int(cfg["i"])
    if not 0 <= i < len(states):
        raise ValueError(f"index {i} outside dataset of {len(states)} states")
    variants = latentlab.perturb(
        states[i],
        n=int(cfg["n"]),
        offset_range=float(cfg["range"]),
        seed=int(cfg["seed"]),
        model=model,
        distribution=str(cfg["distribution"]),
    )
    rows = [("center", states[i])] + [(f"perturbed{k}", s) for k, s in enumerate(variants)]
    _write_role_states(cfg.get("out"), rows, _provenance(cfg, "explore perturb"))


def cmd_explore_table(cfg: dict) -> None:
    _require(cfg, "model", "data", "indices")
    model = vae.load_model(cfg["model"])
    states = _read_states(cfg["data"])
    indices = [int(v) for v in str(cfg["indices"]).split(",") if v.strip()]
    if len(indices) < 2:
        raise ValueError("--indices needs at least two comma-separated row numbers")
    for idx in indices:
        if not 0 <= idx < len(states):
            raise ValueError(f"index {idx} outside dataset of {len(states)} states")
    chosen = [states[idx] for idx in indices]
    table = latentlab.distance_table(chosen, model)
    labels = [f"row{idx}_e{s.entity_id}_g{s.game_id}" for idx, s in zip(indices, chosen)]
    prov = _provenance(cfg, "explore table")
    if cfg.get("out"):
        with atomic_write(cfg["out"]) as f:
            latentlab.write_distance_csv(f, table, labels, prov)
    else:
        latentlab.write_distance_csv(sys.stdout, table, labels, prov)


def cmd_tsne(cfg: dict) -> None:
    _require(cfg, "embeddings", "out")
    config = latentlab.TsneConfig(
        perplexity=float(cfg["perplexity"]),
        iterations=int(cfg["iters"]),
        learning_rate=float(cfg["lr"]),
        seed=int(cfg["seed"]),
    )
    config.validate()
    z, game_ids, entity_ids = read_embeddings(cfg["embeddings"])
    coords = latentlab.tsne(z, config)
    prov = _provenance(cfg, "tsne")
    with atomic_write(cfg["out"]) as f:
        latentlab.write_tsne_csv(f, coords, game_ids, entity_ids, prov)
    print(f"projected {coords.shape[0]} embeddings into {cfg['out']}")


# ---------------------------------------------------------------------------
# Argument plumbing

_S = argparse.SUPPRESS


def _add(sub, name, defaults, handler, configure, help_text):
    sp = sub.add_parser(name, help=help_text)
    sp.add_argument("--config", default=_S, help="JSON config file (defaults < file < flags)")
    configure(sp)
    sp.set_defaults(_handler=handler, _defaults=defaults, _command=name)
    return sp


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Entity-embedding pipeline: corpora, one-hot codec, VAE, baselines, latent tools.",
    )
    sub = parser.add_subparsers(dest="_subcommand", metavar="command")

    def gen_args(sp):
        sp.add_argument("--games", type=int, default=_S)
        sp.add_argument("--archetypes", type=int, default=_S)
        sp.add_argument("--states", type=int, default=_S)
        sp.add_argument("--seed", type=int, default=_S)
        sp.add_argument("--out", default=_S, help="output directory")

    _add(
        sub,
        "gen-synthetic",
        {"games": 2, "archetypes": 4, "states": 25, "seed": 0, "out": None},
        cmd_gen_synthetic,
        gen_args,
        "generate a seeded synthetic rule corpus and its dataset CSV",
    )

    def parse_args_(sp):
        sp.add_argument("--game", action="append", default=_S, metavar="LABEL=PATH")
        sp.add_argument("--out", default=_S, help="dataset CSV path")

    _add(
        sub,
        "parse",
        {"game": None, "out": None},
        cmd_parse,
        parse_args_,
        "parse rule files into a dataset CSV plus symbol tables",
    )

    def split_args(sp):
        sp.add_argument("--data", default=_S)
        sp.add_argument("--test-frac", dest="test_frac", type=float, default=_S)
        sp.add_argument("--seed", type=int, default=_S)
        sp.add_argument("--out-train", dest="out_train", default=_S)
        sp.add_argument("--out-test", dest="out_test", default=_S)

    _add(
        sub,
        "split",
        {"data": None, "test_frac": 0.1, "seed": 0, "out_train": None, "out_test": None},
        cmd_split,
        split_args,
        "split a dataset CSV into train/test CSVs",
    )

    def train_args(sp):
        sp.add_argument("--train", default=_S)
        sp.add_argument("--hidden", type=int, default=_S)
        sp.add_argument("--latent", type=int, default=_S)
        sp.add_argument("--epochs", type=int, default=_S)
        sp.add_argument("--batch", type=int, default=_S)
        sp.add_argument("--lr", type=float, default=_S)
        sp.add_argument("--kl-weight", dest="kl_weight", type=float, default=_S)
        sp.add_argument("--seed", type=int, default=_S)
        sp.add_argument("--relu-heads", dest="relu_heads", action="store_true", default=_S)
        sp.add_argument("--no-shuffle", dest="no_shuffle", action="store_true", default=_S)
        sp.add_argument("--model-out", dest="model_out", default=_S)
        sp.add_argument("--history-out", dest="history_out", default=_S)

    _add(
        sub,
        "train",
        {
            "train": None, "hidden": 256, "latent": 25, "epochs": 500, "batch": 32,
            "lr": 0.001, "kl_weight": 1.0, "seed": 0, "relu_heads": False,
            "no_shuffle": False, "model_out": None, "history_out": None,
        },
        cmd_train,
        train_args,
        "train the VAE on a dataset CSV and persist the weight document",
    )

    def eval_args(sp):
        sp.add_argument("--model", default=_S)
        sp.add_argument("--train", default=_S)
        sp.add_argument("--test", default=_S)
        sp.add_argument("--k", type=int, default=_S, help="PCA component count")
        sp.add_argument("--seed", type=int, default=_S)
        sp.add_argument("--sample-frac", dest="sample_frac", type=float, default=_S,
                        help="fraction of test rows exported per-entity")
        sp.add_argument("--allow-overlap", dest="allow_overlap", action="store_true", default=_S)
        sp.add_argument("--report-out", dest="report_out", default=_S)
        sp.add_argument("--per-entity-out", dest="per_entity_out", default=_S)

    _add(
        sub,
        "eval",
        {
            "model": None, "train": None, "test": None, "k": 25, "seed": 0,
            "sample_frac": 0.2, "allow_overlap": False,
            "report_out": None, "per_entity_out": None,
        },
        cmd_eval,
        eval_args,
        "score VAE, PCA, and nearest-entity baselines on held-out states",
    )

    def embed_args(sp):
        sp.add_argument("--model", default=_S)
        sp.add_argument("--data", default=_S)
        sp.add_argument("--out", default=_S)

    _add(
        sub,
        "embed",
        {"model": None, "data": None, "out": None},
        cmd_embed,
        embed_args,
        "write mean-head embeddings of a dataset to CSV",
    )

    def decode_args(sp):
        sp.add_argument("--model", default=_S)
        sp.add_argument("--latent", default=_S, help="CSV of latent rows (embed output or bare floats)")
        sp.add_argument("--out", default=_S)

    _add(
        sub,
        "decode",
        {"model": None, "latent": None, "out": None},
        cmd_decode,
        decode_args,
        "decode latent rows back into entity states",
    )

    explore = sub.add_parser("explore", help="latent-space qualitative tools")
    esub = explore.add_subparsers(dest="_subcommand2", metavar="tool")

    def avg_args(sp):
        sp.add_argument("--model", default=_S)
        sp.add_argument("--data", default=_S)
        sp.add_argument("--i", type=int, default=_S)
        sp.add_argument("--j", type=int, default=_S)
        sp.add_argument("--out", default=_S)

    _add(
        esub,
        "average",
        {"model": None, "data": None, "i": None, "j": None, "out": None},
        cmd_explore_average,
        avg_args,
        "integer-floor vs latent-midpoint average of two dataset rows",
    )

    def perturb_args(sp):
        sp.add_argument("--model", default=_S)
        sp.add_argument("--data", default=_S)
        sp.add_argument("--i", type=int, default=_S)
        sp.add_argument("--n", type=int, default=_S)
        sp.add_argument("--range", type=float, default=_S)
        sp.add_argument("--seed", type=int, default=_S)
        sp.add_argument("--distribution", choices=("uniform", "truncated_normal"), default=_S)
        sp.add_argument("--out", default=_S)

    _add(
        esub,
        "perturb",
        {
            "model": None, "data": None, "i": None, "n": 8, "range": 0.2,
            "seed": 0, "distribution": "uniform", "out": None,
        },
        cmd_explore_perturb,
        perturb_args,
        "decode random nudges around one dataset row's embedding",
    )

    def table_args(sp):
        sp.add_argument("--model", default=_S)
        sp.add_argument("--data", default=_S)
        sp.add_argument("--indices", default=_S, help="comma-separated dataset row numbers")
        sp.add_argument("--out", default=_S)

    _add(
        esub,
        "table",
        {"model": None, "data": None, "indices": None, "out": None},
        cmd_explore_table,
        table_args,
        "pairwise latent distances between chosen dataset rows",
    )

    def tsne_args(sp):
        sp.add_argument("--embeddings", default=_S, help="CSV produced by the embed command")
        sp.add_argument("--perplexity", type=float, default=_S)
        sp.add_argument("--iters", type=int, default=_S)
        sp.add_argument("--lr", type=float, default=_S)
        sp.add_argument("--seed", type=int, default=_S)
        sp.add_argument("--out", default=_S)

    _add(
        sub,
        "tsne",
        {"embeddings": None, "perplexity": 30.0, "iters": 1000, "lr": 200.0, "seed": 0, "out": None},
        cmd_tsne,
        tsne_args,
        "project an embedding CSV to seeded 2-D t-SNE coordinates",
    )

    return parser


def resolve_config(namespace: argparse.Namespace) -> tuple:
    """Merge defaults <- config file <- provided flags into one dict."""
    ns = dict(vars(namespace))
    ns.pop("_subcommand", None)
    ns.pop("_subcommand2", None)
    handler = ns.pop("_handler")
    defaults = dict(ns.pop("_defaults"))
    command = ns.pop("_command")
    config_path = ns.pop("config", None)
    file_cfg = {}
    if config_path:
        with open(config_path, "r", encoding="utf-8") as f:
            file_cfg = json.load(f)
        if not isinstance(file_cfg, dict):
            raise DataFormatError(f"{config_path}: config must be a JSON object")
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise ValueError(f"config file keys not valid for {command!r}: {', '.join(unknown)}")
    merged = {**defaults, **file_cfg, **ns}
    return handler, merged


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "_handler"):
        parser.print_help(sys.stderr)
        return 2
    try:
        handler, cfg = resolve_config(args)
        handler(cfg)
        return 0
    except NumericError as exc:
        print(f"error: kind=numeric exit=4 {exc}", file=sys.stderr)
        return 4
    except (EntembedError, FileNotFoundError, IsADirectoryError, json.JSONDecodeError) as exc:
        print(f"error: kind=data exit=3 {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: kind=usage exit=2 {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

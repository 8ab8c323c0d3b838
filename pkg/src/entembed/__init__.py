"""Learned latent representations of game entities, built from rule text.

Pipeline: parse rule text (or generate synthetic corpora) into 8-feature
integer entity states, one-hot encode them into 1600-dim vectors, train a
small from-scratch VAE to a 25-dim latent space, and compare it against
PCA and nearest-entity baselines; latent tools cover averaging,
perturbation, distance tables, and t-SNE projection.
"""

from .errors import (
    DataFormatError,
    EntembedError,
    ExtractionError,
    NumericError,
    RuleSyntaxError,
)
from .rule_corpus import (
    Corpus,
    EntityState,
    Fact,
    FactKind,
    RuleRecord,
    SyntheticConfig,
    extract_entity_states,
    generate_synthetic_corpus,
    parse_rule_file,
    split_dataset,
)
from .onehot import decode_vector, encode_state
from .vae import TrainConfig, VaeModel, init_model, load_model, reconstruct, save_model, train
from .baselines import PcaModel, nearest_entity, pca_fit, pca_reconstruct
from .evalharness import (
    EvalReport,
    euclidean_distance,
    evaluate,
    jaccard_distance,
    per_entity_comparison,
)
from .latentlab import TsneConfig, average_pair, distance_table, perturb, tsne

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "DataFormatError",
    "EntembedError",
    "EntityState",
    "EvalReport",
    "ExtractionError",
    "Fact",
    "FactKind",
    "NumericError",
    "PcaModel",
    "RuleRecord",
    "RuleSyntaxError",
    "SyntheticConfig",
    "TrainConfig",
    "TsneConfig",
    "VaeModel",
    "average_pair",
    "decode_vector",
    "distance_table",
    "encode_state",
    "euclidean_distance",
    "evaluate",
    "extract_entity_states",
    "generate_synthetic_corpus",
    "init_model",
    "jaccard_distance",
    "load_model",
    "nearest_entity",
    "parse_rule_file",
    "pca_fit",
    "pca_reconstruct",
    "per_entity_comparison",
    "perturb",
    "reconstruct",
    "save_model",
    "split_dataset",
    "train",
    "tsne",
]

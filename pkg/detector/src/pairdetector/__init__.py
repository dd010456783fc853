"""Toy Transformer classifier for equivalent basic-block pair datasets."""

from .data import (
    PairExample,
    Vocabulary,
    encode_pair_tokens,
    load_pairs,
    shuffle_labels,
    split_examples,
    synthetic_corpus,
)
from .errors import DetectorError, SchemaError, SequenceTooLongError, SingleClassError
from .model import DetectorConfig, PairDetector
from .train import (
    evaluate_scores,
    load_checkpoint,
    roc_metrics,
    run_training,
    save_checkpoint,
    train_model,
)

__version__ = "0.1.0"

"""Command line for the detector: train, evaluate, generate synthetic data."""

from __future__ import annotations

import argparse
import json
import sys

from .data import load_pairs, synthetic_corpus, write_pairs_jsonl
from .errors import DetectorError
from .model import DetectorConfig
from .train import encode_batch, evaluate_scores, load_checkpoint, roc_metrics, run_training


def add_config_flags(parser):
    parser.add_argument("--dim", type=int, default=128)
    parser.add_argument("--heads", type=int, default=4)
    parser.add_argument("--blocks", type=int, default=2)
    parser.add_argument("--max-len", type=int, default=256)
    parser.add_argument("--learning-rate", type=float, default=1e-3)
    parser.add_argument("--epochs", type=int, default=3)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--learned-positions", action="store_true")


def config_from_args(args) -> DetectorConfig:
    return DetectorConfig(
        vocab_size=2,  # placeholder; training rebuilds it from the corpus
        dim=args.dim,
        heads=args.heads,
        blocks=args.blocks,
        max_len=args.max_len,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        learned_positions=args.learned_positions,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pairdetector", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    train_p = sub.add_parser("train", help="train on a pairs.jsonl dataset")
    train_p.add_argument("dataset")
    train_p.add_argument("--out-dir", default="detector_run")
    train_p.add_argument("--train-frac", type=float, default=0.8)
    add_config_flags(train_p)

    eval_p = sub.add_parser("eval", help="score a dataset with a trained checkpoint")
    eval_p.add_argument("dataset")
    eval_p.add_argument("--checkpoint", required=True)

    synth_p = sub.add_parser("synth", help="emit a synthetic separable corpus")
    synth_p.add_argument("--out", required=True)
    synth_p.add_argument("--pairs", type=int, default=10000)
    synth_p.add_argument("--seed", type=int, default=0)

    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            metrics, checkpoint = run_training(
                args.dataset, config_from_args(args), args.out_dir, args.train_frac
            )
            print(json.dumps({"auc": metrics["auc"], "checkpoint": str(checkpoint)}))
            return 0
        if args.command == "eval":
            model, vocab, cfg = load_checkpoint(args.checkpoint)
            examples = load_pairs(args.dataset)
            scores = evaluate_scores(model, examples, vocab, cfg)
            print(json.dumps(roc_metrics([ex.label for ex in examples], scores)["auc"]))
            return 0
        if args.command == "synth":
            write_pairs_jsonl(synthetic_corpus(args.pairs, args.seed), args.out)
            print(args.out)
            return 0
    except DetectorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())

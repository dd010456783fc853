"""Training loop, ROC/AUC evaluation and checkpointing."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import torch
from sklearn.metrics import roc_auc_score, roc_curve
from torch import nn

from .data import Vocabulary, encode_pair_tokens, load_pairs, split_examples
from .model import DetectorConfig, PairDetector


def encode_batch(examples, vocab: Vocabulary, max_len: int) -> torch.Tensor:
    rows = [vocab.encode(encode_pair_tokens(ex, max_len)) for ex in examples]
    width = max(len(r) for r in rows)
    padded = [r + [0] * (width - len(r)) for r in rows]
    return torch.tensor(padded, dtype=torch.long)


def batches(examples, batch_size):
    for k in range(0, len(examples), batch_size):
        yield examples[k : k + batch_size]


def evaluate_scores(model: PairDetector, examples, vocab, cfg) -> list[float]:
    model.eval()
    out = []
    for chunk in batches(examples, cfg.batch_size):
        ids = encode_batch(chunk, vocab, cfg.max_len)
        out.extend(model.scores(ids).tolist())
    return out


def roc_metrics(labels, scores) -> dict:
    fpr, tpr, _ = roc_curve(labels, scores)
    return {
        "auc": float(roc_auc_score(labels, scores)),
        "roc": [[float(f), float(t)] for f, t in zip(fpr, tpr)],
    }


def train_model(train_examples, cfg: DetectorConfig, vocab: Vocabulary | None = None):
    """Returns (model, vocab, per-epoch mean losses)."""
    torch.manual_seed(cfg.seed)
    if vocab is None:
        vocab = Vocabulary.build(train_examples)
        cfg.vocab_size = len(vocab)
    model = PairDetector(cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    epoch_losses = []
    order = list(train_examples)
    generator = torch.Generator().manual_seed(cfg.seed)
    for _ in range(cfg.epochs):
        model.train()
        perm = torch.randperm(len(order), generator=generator).tolist()
        shuffled = [order[i] for i in perm]
        total, count = 0.0, 0
        for chunk in batches(shuffled, cfg.batch_size):
            ids = encode_batch(chunk, vocab, cfg.max_len)
            labels = torch.tensor([ex.label for ex in chunk], dtype=torch.long)
            optimizer.zero_grad()
            loss = loss_fn(model(ids), labels)
            loss.backward()
            optimizer.step()
            total += loss.item() * len(chunk)
            count += len(chunk)
        epoch_losses.append(total / count)
    return model, vocab, epoch_losses


def save_checkpoint(path, model: PairDetector, vocab: Vocabulary, cfg: DetectorConfig):
    torch.save(
        {
            "state_dict": model.state_dict(),
            "vocab": vocab.token_to_id,
            "config": asdict(cfg),
        },
        path,
    )


def load_checkpoint(path):
    payload = torch.load(path, weights_only=False)
    cfg = DetectorConfig(**payload["config"])
    vocab = Vocabulary(payload["vocab"])
    model = PairDetector(cfg)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, vocab, cfg


def run_training(dataset_path, cfg: DetectorConfig, out_dir, train_frac=0.8):
    """Full job: load, split, train, evaluate, write checkpoint + metrics."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    examples = load_pairs(dataset_path)
    train_examples, test_examples = split_examples(examples, train_frac, cfg.seed)
    if not test_examples or len({ex.label for ex in test_examples}) < 2:
        # tiny corpora: evaluate on the training side rather than a one-class split
        test_examples = examples
    model, vocab, losses = train_model(train_examples, cfg)
    scores = evaluate_scores(model, test_examples, vocab, cfg)
    metrics = roc_metrics([ex.label for ex in test_examples], scores)
    metrics["epoch_losses"] = losses
    checkpoint_path = out_dir / "detector.pt"
    save_checkpoint(checkpoint_path, model, vocab, cfg)
    with open(out_dir / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return metrics, checkpoint_path

import random

import pytest
import torch

from pairdetector.data import Vocabulary, synthetic_corpus
from pairdetector.model import DetectorConfig, PairDetector, sinusoidal_positions
from pairdetector.train import encode_batch, train_model


def tiny_config(**overrides):
    defaults = dict(
        vocab_size=64, dim=32, heads=4, blocks=2, max_len=96,
        epochs=2, batch_size=64, learning_rate=3e-3, seed=0,
    )
    defaults.update(overrides)
    return DetectorConfig(**defaults)


def test_dim_must_divide_heads():
    with pytest.raises(ValueError):
        DetectorConfig(vocab_size=8, dim=30, heads=4)


def test_default_key_value_dims():
    cfg = DetectorConfig(vocab_size=8, dim=64, heads=4)
    assert cfg.d_k == cfg.d_v == 16


def test_attention_rows_sum_to_one():
    torch.manual_seed(0)
    cfg = tiny_config()
    model = PairDetector(cfg)
    ids = torch.randint(1, cfg.vocab_size, (3, 20))
    ids[0, 15:] = 0  # padded tail
    _, maps = model(ids, return_attention=True)
    assert len(maps) == cfg.blocks
    for weights in maps:
        sums = weights.sum(dim=-1)
        assert torch.all((sums - 1.0).abs() < 1e-5)


def test_untrained_score_is_finite_probability():
    torch.manual_seed(1)
    cfg = tiny_config()
    model = PairDetector(cfg)
    ids = torch.randint(1, cfg.vocab_size, (4, 12))
    scores = model.scores(ids)
    assert torch.all(torch.isfinite(scores))
    assert torch.all((scores >= 0) & (scores <= 1))


def test_inference_deterministic():
    torch.manual_seed(2)
    cfg = tiny_config()
    model = PairDetector(cfg)
    model.eval()
    ids = torch.randint(1, cfg.vocab_size, (2, 10))
    assert torch.equal(model.scores(ids), model.scores(ids))


def test_sinusoidal_table_shape_and_range():
    table = sinusoidal_positions(64, 32)
    assert table.shape == (64, 32)
    assert torch.all(table.abs() <= 1.0)


def test_learned_positions_toggle():
    cfg = tiny_config(learned_positions=True)
    model = PairDetector(cfg)
    assert isinstance(model.positions, torch.nn.Parameter)


def test_permutation_sensitivity_after_training():
    examples = synthetic_corpus(600, seed=4)
    cfg = tiny_config()
    model, vocab, _ = train_model(examples[:500], cfg)
    model.eval()
    rng = random.Random(9)
    probes = [ex for ex in examples[500:] if len(set(ex.left.split())) >= 4][:50]
    assert len(probes) >= 30
    changed = 0
    for ex in probes:
        base = model.scores(encode_batch([ex], vocab, cfg.max_len)).item()
        tokens = ex.left.split()
        scrambled = tokens[:]
        while scrambled == tokens:
            rng.shuffle(scrambled)
        mutated = type(ex)(" ".join(scrambled), ex.right, ex.label)
        after = model.scores(encode_batch([mutated], vocab, cfg.max_len)).item()
        if abs(after - base) > 1e-9:
            changed += 1
    assert changed >= 0.9 * len(probes)

"""Corpus assembly: dedup, negative sampling, truncation, split, statistics.

The emitted corpus is balanced 1:1 between equivalent and non-equivalent
pairs.  A negative keeps the positive's left side and swaps the right side for
a block whose label set shares no source line with the left block, so
optimization variants of the same code can never be mislabeled as negatives.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace

from .errors import PoolExhaustedError
from .ingest import BuildConfig
from .normalize import INSTRUCTION_SEP

MAX_INSTRUCTIONS = 100
TRAIN_FRACTION = 0.8


@dataclass(frozen=True)
class PairRecord:
    left_tokens: str
    right_tokens: str
    label: int  # 1 = equivalent, 0 = nonequivalent
    function_name: str
    left_config: BuildConfig
    right_config: BuildConfig
    shared_labels: frozenset | None  # None for negatives
    left_labels: frozenset = frozenset()
    right_labels: frozenset = frozenset()

    def to_json_obj(self):
        def config_obj(cfg):
            return {
                "isa": cfg.isa,
                "compiler": cfg.compiler,
                "opt_level": cfg.opt_level,
                "program": cfg.program_name,
            }

        def labels_list(labels):
            return [[s.file, s.line] for s in sorted(labels)]

        return {
            "left": self.left_tokens,
            "right": self.right_tokens,
            "label": self.label,
            "meta": {
                "function": self.function_name,
                "left_config": config_obj(self.left_config),
                "right_config": config_obj(self.right_config),
                "shared_labels": None
                if self.shared_labels is None
                else labels_list(self.shared_labels),
                "left_labels": labels_list(self.left_labels),
                "right_labels": labels_list(self.right_labels),
            },
        }


@dataclass(frozen=True)
class CandidateBlock:
    """A normalized block in the negative-sampling pool."""

    tokens: str
    labels: frozenset
    config: BuildConfig
    function_name: str
    block_id: str


@dataclass
class CorpusStats:
    function_counts: dict = field(default_factory=dict)  # coordinate -> n functions
    bmerge_affected: dict = field(default_factory=dict)  # coordinate -> n affected
    block_change_ratios: dict = field(default_factory=dict)  # coordinate -> [ratio, ...]
    pair_counts: dict = field(default_factory=dict)  # "coordA__coordB" -> n positives
    dedup_removed: int = 0
    truncated_sides: int = 0
    negatives: int = 0

    def affected_ratio(self, coordinate: str) -> float:
        total = self.function_counts.get(coordinate, 0)
        return self.bmerge_affected.get(coordinate, 0) / total if total else 0.0

    def to_json_obj(self):
        configs = {}
        for coord in sorted(self.function_counts):
            ratios = sorted(self.block_change_ratios.get(coord, []))
            configs[coord] = {
                "functions": self.function_counts[coord],
                "functions_bmerge_affected": self.bmerge_affected.get(coord, 0),
                "bmerge_affected_function_ratio": round(self.affected_ratio(coord), 6),
                "block_change_ratios": [round(r, 6) for r in ratios],
            }
        return {
            "configs": configs,
            "pair_counts": dict(sorted(self.pair_counts.items())),
            "dedup_removed": self.dedup_removed,
            "truncated_sides": self.truncated_sides,
            "negatives": self.negatives,
        }


def truncate_rendering(tokens: str, max_len: int = MAX_INSTRUCTIONS) -> tuple[str, bool]:
    """Keep the first ``max_len`` instructions of a flat rendering."""
    parts = [p.strip() for p in tokens.split(INSTRUCTION_SEP)]
    if len(parts) <= max_len:
        return tokens, False
    return f" {INSTRUCTION_SEP} ".join(parts[:max_len]), True


def dedup(pairs: list[PairRecord]) -> tuple[list[PairRecord], int]:
    """Remove exact duplicate renderings among positives; sort for determinism."""
    seen = set()
    kept = []
    for rec in pairs:
        key = (rec.left_tokens, rec.right_tokens)
        if key in seen:
            continue
        seen.add(key)
        kept.append(rec)
    removed = len(pairs) - len(kept)
    kept.sort(key=lambda r: (r.left_tokens, r.right_tokens, r.function_name))
    return kept, removed


def sample_negatives(
    positives: list[PairRecord],
    pool: list[CandidateBlock],
    seed: int,
    max_retries: int = 128,
) -> list[PairRecord]:
    """One negative per positive, sampled uniformly from admissible pool blocks.

    A pool block is admissible for a positive when its label set does not
    intersect the positive's left-side labels and its rendering differs from
    the true right side.  Bounded rejection sampling first, exhaustive scan as
    the fallback so tiny corpora either succeed or fail loudly.
    """
    rng = random.Random(seed)
    pool = sorted(pool, key=lambda c: (c.tokens, c.block_id, c.config.coordinate()))
    negatives = []
    for rec in positives:
        partner = None
        for _ in range(max_retries):
            cand = pool[rng.randrange(len(pool))] if pool else None
            if cand is None:
                break
            if not (cand.labels & rec.left_labels) and cand.tokens != rec.right_tokens:
                partner = cand
                break
        if partner is None:
            admissible = [
                c
                for c in pool
                if not (c.labels & rec.left_labels) and c.tokens != rec.right_tokens
            ]
            if not admissible:
                raise PoolExhaustedError(
                    f"no admissible negative partner for {rec.function_name!r} "
                    f"({rec.left_config.coordinate()} vs {rec.right_config.coordinate()})"
                )
            partner = admissible[rng.randrange(len(admissible))]
        negatives.append(
            PairRecord(
                left_tokens=rec.left_tokens,
                right_tokens=partner.tokens,
                label=0,
                function_name=rec.function_name,
                left_config=rec.left_config,
                right_config=partner.config,
                shared_labels=None,
                left_labels=rec.left_labels,
                right_labels=partner.labels,
            )
        )
    return negatives


def truncate_and_split(
    records: list[PairRecord],
    max_len: int = MAX_INSTRUCTIONS,
    train_frac: float = TRAIN_FRACTION,
    seed: int = 0,
    by_function: bool = False,
) -> tuple[list[PairRecord], list[PairRecord]]:
    """Truncate both sides of every record and split into train/test.

    The split is a seeded uniform shuffle; with ``by_function`` records of one
    function never straddle the split (guards against duplicated functions
    inflating test scores).
    """
    truncated = []
    for rec in records:
        left, _ = truncate_rendering(rec.left_tokens, max_len)
        right, _ = truncate_rendering(rec.right_tokens, max_len)
        truncated.append(replace(rec, left_tokens=left, right_tokens=right))

    rng = random.Random(seed)
    if by_function:
        functions = sorted({r.function_name for r in truncated})
        rng.shuffle(functions)
        n_train_funcs = int(len(functions) * train_frac)
        train_funcs = set(functions[:n_train_funcs])
        train = [r for r in truncated if r.function_name in train_funcs]
        test = [r for r in truncated if r.function_name not in train_funcs]
        return train, test
    order = list(range(len(truncated)))
    rng.shuffle(order)
    n_train = int(len(truncated) * train_frac)
    train_idx = sorted(order[:n_train])
    test_idx = sorted(order[n_train:])
    return [truncated[i] for i in train_idx], [truncated[i] for i in test_idx]


def render_record_line(rec: PairRecord) -> str:
    return json.dumps(rec.to_json_obj(), sort_keys=True, separators=(",", ":"))


def write_pairs_jsonl(records: list[PairRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(render_record_line(rec))
            fh.write("\n")


def read_pairs_jsonl(path) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def verify_negative_soundness(records: list[dict]) -> list[str]:
    """Post-hoc verifier over emitted records; returns human-readable violations."""
    problems = []
    n_pos = sum(1 for r in records if r["label"] == 1)
    n_neg = sum(1 for r in records if r["label"] == 0)
    if n_pos != n_neg:
        problems.append(f"class imbalance: {n_pos} positive vs {n_neg} negative")
    for k, rec in enumerate(records):
        left = {tuple(p) for p in rec["meta"]["left_labels"]}
        right = {tuple(p) for p in rec["meta"]["right_labels"]}
        if rec["label"] == 0 and left & right:
            problems.append(f"record {k}: negative with intersecting labels {left & right}")
        if rec["label"] == 1 and not rec["meta"]["shared_labels"]:
            problems.append(f"record {k}: positive without shared labels")
    return problems

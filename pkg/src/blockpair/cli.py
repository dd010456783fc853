"""Pipeline orchestration: build matrix, resolver invocation, stage wiring.

A run manifest lists the dumps (or sources) for every build-matrix coordinate.
For each program the pipeline ingests, sanitizes, annotates and consolidates
the per-build block sets once, then emits one dataset directory per pair of
coordinates: ``pairs.jsonl``, ``stats.json``, ``unmatched.json``, the
train/test split and a machine-readable event log.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import shutil
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import dataset as dataset_mod
from .bmerge import bmerge
from .bpair import UnmatchedReport, pair_programs
from .errors import (
    ManifestError,
    PipelineError,
    ResolverSpawnError,
    ToolchainMissingError,
)
from .ingest import COMPILERS, ISAS, OPT_LEVELS, BuildConfig, parse_dump, sanitize, serialize_dump
from .linemap import make_cache, annotate_blocks
from .normalize import normalize_block, render_block

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_STAGE = 3
EXIT_TOOL = 4


@dataclass
class MatrixEntry:
    config: BuildConfig
    dump_path: str | None = None
    annotations_path: str | None = None
    source_path: str | None = None
    binary_path: str | None = None

    @property
    def coordinate(self) -> str:
        return self.config.coordinate()


@dataclass
class RunManifest:
    entries: list
    resolver: str = "addr2line"  # executable name/path, or "file" for annotation files
    seed: int = 0
    out_dir: str = "runs"
    split_by_function: bool = False
    jobs: int = 0

    @classmethod
    def load(cls, path) -> "RunManifest":
        base = Path(path).parent
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
        return cls.from_obj(doc, base)

    @classmethod
    def from_obj(cls, doc, base=Path(".")) -> "RunManifest":
        if not isinstance(doc, dict) or not isinstance(doc.get("matrix"), list):
            raise ManifestError("manifest must be an object with a 'matrix' list")
        entries = []
        for k, item in enumerate(doc["matrix"]):
            if not isinstance(item, dict):
                raise ManifestError(f"matrix[{k}] must be an object")
            for key in ("isa", "compiler", "opt_level", "program"):
                if not isinstance(item.get(key), str):
                    raise ManifestError(f"matrix[{k}].{key} missing or not a string")
            if item["isa"] not in ISAS:
                raise ManifestError(f"matrix[{k}].isa: unknown isa {item['isa']!r}")
            if item["compiler"] not in COMPILERS:
                raise ManifestError(f"matrix[{k}].compiler: unknown compiler {item['compiler']!r}")
            if item["opt_level"] not in OPT_LEVELS:
                raise ManifestError(f"matrix[{k}].opt_level: unknown level {item['opt_level']!r}")

            def _resolve(key):
                value = item.get(key)
                if value is None:
                    return None
                return str((base / value) if not os.path.isabs(value) else Path(value))

            dump_path = _resolve("dump")
            source_path = _resolve("source")
            if dump_path is None and source_path is None:
                raise ManifestError(f"matrix[{k}] needs a 'dump' or a 'source'")
            binary = _resolve("binary") or ""
            config = BuildConfig(
                item["isa"], item["compiler"], item["opt_level"], item["program"], binary
            )
            entries.append(
                MatrixEntry(
                    config=config,
                    dump_path=dump_path,
                    annotations_path=_resolve("annotations"),
                    source_path=source_path,
                    binary_path=binary or None,
                )
            )
        if len(entries) < 2:
            raise ManifestError("matrix needs at least two configurations to form a pair")
        seen = set()
        for e in entries:
            if e.config.key() in seen:
                raise ManifestError(f"duplicate matrix coordinate {e.config.key()}")
            seen.add(e.config.key())

        manifest = cls(
            entries=entries,
            resolver=doc.get("resolver", "addr2line"),
            seed=doc.get("seed", 0),
            out_dir=doc.get("out", "runs"),
            split_by_function=bool(doc.get("split_by_function", False)),
            jobs=int(doc.get("jobs", 0)),
        )
        if not isinstance(manifest.seed, int):
            raise ManifestError("seed must be an integer")
        return manifest


@dataclass
class PreparedDump:
    """One dump after ingest, sanitize, annotate and per-function consolidation."""

    entry: MatrixEntry
    dump: object  # ProgramDump with bmerged, annotated functions
    merge_rows: list  # (function_name, blocks_before, blocks_after)
    events: list = field(default_factory=list)


class StageFailure(PipelineError):
    def __init__(self, stage, context, cause):
        super().__init__(f"[{stage}] {context}: {cause}")
        self.stage = stage
        self.cause = cause


def _run_stage(stage, context, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError as exc:
        raise StageFailure(stage, context, exc) from exc


def prepare_dump(entry: MatrixEntry, resolver: str) -> PreparedDump:
    """ingest -> sanitize -> annotate -> bmerge for one matrix entry."""
    context = f"{entry.config.program_name} {entry.coordinate}"
    if entry.dump_path is None:
        raise StageFailure("ingest", context, "no dump path (build/export it first)")
    dump = _run_stage("ingest", context, parse_dump, entry.dump_path)
    events = [
        {
            "stage": "ingest",
            "config": entry.coordinate,
            "program": entry.config.program_name,
            "counts": {
                "functions": len(dump.functions),
                "blocks": sum(len(f.blocks) for f in dump.functions),
                "instructions": len(dump.all_addresses()),
            },
        }
    ]
    dump = sanitize(dump)

    if resolver == "file":
        if entry.annotations_path is None:
            raise StageFailure("annotate", context, "resolver mode 'file' needs 'annotations'")
        spec = f"file:{entry.annotations_path}"
    else:
        spec = resolver
    binary = entry.binary_path or dump.config.binary_path
    addresses = dump.all_addresses()
    blocks_before_annot = sum(len(f.blocks) for f in dump.functions)
    cache = _run_stage("annotate", context, make_cache, binary, addresses, spec)
    dump = _run_stage("annotate", context, annotate_blocks, dump, cache)
    events.append(
        {
            "stage": "annotate",
            "config": entry.coordinate,
            "program": entry.config.program_name,
            "counts": {
                "blocks_before": blocks_before_annot,
                "blocks_after": sum(len(f.blocks) for f in dump.functions),
                "functions_after": len(dump.functions),
            },
        }
    )

    merge_rows = []
    new_functions = []
    for func in dump.functions:
        merged = _run_stage(
            "bmerge", f"{context} {func.name}", bmerge, func.blocks
        )
        merge_rows.append((func.name, len(func.blocks), len(merged)))
        events.append(
            {
                "stage": "bmerge",
                "config": entry.coordinate,
                "program": entry.config.program_name,
                "function": func.name,
                "counts": {"before": len(func.blocks), "after": len(merged)},
            }
        )
        new_functions.append(
            type(func)(func.name, func.entry_address, tuple(merged), func.is_external, func.is_library)
        )
    dump = type(dump)(dump.config, tuple(new_functions), dump.library_dictionary)
    return PreparedDump(entry=entry, dump=dump, merge_rows=merge_rows, events=events)


def _rendering(block, isa, dict_names):
    text = render_block(normalize_block(block, isa, dict_names))
    return dataset_mod.truncate_rendering(text)


def assemble_pair_dataset(prepared_a, prepared_b, seed, split_by_function):
    """Build the record list and reports for one coordinate pair (one or more programs)."""
    positives = []
    pool = []
    report = UnmatchedReport()
    events = []
    truncated_sides = 0
    pair_count_by_program = {}

    for pa, pb in zip(prepared_a, prepared_b):
        dump_a, dump_b = pa.dump, pb.dump
        isa_a, isa_b = dump_a.config.isa, dump_b.config.isa
        dict_a, dict_b = dump_a.library_dictionary, dump_b.library_dictionary
        pairs, prog_report = pair_programs(dump_a, dump_b)
        report.left_only_functions.extend(prog_report.left_only_functions)
        report.right_only_functions.extend(prog_report.right_only_functions)
        report.one_sided_components.extend(prog_report.one_sided_components)
        pair_count_by_program[dump_a.config.program_name] = len(pairs)

        for pair in pairs:
            left_text, lt = _rendering(pair.left_block, isa_a, dict_a)
            right_text, rt = _rendering(pair.right_block, isa_b, dict_b)
            truncated_sides += int(lt) + int(rt)
            positives.append(
                dataset_mod.PairRecord(
                    left_tokens=left_text,
                    right_tokens=right_text,
                    label=1,
                    function_name=pair.function_name,
                    left_config=pair.left_config,
                    right_config=pair.right_config,
                    shared_labels=pair.shared_labels,
                    left_labels=pair.left_block.labels,
                    right_labels=pair.right_block.labels,
                )
            )
        for prepared, isa, names in ((pa, isa_a, dict_a), (pb, isa_b, dict_b)):
            for func in prepared.dump.functions:
                for block in func.blocks:
                    text, _ = _rendering(block, isa, names)
                    pool.append(
                        dataset_mod.CandidateBlock(
                            tokens=text,
                            labels=block.labels,
                            config=prepared.dump.config,
                            function_name=func.name,
                            block_id=block.id,
                        )
                    )
        events.append(
            {
                "stage": "bpair",
                "config": f"{dump_a.config.coordinate()}__{dump_b.config.coordinate()}",
                "program": dump_a.config.program_name,
                "counts": {
                    "pairs": len(pairs),
                    "one_sided": len(prog_report.one_sided_components),
                    "left_only": len(prog_report.left_only_functions),
                    "right_only": len(prog_report.right_only_functions),
                },
            }
        )

    positives, removed = dataset_mod.dedup(positives)
    negatives = dataset_mod.sample_negatives(positives, pool, seed) if positives else []
    records = positives + negatives
    train, test = dataset_mod.truncate_and_split(
        records, seed=seed, by_function=split_by_function
    )
    events.append(
        {
            "stage": "dataset",
            "counts": {
                "positives": len(positives),
                "negatives": len(negatives),
                "dedup_removed": removed,
                "truncated_sides": truncated_sides,
                "train": len(train),
                "test": len(test),
            },
        }
    )
    return records, train, test, report, events, removed, truncated_sides, pair_count_by_program


def run(manifest: RunManifest) -> list[str]:
    """Execute the full pipeline; returns the run directories written."""
    jobs = manifest.jobs or os.cpu_count() or 1
    entries = sorted(manifest.entries, key=lambda e: e.config.key())
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        prepared_list = list(pool.map(lambda e: prepare_dump(e, manifest.resolver), entries))
    prepared = {p.entry.config.key(): p for p in prepared_list}

    stats = dataset_mod.CorpusStats()
    for p in prepared.values():
        coord = p.entry.coordinate
        stats.function_counts[coord] = stats.function_counts.get(coord, 0) + len(p.merge_rows)
        affected = sum(1 for _, before, after in p.merge_rows if after != before)
        stats.bmerge_affected[coord] = stats.bmerge_affected.get(coord, 0) + affected
        stats.block_change_ratios.setdefault(coord, []).extend(
            after / before for _, before, after in p.merge_rows
        )

    coords: dict = {}
    for p in prepared.values():
        coords.setdefault(p.entry.coordinate, {})[p.entry.config.program_name] = p

    out_root = Path(manifest.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    run_dirs = []

    def one_pair(coord_pair):
        coord_a, coord_b = coord_pair
        shared_programs = sorted(set(coords[coord_a]) & set(coords[coord_b]))
        if not shared_programs:
            return None
        prepared_a = [coords[coord_a][prog] for prog in shared_programs]
        prepared_b = [coords[coord_b][prog] for prog in shared_programs]
        (
            records,
            train,
            test,
            report,
            events,
            removed,
            truncated,
            pair_counts,
        ) = assemble_pair_dataset(prepared_a, prepared_b, manifest.seed, manifest.split_by_function)

        run_dir = out_root / f"{'-'.join(shared_programs)}__{coord_a}__{coord_b}"
        run_dir.mkdir(parents=True, exist_ok=True)
        dataset_mod.write_pairs_jsonl(records, run_dir / "pairs.jsonl")
        dataset_mod.write_pairs_jsonl(train, run_dir / "train.jsonl")
        dataset_mod.write_pairs_jsonl(test, run_dir / "test.jsonl")

        pair_stats = dataset_mod.CorpusStats(
            function_counts=stats.function_counts,
            bmerge_affected=stats.bmerge_affected,
            block_change_ratios=stats.block_change_ratios,
            pair_counts={f"{coord_a}__{coord_b}": sum(pair_counts.values())},
            dedup_removed=removed,
            truncated_sides=truncated,
            negatives=len(records) // 2,
        )
        with open(run_dir / "stats.json", "w", encoding="utf-8") as fh:
            json.dump(pair_stats.to_json_obj(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(run_dir / "unmatched.json", "w", encoding="utf-8") as fh:
            json.dump(report.to_json_obj(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        all_events = []
        for p in prepared_a + prepared_b:
            all_events.extend(p.events)
        all_events.extend(events)
        with open(run_dir / "events.jsonl", "w", encoding="utf-8") as fh:
            for ev in all_events:
                fh.write(json.dumps(ev, sort_keys=True))
                fh.write("\n")
        return str(run_dir)

    coord_pairs = list(itertools.combinations(sorted(coords), 2))
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        for result in pool.map(one_pair, coord_pairs):
            if result is not None:
                run_dirs.append(result)
    return run_dirs


_CROSS_COMPILERS = {
    ("x86_64", "gcc"): ["gcc"],
    ("x86", "gcc"): ["gcc", "-m32"],
    ("arm32", "gcc"): ["arm-linux-gnueabihf-gcc"],
    ("aarch64", "gcc"): ["aarch64-linux-gnu-gcc"],
    ("x86_64", "clang"): ["clang", "--target=x86_64-linux-gnu"],
    ("x86", "clang"): ["clang", "--target=i386-linux-gnu"],
    ("arm32", "clang"): ["clang", "--target=armv7-linux-gnueabihf"],
    ("aarch64", "clang"): ["clang", "--target=aarch64-linux-gnu"],
}


def build_matrix(manifest: RunManifest, log=None) -> list[str]:
    """Compile every entry that carries a source file; returns produced binaries."""
    produced = []
    for entry in manifest.entries:
        if entry.source_path is None:
            continue
        key = (entry.config.isa, entry.config.compiler)
        base_cmd = _CROSS_COMPILERS[key]
        if shutil.which(base_cmd[0]) is None:
            raise ToolchainMissingError(
                f"compiler for {entry.config.isa}/{entry.config.compiler} "
                f"not installed: {base_cmd[0]}"
            )
        out_path = entry.binary_path or f"{entry.source_path}.{entry.coordinate}.bin"
        cmd = base_cmd + [
            "-g",
            f"-{entry.config.opt_level}",
            "-o",
            out_path,
            entry.source_path,
        ]
        if log is not None:
            log.append({"stage": "build", "config": entry.coordinate, "command": cmd})
        result = subprocess.run(cmd, capture_output=True, text=True)
        if result.returncode != 0:
            raise StageFailure(
                "build", entry.coordinate, f"compiler failed: {result.stderr.strip()}"
            )
        produced.append(out_path)
        entry.binary_path = out_path
    return produced


def _stage_debug(args) -> int:
    """Run a single stage over explicit dumps and print the result as JSON."""
    dumps = []
    for k, dump_path in enumerate(args.dump):
        dump = parse_dump(dump_path)
        dump = sanitize(dump)
        if args.stage in ("annotate", "bmerge", "bpair"):
            if args.annotations and k < len(args.annotations):
                spec = f"file:{args.annotations[k]}"
            else:
                spec = args.resolver or "addr2line"
            cache = make_cache(dump.config.binary_path, dump.all_addresses(), spec)
            dump = annotate_blocks(dump, cache)
        dumps.append(dump)

    if args.stage == "ingest":
        out = [
            {
                "program": d.config.program_name,
                "config": d.config.coordinate(),
                "functions": len(d.functions),
                "blocks": sum(len(f.blocks) for f in d.functions),
            }
            for d in dumps
        ]
        print(json.dumps(out, indent=2, sort_keys=True))
        return EXIT_OK
    if args.stage == "sanitize":
        for d in dumps:
            print(serialize_dump(d))
        return EXIT_OK
    if args.stage in ("annotate", "bmerge"):
        out = {}
        for d in dumps:
            funcs = {}
            for f in d.functions:
                blocks = f.blocks if args.stage == "annotate" else bmerge(f.blocks)
                funcs[f.name] = [
                    {
                        "start": format(b.start_address, "#x"),
                        "labels": sorted([s.file, s.line] for s in b.labels),
                        "merged_from": list(b.merged_from),
                    }
                    for b in blocks
                ]
            out[d.config.coordinate()] = funcs
        print(json.dumps(out, indent=2, sort_keys=True))
        return EXIT_OK
    if args.stage == "bpair":
        if len(dumps) != 2:
            raise ManifestError("--stage bpair needs exactly two --dump arguments")
        prepared = []
        for d in dumps:
            new_funcs = tuple(
                type(f)(f.name, f.entry_address, tuple(bmerge(f.blocks)), f.is_external, f.is_library)
                for f in d.functions
            )
            prepared.append(type(d)(d.config, new_funcs, d.library_dictionary))
        pairs, report = pair_programs(prepared[0], prepared[1])
        out = {
            "pairs": [
                {
                    "function": p.function_name,
                    "left_start": format(p.left_block.start_address, "#x"),
                    "right_start": format(p.right_block.start_address, "#x"),
                    "shared_labels": sorted([s.file, s.line] for s in p.shared_labels),
                }
                for p in pairs
            ],
            "unmatched": report.to_json_obj(),
        }
        print(json.dumps(out, indent=2, sort_keys=True))
        return EXIT_OK
    raise ManifestError(f"unknown stage {args.stage!r}")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockpair",
        description="Construct fine-grained equivalent basic-block pair datasets "
        "from cross-build disassembly dumps.",
    )
    parser.add_argument("--manifest", help="run manifest JSON")
    parser.add_argument("--stage", help="run a single stage over --dump inputs and print it")
    parser.add_argument("--dump", action="append", default=[], help="dump file for --stage")
    parser.add_argument(
        "--annotations", action="append", default=[], help="annotation file per --dump"
    )
    parser.add_argument(
        "--resolver",
        help="address resolver: executable path, 'file' (manifest mode), or "
        "'file:annotations.json' (stage mode)",
    )
    parser.add_argument("--seed", type=int, help="negative-sampling / split seed")
    parser.add_argument("--out", help="output directory root")
    parser.add_argument("--split-by-function", action="store_true")
    parser.add_argument("--jobs", type=int, default=0, help="worker pool size (0 = cpu count)")
    parser.add_argument("--build", action="store_true", help="compile matrix sources first")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.stage:
            if not args.dump:
                raise ManifestError("--stage requires at least one --dump")
            return _stage_debug(args)
        if not args.manifest:
            raise ManifestError("either --manifest or --stage is required")
        manifest = RunManifest.load(args.manifest)
        if args.resolver:
            manifest.resolver = args.resolver
        if args.seed is not None:
            manifest.seed = args.seed
        if args.out:
            manifest.out_dir = args.out
        if args.split_by_function:
            manifest.split_by_function = True
        if args.jobs:
            manifest.jobs = args.jobs
        if args.build:
            build_matrix(manifest)
        run_dirs = run(manifest)
        for d in run_dirs:
            print(d)
        return EXIT_OK
    except ManifestError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ToolchainMissingError, ResolverSpawnError) as exc:
        print(f"missing tool: {exc}", file=sys.stderr)
        return EXIT_TOOL
    except StageFailure as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        if isinstance(exc.cause, (ToolchainMissingError, ResolverSpawnError)):
            return EXIT_TOOL
        return EXIT_STAGE
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())

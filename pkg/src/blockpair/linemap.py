"""Address-to-source-line resolution and basic-block annotation.

Resolution goes through an external addr2line-compatible executable (one
process per binary, addresses streamed on stdin) or through a pre-resolved
annotation file so the test suite never needs a toolchain.  Either way the
result is an :class:`AnnotationCache` whose file paths have been normalized so
that the same source file names match across builds compiled in different
directories.
"""

from __future__ import annotations

import json
import posixpath
import re
import subprocess
from dataclasses import dataclass, replace

from .errors import CoverageError, ResolverProtocolError, ResolverSpawnError, SchemaError
from .ingest import ProgramDump

_ADDR_ECHO_RE = re.compile(r"0x[0-9a-fA-F]+")
_DISCRIMINATOR_RE = re.compile(r"\s*\(discriminator \d+\)\s*$")


@dataclass(frozen=True, order=True)
class SourceLine:
    file: str
    line: int

    def as_pair(self):
        return [self.file, self.line]


@dataclass(frozen=True)
class AnnotationCache:
    """Memoized resolver answers for one binary.

    ``mapping`` holds every requested address; unresolvable addresses map to
    an empty tuple.  An address may carry several source lines when the
    resolver expands inlined frames.
    """

    binary_path: str
    mapping: dict

    def lines_for(self, address: int):
        try:
            return self.mapping[address]
        except KeyError:
            raise CoverageError(
                f"address {address:#x} of {self.binary_path} missing from annotation cache"
            ) from None


def normalize_paths(raw_lines_by_addr: dict) -> dict:
    """Clean and re-root all file paths of one binary.

    Backslashes become slashes, ``.``/``..`` segments collapse, and the longest
    directory prefix common to every resolved path is stripped, so two builds
    of the same sources compare equal on (file, line) even when compiled from
    different build roots.
    """
    cleaned = {}
    all_paths = set()
    for addr, pairs in raw_lines_by_addr.items():
        out = []
        for file, line in pairs:
            path = posixpath.normpath(file.replace("\\", "/"))
            out.append((path, line))
            all_paths.add(path)
        cleaned[addr] = out
    if not all_paths:
        return {addr: () for addr in cleaned}

    split_paths = [p.split("/") for p in all_paths]
    # Longest common directory prefix; the file component never participates.
    prefix_len = 0
    shortest = min(len(parts) for parts in split_paths)
    while prefix_len < shortest - 1 and len({parts[prefix_len] for parts in split_paths}) == 1:
        prefix_len += 1

    result = {}
    for addr, pairs in cleaned.items():
        result[addr] = tuple(
            SourceLine("/".join(p.split("/")[prefix_len:]), line) for p, line in pairs
        )
    return result


def _parse_location(text):
    """One resolver location line -> (file, line) or None when unresolvable."""
    text = _DISCRIMINATOR_RE.sub("", text.strip())
    file, sep, lineno = text.rpartition(":")
    if not sep:
        raise ResolverProtocolError(text)
    if file in ("", "??"):
        return None
    if lineno in ("?", "0"):
        return None
    if not lineno.isdigit():
        raise ResolverProtocolError(text)
    return (file, int(lineno))


def parse_resolver_output(stdout: str, requested) -> dict:
    """Parse addr2line ``-a -i -f`` output into {address: [(file, line), ...]}.

    Expected shape per requested address: one echo line ``0x...`` followed by
    one or more (function name, file:line) frame pairs.  ``??`` names are
    ignored; ``??:0`` / ``??:?`` locations mean the frame is unresolvable.
    """
    mapping = {}
    current = None
    lines = [ln for ln in stdout.splitlines() if ln.strip()]
    i = 0
    while i < len(lines):
        ln = lines[i].strip()
        if _ADDR_ECHO_RE.fullmatch(ln):
            current = int(ln, 16)
            mapping.setdefault(current, [])
            i += 1
            continue
        if current is None:
            raise ResolverProtocolError(lines[i])
        # frame pair: function-name line then location line
        if i + 1 >= len(lines):
            raise ResolverProtocolError(lines[i])
        loc = _parse_location(lines[i + 1])
        if loc is not None:
            mapping[current].append(loc)
        i += 2

    missing = [a for a in requested if a not in mapping]
    if missing:
        raise ResolverProtocolError(f"resolver echoed no output for {missing[0]:#x}")
    return mapping


def resolve_addresses(binary_path: str, addresses, resolver: str = "addr2line") -> AnnotationCache:
    """Resolve addresses by spawning one resolver process for the binary."""
    addresses = list(dict.fromkeys(addresses))
    if not addresses:
        raise ValueError("resolve_addresses requires at least one address")
    cmd = [resolver, "-e", binary_path, "-a", "-i", "-f"]
    stdin = "".join(f"{a:#x}\n" for a in addresses)
    try:
        proc = subprocess.run(cmd, input=stdin, capture_output=True, text=True, check=False)
    except (FileNotFoundError, PermissionError) as exc:
        raise ResolverSpawnError(f"cannot run resolver {resolver!r}: {exc}") from exc
    if proc.returncode != 0:
        raise ResolverSpawnError(
            f"resolver {resolver!r} exited with {proc.returncode}: {proc.stderr.strip()}"
        )
    raw = parse_resolver_output(proc.stdout, addresses)
    mapping = normalize_paths({a: raw.get(a, []) for a in addresses})
    return AnnotationCache(binary_path, mapping)


def load_annotation_file(path, addresses, binary_path: str = "") -> AnnotationCache:
    """Build a cache from a pre-resolved JSON file: {"0x...": [["file", line], ...]}.

    Addresses absent from the file behave like unresolvable ones, mirroring a
    resolver that answered ``??:0``.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise SchemaError("annotation file must be a JSON object", str(path))
    table = {}
    for key, pairs in doc.items():
        try:
            addr = int(key, 16)
        except ValueError:
            raise SchemaError(f"bad address key {key!r}", str(path)) from None
        if not isinstance(pairs, list):
            raise SchemaError(f"entry for {key} must be a list", str(path))
        entries = []
        for item in pairs:
            if (
                not isinstance(item, list)
                or len(item) != 2
                or not isinstance(item[0], str)
                or not isinstance(item[1], int)
                or item[1] < 1
            ):
                raise SchemaError(f"bad location entry {item!r} for {key}", str(path))
            entries.append((item[0], item[1]))
        table[addr] = entries
    raw = {a: table.get(a, []) for a in addresses}
    mapping = normalize_paths(raw)
    return AnnotationCache(binary_path or str(path), mapping)


def make_cache(binary_path: str, addresses, resolver_spec: str) -> AnnotationCache:
    """Dispatch on the CLI resolver spec: ``file:<annotations.json>`` or an executable."""
    if resolver_spec.startswith("file:"):
        return load_annotation_file(resolver_spec[5:], addresses, binary_path)
    return resolve_addresses(binary_path, addresses, resolver_spec)


def annotate_blocks(dump: ProgramDump, cache: AnnotationCache) -> ProgramDump:
    """Attach label sets to every block; drop blocks (and then functions) with no labels."""
    new_functions = []
    for func in dump.functions:
        kept = []
        for block in func.blocks:
            labels = set()
            for ins in block.instructions:
                labels.update(cache.lines_for(ins.address))
            if labels:
                kept.append(block.with_labels(labels))
        if kept:
            new_functions.append(replace(func, blocks=tuple(kept)))
    return replace(dump, functions=tuple(new_functions))

#!/usr/bin/env python3
"""Regenerate the committed test fixtures from their C sources.

Needs host gcc, objdump and addr2line. The committed fixtures were produced
once with this script and then frozen; rerunning under a different compiler
version will change block layouts and therefore the golden files, so treat the
outputs as a fresh fixture set, not as a byte-identical reproduction.

Usage: tools/make_fixtures.py [workdir]
"""

import json
import pathlib
import subprocess
import sys

REPO = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = REPO / "tests" / "fixtures"
EXPORTER = REPO / "tools" / "export_objdump.py"


def sh(*cmd, **kw):
    print("+", " ".join(str(c) for c in cmd))
    subprocess.run([str(c) for c in cmd], check=True, **kw)


def annotate(dump_path, binary, out_path):
    doc = json.loads(pathlib.Path(dump_path).read_text())
    addrs = [
        i["addr"]
        for f in doc["functions"]
        for b in f["blocks"]
        for i in b["instructions"]
    ]
    proc = subprocess.run(
        ["addr2line", "-e", str(binary), "-a", "-i", "-f"],
        input="\n".join(addrs) + "\n",
        capture_output=True,
        text=True,
        check=True,
    )
    mapping = {}
    cur = None
    lines = [ln for ln in proc.stdout.splitlines() if ln.strip()]
    i = 0
    while i < len(lines):
        ln = lines[i].strip()
        if ln.startswith("0x") and all(c in "0123456789abcdef" for c in ln[2:]):
            cur = format(int(ln, 16), "#x")
            mapping.setdefault(cur, [])
            i += 1
            continue
        loc = lines[i + 1].strip()
        file, _, lineno = loc.rpartition(":")
        lineno = lineno.split(" ")[0]
        if file not in ("", "??") and lineno.isdigit() and int(lineno) > 0:
            mapping[cur].append([file, int(lineno)])
        i += 2
    mapping = {k: v for k, v in mapping.items() if v}
    pathlib.Path(out_path).write_text(json.dumps(mapping, indent=1))


def main():
    work = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "/tmp/blockpair-fixtures")
    (work / "build").mkdir(parents=True, exist_ok=True)
    prefix_map = f"-fdebug-prefix-map={work}=/build"

    src = FIXTURES / "src"
    builds = {
        "ternary_O0": ["gcc", "-g", "-O0", prefix_map, "-o", work / "build/ternary_O0", src / "ternary.c"],
        "ternary_O3": ["gcc", "-g", "-O3", prefix_map, "-o", work / "build/ternary_O3", src / "ternary.c"],
    }
    for cmd in builds.values():
        sh(*cmd)
    # gzip_like: 3 program functions only, so link without the C runtime
    obj = work / "build/gzip_like_O0.o"
    sh("gcc", "-g", "-O0", prefix_map, "-c", "-o", obj, src / "gzip_like.c")
    sh("gcc", obj, "-o", work / "build/gzip_like_O0", "-nostartfiles", "-Wl,-e,crc_seed")

    jobs = [
        ("ternary_O0", "ternary", "O0", "ternary_O0.dump.json", "ternary_O0.annotations.json"),
        ("ternary_O3", "ternary", "O3", "ternary_O3.dump.json", "ternary_O3.annotations.json"),
        ("gzip_like_O0", "gzip_like", "O0", "gzip_like_O0_x86_64.dump.json", "gzip_like_O0.annotations.json"),
    ]
    for binary, program, opt, dump_name, ann_name in jobs:
        dump_path = FIXTURES / dump_name
        sh(
            sys.executable, EXPORTER, work / "build" / binary,
            "--isa", "x86_64", "--compiler", "gcc", "--opt-level", opt,
            "--program", program, "--binary-path", f"build/{binary}",
            "-o", dump_path,
        )
        annotate(dump_path, work / "build" / binary, FIXTURES / ann_name)

    doc = json.loads((FIXTURES / "gzip_like_O0_x86_64.dump.json").read_text())
    counts = {
        "functions": len(doc["functions"]),
        "blocks": sum(len(f["blocks"]) for f in doc["functions"]),
        "instructions": sum(
            len(b["instructions"]) for f in doc["functions"] for b in f["blocks"]
        ),
    }
    (FIXTURES / "gzip_like_counts.json").write_text(json.dumps(counts, indent=1))
    print("counts:", counts)
    print("NOTE: refresh tests/fixtures/golden/ and the block-labels golden by "
          "running the pipeline and reviewing its output before freezing.")


if __name__ == "__main__":
    main()

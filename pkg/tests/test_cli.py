import json
import shutil
from pathlib import Path

import pytest

from blockpair.cli import (
    EXIT_OK,
    EXIT_STAGE,
    EXIT_TOOL,
    EXIT_VALIDATION,
    RunManifest,
    build_matrix,
    main,
    run,
)
from blockpair.errors import ManifestError, ToolchainMissingError

FIXTURES = Path(__file__).parent / "fixtures"


def manifest_obj(**overrides):
    doc = {
        "matrix": [
            {
                "isa": "x86_64",
                "compiler": "gcc",
                "opt_level": "O0",
                "program": "ternary",
                "dump": str(FIXTURES / "ternary_O0.dump.json"),
                "annotations": str(FIXTURES / "ternary_O0.annotations.json"),
            },
            {
                "isa": "x86_64",
                "compiler": "gcc",
                "opt_level": "O3",
                "program": "ternary",
                "dump": str(FIXTURES / "ternary_O3.dump.json"),
                "annotations": str(FIXTURES / "ternary_O3.annotations.json"),
            },
        ],
        "resolver": "file",
        "seed": 20240601,
    }
    doc.update(overrides)
    return doc


class TestManifestValidation:
    def test_single_config_rejected(self, tmp_json):
        doc = manifest_obj()
        doc["matrix"] = doc["matrix"][:1]
        with pytest.raises(ManifestError):
            RunManifest.load(tmp_json("m.json", doc))

    def test_unknown_opt_level_rejected(self, tmp_json):
        doc = manifest_obj()
        doc["matrix"][0]["opt_level"] = "O4"
        with pytest.raises(ManifestError):
            RunManifest.load(tmp_json("m.json", doc))

    def test_duplicate_coordinate_rejected(self, tmp_json):
        doc = manifest_obj()
        doc["matrix"][1] = dict(doc["matrix"][0])
        with pytest.raises(ManifestError):
            RunManifest.load(tmp_json("m.json", doc))

    def test_validation_exit_code(self, tmp_json, capsys):
        doc = manifest_obj()
        doc["matrix"] = doc["matrix"][:1]
        assert main(["--manifest", str(tmp_json("m.json", doc))]) == EXIT_VALIDATION
        assert "manifest" in capsys.readouterr().err


class TestRun:
    def test_full_run_writes_artifacts(self, tmp_json, tmp_path, capsys):
        path = tmp_json("m.json", manifest_obj(out=str(tmp_path / "runs")))
        assert main(["--manifest", str(path)]) == EXIT_OK
        run_dir = Path(capsys.readouterr().out.strip())
        for name in ("pairs.jsonl", "stats.json", "unmatched.json", "events.jsonl"):
            assert (run_dir / name).exists()

    def test_rerun_is_byte_identical(self, tmp_json, tmp_path):
        m1 = RunManifest.load(tmp_json("m1.json", manifest_obj(out=str(tmp_path / "a"))))
        m2 = RunManifest.load(tmp_json("m2.json", manifest_obj(out=str(tmp_path / "b"))))
        (dir_a,) = run(m1)
        (dir_b,) = run(m2)
        for name in ("pairs.jsonl", "stats.json", "unmatched.json"):
            assert (Path(dir_a) / name).read_bytes() == (Path(dir_b) / name).read_bytes()

    def test_matches_committed_golden(self, tmp_json, tmp_path):
        m = RunManifest.load(tmp_json("m.json", manifest_obj(out=str(tmp_path / "runs"))))
        (run_dir,) = run(m)
        for name in ("pairs.jsonl", "stats.json", "unmatched.json"):
            assert (Path(run_dir) / name).read_bytes() == (FIXTURES / "golden" / name).read_bytes()

    def test_stage_counts_monotone(self, tmp_json, tmp_path):
        m = RunManifest.load(tmp_json("m.json", manifest_obj(out=str(tmp_path / "runs"))))
        (run_dir,) = run(m)
        events = [json.loads(l) for l in open(Path(run_dir) / "events.jsonl", encoding="utf-8")]
        annots = [e for e in events if e["stage"] == "annotate"]
        assert annots
        for e in annots:
            assert e["counts"]["blocks_after"] <= e["counts"]["blocks_before"]
        merges = [e for e in events if e["stage"] == "bmerge"]
        assert merges
        for e in merges:
            assert 1 <= e["counts"]["after"] <= e["counts"]["before"]

    def test_missing_resolver_exit_code(self, tmp_json, tmp_path, capsys):
        doc = manifest_obj(out=str(tmp_path / "runs"), resolver="/nonexistent/addr2line")
        for entry in doc["matrix"]:
            entry.pop("annotations")
            entry["binary"] = "missing-binary"
        assert main(["--manifest", str(tmp_json("m.json", doc))]) == EXIT_TOOL

    def test_malformed_dump_exit_code(self, tmp_json, tmp_path):
        bad = tmp_path / "bad.dump.json"
        bad.write_text("{}", encoding="utf-8")
        doc = manifest_obj(out=str(tmp_path / "runs"))
        doc["matrix"][0]["dump"] = str(bad)
        assert main(["--manifest", str(tmp_json("m.json", doc))]) == EXIT_STAGE


class TestStageDebug:
    def test_bmerge_stage_prints_refined_blocks(self, capsys):
        rc = main(
            [
                "--stage",
                "bmerge",
                "--dump",
                str(FIXTURES / "ternary_O0.dump.json"),
                "--annotations",
                str(FIXTURES / "ternary_O0.annotations.json"),
            ]
        )
        assert rc == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        blocks = out["x86_64-gcc-O0"]["pick"]
        assert len(blocks) == 2  # ternary arms folded into the entry block
        merged = next(b for b in blocks if len(b["merged_from"]) > 1)
        assert ["ternary.c", 19] in merged["labels"]

    def test_stage_requires_dump(self, capsys):
        assert main(["--stage", "bmerge"]) == EXIT_VALIDATION

    def test_bpair_stage_over_two_dumps(self, capsys):
        rc = main(
            [
                "--stage",
                "bpair",
                "--dump",
                str(FIXTURES / "ternary_O0.dump.json"),
                "--dump",
                str(FIXTURES / "ternary_O3.dump.json"),
                "--annotations",
                str(FIXTURES / "ternary_O0.annotations.json"),
                "--annotations",
                str(FIXTURES / "ternary_O3.annotations.json"),
            ]
        )
        assert rc == EXIT_OK
        out = json.loads(capsys.readouterr().out)
        assert {p["function"] for p in out["pairs"]} == {"main", "pick", "scale_byte"}
        assert out["unmatched"]["left_only_functions"] == ["mix"]


class TestBuildMatrix:
    def entry_manifest(self, tmp_path, isa, compiler):
        return RunManifest.from_obj(
            {
                "matrix": [
                    {
                        "isa": isa,
                        "compiler": compiler,
                        "opt_level": "O0",
                        "program": "t",
                        "source": str(FIXTURES / "src" / "ternary.c"),
                        "binary": str(tmp_path / f"t_{isa}_{compiler}"),
                    },
                    {
                        "isa": isa,
                        "compiler": compiler,
                        "opt_level": "O3",
                        "program": "t",
                        "source": str(FIXTURES / "src" / "ternary.c"),
                        "binary": str(tmp_path / f"t_{isa}_{compiler}_O3"),
                    },
                ]
            }
        )

    def test_missing_cross_compiler_reported(self, tmp_path):
        if shutil.which("arm-linux-gnueabihf-gcc"):
            pytest.skip("cross compiler present on this host")
        with pytest.raises(ToolchainMissingError) as err:
            build_matrix(self.entry_manifest(tmp_path, "arm32", "gcc"))
        assert "arm-linux-gnueabihf-gcc" in str(err.value)

    @pytest.mark.skipif(shutil.which("gcc") is None, reason="no host gcc")
    def test_native_build_produces_binary_with_debug_info(self, tmp_path):
        import subprocess

        manifest = self.entry_manifest(tmp_path, "x86_64", "gcc")
        log = []
        produced = build_matrix(manifest, log=log)
        assert len(produced) == 2
        assert all(Path(p).exists() for p in produced)
        assert all("-g" in ev["command"] for ev in log)
        # debug info present: the resolver maps the entry point somewhere
        out = subprocess.run(
            ["addr2line", "-e", produced[0], "0x0"], capture_output=True, text=True
        )
        assert out.returncode == 0

"""Canonical output encodings, out-dir safety, content hashes and the manifest."""
from __future__ import annotations

import json
from pathlib import Path

import blake3
import numpy as np
import pytest

from qmelab.const import ErrorCode
from qmelab.emit import (
    RunManifest,
    canonical_json_bytes,
    format_cell,
    guard_out_dir_wipe,
    prepare_out_dir,
    seal,
    write_csv,
    write_fig2_script,
    write_json,
)
from qmelab.errors import ConfigError
from qmelab.merkle import (
    EMPTY_ROOT,
    MANIFEST_NAME,
    compute_merkle_root,
    file_digest,
    merkle_root_of,
    output_files,
)


def _node(a: bytes, b: bytes) -> bytes:
    return blake3.blake3(b"\x01" + a + b).digest()


# ── Encodings ────────────────────────────────────────────────────────────────

def test_canonical_json_is_sorted_and_compact() -> None:
    assert canonical_json_bytes({"b": 1, "a": [1.5, "x"]}) == b'{"a":[1.5,"x"],"b":1}\n'
    assert canonical_json_bytes({"k": "é"}) == '{"k":"é"}\n'.encode("utf-8")


def test_format_cell() -> None:
    assert format_cell(0.1) == "0.1"
    assert format_cell(np.float64(1.0) / 3.0) == repr(1.0 / 3.0)
    assert format_cell(np.int64(7)) == "7"
    assert format_cell(True) == "1"
    assert format_cell("x") == "x"
    assert float(format_cell(np.float64(2.0) ** -40)) == 2.0**-40


def test_csv_with_provenance(tmp_path: Path) -> None:
    path = write_csv(tmp_path / "sub" / "t.csv", ["t", "Q"], [[0.0, 0.25], [1.0, -1e-17]], {"seed": 3, "N": 40})
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == '# {"N":40,"seed":3}'
    assert lines[1:] == ["t,Q", "0.0,0.25", "1.0,-1e-17"]


def test_csv_with_no_rows_keeps_header(tmp_path: Path) -> None:
    path = write_csv(tmp_path / "e.csv", ["lambda", "log_G"], [])
    assert path.read_bytes() == b"lambda,log_G\n"


def test_write_json(tmp_path: Path) -> None:
    path = write_json(tmp_path / "r.json", {"z": 0, "a": None})
    assert path.read_bytes() == b'{"a":null,"z":0}\n'


def test_fig2_script_references_files(tmp_path: Path) -> None:
    path = write_fig2_script(tmp_path / "fig2.gp", ["fig2a_symmetrized.csv", "fig2a_redfield.csv"],
                             "fig2b_heat.csv", ["Q_mgf", "Q_exact"])
    text = path.read_text(encoding="utf-8")
    assert "'fig2a_redfield.csv' using 1:3" in text
    assert "'fig2b_heat.csv' using 1:3 with lines title 'Q_exact'" in text
    assert sum(line.startswith("plot ") for line in text.splitlines()) == 2


# ── Output directory ─────────────────────────────────────────────────────────

def test_guard_allows_empty_and_previous_runs(tmp_path: Path) -> None:
    guard_out_dir_wipe(tmp_path)
    (tmp_path / MANIFEST_NAME).write_text("{}", encoding="utf-8")
    (tmp_path / "trajectory.csv").write_text("t\n", encoding="utf-8")
    guard_out_dir_wipe(tmp_path)


def test_guard_refuses_foreign_directories(tmp_path: Path) -> None:
    (tmp_path / "thesis.tex").write_text("...", encoding="utf-8")
    with pytest.raises(ConfigError, match="not a previous qmelab run") as info:
        guard_out_dir_wipe(tmp_path)
    assert info.value.code == ErrorCode.E_OUT_DIR


def test_guard_refuses_nested_runs(tmp_path: Path) -> None:
    (tmp_path / MANIFEST_NAME).write_text("{}", encoding="utf-8")
    (tmp_path / "old").mkdir()
    (tmp_path / "old" / MANIFEST_NAME).write_text("{}", encoding="utf-8")
    with pytest.raises(ConfigError, match="nested run manifests"):
        guard_out_dir_wipe(tmp_path)


def test_prepare_out_dir_replaces_previous_run(tmp_path: Path) -> None:
    out = tmp_path / "run"
    prepare_out_dir(out)
    (out / MANIFEST_NAME).write_text("{}", encoding="utf-8")
    (out / "stale.csv").write_text("x\n", encoding="utf-8")
    prepare_out_dir(out)
    assert list(out.iterdir()) == []


def test_prepare_out_dir_rejects_a_file(tmp_path: Path) -> None:
    target = tmp_path / "file"
    target.write_text("x", encoding="utf-8")
    with pytest.raises(ConfigError, match="not a directory"):
        prepare_out_dir(target)


# ── Hashes ───────────────────────────────────────────────────────────────────

def test_empty_root() -> None:
    assert merkle_root_of([]) == EMPTY_ROOT == blake3.blake3(b"\x01").hexdigest()


def test_odd_leaf_is_promoted() -> None:
    a, b, c = (blake3.blake3(x).digest() for x in (b"a", b"b", b"c"))
    assert merkle_root_of([a]) == a.hex()
    assert merkle_root_of([a, b, c]) == _node(_node(a, b), c).hex()
    assert merkle_root_of([a, b, c]) != merkle_root_of([b, a, c])


def test_output_files_skip_manifest_and_sort(tmp_path: Path) -> None:
    (tmp_path / "b.csv").write_text("1", encoding="utf-8")
    (tmp_path / "a").mkdir()
    (tmp_path / "a" / "z.json").write_text("2", encoding="utf-8")
    (tmp_path / MANIFEST_NAME).write_text("{}", encoding="utf-8")
    assert [rel for rel, _ in output_files(tmp_path)] == ["a/z.json", "b.csv"]


def test_root_depends_on_paths_and_content(tmp_path: Path) -> None:
    one, two = tmp_path / "one", tmp_path / "two"
    for d in (one, two):
        d.mkdir()
    (one / "x.csv").write_text("1\n", encoding="utf-8")
    (two / "y.csv").write_text("1\n", encoding="utf-8")
    assert compute_merkle_root(one) != compute_merkle_root(two)
    assert file_digest(one / "x.csv") == file_digest(two / "y.csv")


def test_seal_writes_manifest(tmp_path: Path) -> None:
    write_csv(tmp_path / "t.csv", ["t"], [[0.0]])
    manifest = RunManifest("check", {"scheme": {"name": "secular"}}, verdicts={"gqdb": "pass", "sinc": "report"})
    seal(tmp_path, manifest)
    doc = json.loads((tmp_path / MANIFEST_NAME).read_text(encoding="utf-8"))
    assert doc["command"] == "check"
    assert doc["files"] == [{"path": "t.csv", "blake3": file_digest(tmp_path / "t.csv")}]
    assert doc["integrity"] == {"algorithm": "blake3", "merkle_root": compute_merkle_root(tmp_path)}
    assert set(doc["versions"]) == {"python", "numpy", "scipy", "qmelab"}
    assert not any("wall" in key for key in doc)
    assert manifest.passed
    manifest.verdicts["ft_work"] = "fail"
    assert not manifest.passed

"""Output emission: canonical JSON, bit-stable CSV, the run manifest and plot scripts.

JSON documents are one canonical encoding
(``sort_keys=True, separators=(",", ":"), ensure_ascii=False``) plus a
single trailing newline. CSV floats are written with ``repr`` so a value
round-trips exactly and reruns are byte-identical.
"""
from __future__ import annotations

import csv
import json
import platform
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .const import ErrorCode
from .errors import ConfigError
from .merkle import MANIFEST_NAME, compute_merkle_root, file_hashes


def canonical_json_bytes(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8") + b"\n"


def write_json(path: Path, obj: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(canonical_json_bytes(obj))
    return path


def format_cell(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]],
              provenance: Optional[Mapping[str, Any]] = None) -> Path:
    """Header row always written, so an empty grid still yields a valid file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        if provenance is not None:
            fh.write("# " + canonical_json_bytes(dict(provenance)).decode("utf-8"))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([format_cell(x) for x in row])
    return path


# ── Output directory ─────────────────────────────────────────────────────────

def guard_out_dir_wipe(out_dir: Path) -> None:
    """Refuse to delete an out_dir that is not a previous qmelab run.

    Deleting is permitted only when ``out_dir`` is empty, or holds a single
    previous run: ``manifest.json`` at its root and no nested directory
    carrying its own manifest.
    """
    if not any(out_dir.iterdir()):
        return
    if not (out_dir / MANIFEST_NAME).is_file():
        raise ConfigError(
            f"refusing to delete {out_dir}: it is non-empty and has no {MANIFEST_NAME} at its root, "
            f"so it is not a previous qmelab run. Use a fresh directory.",
            ErrorCode.E_OUT_DIR,
        )
    nested = sorted(p.parent for p in out_dir.rglob(MANIFEST_NAME) if p.parent != out_dir)
    if nested:
        listing = ", ".join(str(p) for p in nested)
        raise ConfigError(
            f"refusing to delete {out_dir}: it contains nested run manifests ({listing})",
            ErrorCode.E_OUT_DIR,
        )


def prepare_out_dir(out_dir: Path) -> Path:
    if out_dir.exists():
        if not out_dir.is_dir():
            raise ConfigError(f"output path {out_dir} is not a directory", ErrorCode.E_OUT_DIR)
        guard_out_dir_wipe(out_dir)
        shutil.rmtree(out_dir)
    try:
        out_dir.mkdir(parents=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out_dir}: {exc}", ErrorCode.E_OUT_DIR) from exc
    return out_dir


# ── Manifest ─────────────────────────────────────────────────────────────────

def versions() -> Dict[str, str]:
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "qmelab": __version__}


@dataclass
class RunManifest:
    command: str
    config: Dict[str, Any]
    verdicts: Dict[str, str] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    # stdout result line only; manifest.json stays byte-identical across reruns
    wall_clock: float = 0.0
    files: Dict[str, str] = field(default_factory=dict)
    merkle_root: str = ""

    @property
    def passed(self) -> bool:
        return all(v != "fail" for v in self.verdicts.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tool": "qmelab",
            "version": __version__,
            "command": self.command,
            "config": self.config,
            "versions": versions(),
            "verdicts": dict(self.verdicts),
            "summary": self.summary,
            "files": [{"path": p, "blake3": h} for p, h in sorted(self.files.items())],
            "integrity": {"algorithm": "blake3", "merkle_root": self.merkle_root},
        }


def seal(out_dir: Path, manifest: RunManifest) -> RunManifest:
    """Hash every emitted file, then write manifest.json (excluded from its own root)."""
    manifest.files = file_hashes(out_dir)
    manifest.merkle_root = compute_merkle_root(out_dir)
    write_json(out_dir / MANIFEST_NAME, manifest.to_dict())
    return manifest


# ── Plot script ──────────────────────────────────────────────────────────────

FIG2_SCRIPT = """\
# gnuplot script written by qmelab fig2
set datafile separator ','
set datafile commentschars '#'
set key autotitle columnhead
set terminal pngcairo size 1200,480
set output 'fig2.png'
set multiplot layout 1,2

set title 'detailed fluctuation theorem'
set xlabel 'lambda'
set ylabel 'log G'
plot {panel_a}

set title 'heat'
set xlabel 't'
set ylabel 'Q'
plot {panel_b}

unset multiplot
"""


def write_fig2_script(path: Path, ft_files: List[str], heat_file: str, heat_columns: Sequence[str]) -> Path:
    panel_a = ", \\\n     ".join(
        f"'{f}' using 1:2 with lines title '{Path(f).stem} forward', "
        f"'{f}' using 1:3 with points title '{Path(f).stem} reversed'"
        for f in ft_files
    )
    panel_b = ", \\\n     ".join(
        f"'{heat_file}' using 1:{i + 2} with lines title '{name}'" for i, name in enumerate(heat_columns)
    )
    path.write_text(FIG2_SCRIPT.format(panel_a=panel_a, panel_b=panel_b), encoding="utf-8")
    return path

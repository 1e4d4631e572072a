"""Content hashes for run outputs.

Every emitted file gets a BLAKE3 digest, and the output directory as a whole
gets one Merkle root:

    leaf  = BLAKE3(0x00 || relpath_utf8 || 0x00 || file_bytes)
    node  = BLAKE3(0x01 || left || right)
    odd   = promoted unchanged
    empty = BLAKE3(0x01)

Leaves are every regular file under the output directory except
manifest.json, sorted by the UTF-8 bytes of the POSIX relative path.
"""
from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Tuple

import blake3

EMPTY_ROOT = blake3.blake3(b"\x01").hexdigest()
MANIFEST_NAME = "manifest.json"
HASH_CHUNK_SIZE = 64 * 1024


def output_files(out_dir: Path) -> List[Tuple[str, Path]]:
    files = [
        (p.relative_to(out_dir).as_posix(), p)
        for p in out_dir.rglob("*")
        if p.is_file() and p.relative_to(out_dir).as_posix() != MANIFEST_NAME
    ]
    files.sort(key=lambda x: x[0].encode("utf-8"))
    return files


def file_digest(path: Path) -> str:
    h = blake3.blake3()
    with path.open("rb") as f:
        for chunk in iter(lambda: f.read(HASH_CHUNK_SIZE), b""):
            h.update(chunk)
    return h.hexdigest()


def file_hashes(out_dir: Path) -> Dict[str, str]:
    return {rel: file_digest(p) for rel, p in output_files(out_dir)}


def _leaf(rel: str, data: bytes) -> bytes:
    return blake3.blake3(b"\x00" + rel.encode("utf-8") + b"\x00" + data).digest()


def merkle_root_of(leaves: List[bytes]) -> str:
    if not leaves:
        return EMPTY_ROOT
    level = list(leaves)
    while len(level) > 1:
        nxt = [blake3.blake3(b"\x01" + level[i] + level[i + 1]).digest() for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0].hex()


def compute_merkle_root(out_dir: Path) -> str:
    return merkle_root_of([_leaf(rel, p.read_bytes()) for rel, p in output_files(out_dir)])

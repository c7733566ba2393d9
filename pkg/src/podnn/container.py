"""Bit-exact artifact persistence: matrix container files plus a JSON manifest.

Matrix files carry the magic bytes ``PDNN``, a little-endian u16 version,
u32 row and column counts, and the float64 entries in column-major order.
Every save updates ``manifest.json`` with the file's SHA-256, so stores can
be verified, diffed for determinism, and resumed stage by stage.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

__all__ = ["write_matrix", "read_matrix", "ArtifactStore", "save_network", "load_network"]

MAGIC = b"PDNN"
VERSION = 1
_HEADER = struct.Struct("<4sHII")


def write_matrix(path, arr) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError("only vectors and matrices are supported")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, arr.shape[0], arr.shape[1]))
        fh.write(np.asfortranarray(arr).tobytes(order="F"))


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        magic, version, rows, cols = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        data = fh.read(8 * rows * cols)
    if len(data) != 8 * rows * cols:
        raise ValueError(f"{path}: truncated payload")
    return np.frombuffer(data, dtype="<f8").reshape((rows, cols), order="F").copy()


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class ArtifactStore:
    """Directory of container/JSON/CSV artifacts tracked by a hash manifest."""

    def __init__(self, root, create: bool = True):
        self.root = Path(root)
        if create:
            self.root.mkdir(parents=True, exist_ok=True)
        self._manifest_path = self.root / "manifest.json"

    @property
    def manifest(self) -> dict:
        if self._manifest_path.exists():
            return json.loads(self._manifest_path.read_text())
        return {"files": {}, "meta": {}}

    def _update_manifest(self, name: str) -> None:
        manifest = self.manifest
        manifest["files"][name] = _sha256(self.root / name)
        self._manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    def set_meta(self, key: str, value) -> None:
        manifest = self.manifest
        manifest["meta"][key] = value
        self._manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    def get_meta(self, key: str, default=None):
        return self.manifest["meta"].get(key, default)

    def path(self, name: str) -> Path:
        return self.root / name

    def has(self, name: str) -> bool:
        entry = self.manifest["files"].get(name)
        p = self.root / name
        return entry is not None and p.exists() and _sha256(p) == entry

    def save_matrix(self, name: str, arr) -> None:
        write_matrix(self.root / name, arr)
        self._update_manifest(name)

    def load_matrix(self, name: str, verify: bool = True) -> np.ndarray:
        if verify and not self.has(name):
            raise FileNotFoundError(f"{name} missing from store or hash mismatch")
        return read_matrix(self.root / name)

    def save_json(self, name: str, obj) -> None:
        (self.root / name).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
        self._update_manifest(name)

    def load_json(self, name: str, verify: bool = True):
        if verify and not self.has(name):
            raise FileNotFoundError(f"{name} missing from store or hash mismatch")
        return json.loads((self.root / name).read_text())

    def save_text(self, name: str, text: str) -> None:
        (self.root / name).write_text(text)
        self._update_manifest(name)

    def verify_all(self) -> bool:
        files = self.manifest["files"]
        return all(
            (self.root / name).exists() and _sha256(self.root / name) == digest
            for name, digest in files.items()
        )


def save_network(store: ArtifactStore, prefix: str, layers, meta: dict | None = None) -> None:
    """Persist (weight, bias) layers in the matrix container format.

    Works for trained MLPs and for constructed ReLU networks alike (sparse
    weights are densified; intended for small networks).
    """
    meta = dict(meta or {})
    meta["n_layers"] = len(layers)
    for i, (w, b) in enumerate(layers):
        dense = w.toarray() if hasattr(w, "toarray") else np.asarray(w, dtype=float)
        store.save_matrix(f"{prefix}_w{i}.pdnn", dense)
        store.save_matrix(f"{prefix}_b{i}.pdnn", np.asarray(b, dtype=float))
    store.save_json(f"{prefix}.json", meta)


def load_network(store: ArtifactStore, prefix: str):
    """Load layers saved by :func:`save_network`; returns (layers, meta)."""
    meta = store.load_json(f"{prefix}.json")
    layers = []
    for i in range(meta["n_layers"]):
        w = store.load_matrix(f"{prefix}_w{i}.pdnn")
        b = store.load_matrix(f"{prefix}_b{i}.pdnn").ravel()
        layers.append((w, b))
    return layers, meta

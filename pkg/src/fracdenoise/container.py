"""Versioned binary container for checkpoints and feature caches.

Layout (all integers little-endian)::

    offset  size  field
    0       8     magic  b"FRACDNZ\\0"
    8       4     uint32 format version
    12      4     uint32 header length H in bytes
    16      H     UTF-8 JSON header
    16+H    ...   tensors, float64 little-endian, C order, in header order

The header is an object ``{"kind": str, "meta": {...}, "tensors":
[{"name": str, "shape": [int, ...]}, ...]}``. The payload must be exactly
as long as the declared shapes require.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datapipe import Scaler
from .network import ArchSpec, NetworkParams

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "FormatError",
    "Container",
    "write_container",
    "read_container",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "save_features",
    "load_features",
]

MAGIC = b"FRACDNZ\0"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sII")
_F8 = np.dtype("<f8")


class FormatError(ValueError):
    """File is not a container of the expected version, kind or shape."""


@dataclass
class Container:
    kind: str
    meta: dict
    tensors: dict[str, np.ndarray] = field(default_factory=dict)


def write_container(path, kind: str, meta: dict, tensors) -> None:
    items = [(name, np.ascontiguousarray(a, dtype=_F8)) for name, a in tensors]
    header = {
        "kind": kind,
        "meta": meta,
        "tensors": [{"name": n, "shape": list(a.shape)} for n, a in items],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    try:
        with path.open("wb") as fh:
            fh.write(_PREFIX.pack(MAGIC, FORMAT_VERSION, len(blob)))
            fh.write(blob)
            for _, a in items:
                fh.write(a.tobytes())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_container(path, kind: str | None = None) -> Container:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    if len(data) < _PREFIX.size:
        raise FormatError(f"{path}: truncated container prefix")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: not a fracdenoise container (bad magic)")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: container version {version}, this build reads version {FORMAT_VERSION}")
    start = _PREFIX.size + hlen
    if start > len(data):
        raise FormatError(f"{path}: header length {hlen} runs past end of file")
    try:
        header = json.loads(data[_PREFIX.size : start].decode("utf-8"))
        specs = [(t["name"], tuple(int(d) for d in t["shape"])) for t in header["tensors"]]
        found_kind = header["kind"]
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed header ({exc})") from exc
    if kind is not None and found_kind != kind:
        raise FormatError(f"{path}: expected a {kind!r} container, found {found_kind!r}")
    need = sum(int(np.prod(s)) for _, s in specs) * _F8.itemsize
    if len(data) - start != need:
        raise FormatError(f"{path}: payload has {len(data) - start} bytes, header declares {need}")
    tensors, pos = {}, start
    for name, shape in specs:
        size = int(np.prod(shape)) * _F8.itemsize
        tensors[name] = np.frombuffer(data, dtype=_F8, count=size // 8, offset=pos).reshape(shape).astype(np.float64)
        pos += size
    return Container(found_kind, header.get("meta", {}), tensors)


# -- checkpoints --------------------------------------------------------------


@dataclass
class Checkpoint:
    params: NetworkParams
    arch: ArchSpec
    alpha: float
    scaler: Scaler
    meta: dict = field(default_factory=dict)


def save_checkpoint(path, params: NetworkParams, arch: ArchSpec, alpha: float, scaler: Scaler, extra: dict | None = None) -> None:
    params.check(arch)
    meta = {"arch": arch.to_dict(), "alpha": float(alpha), **(extra or {})}
    tensors = list(params.items()) + [("scaler.mean", scaler.mean), ("scaler.std", scaler.std)]
    write_container(path, "checkpoint", meta, tensors)


def load_checkpoint(path, expect_arch: ArchSpec | None = None) -> Checkpoint:
    c = read_container(path, "checkpoint")
    try:
        arch = ArchSpec.from_dict(c.meta["arch"])
        alpha = float(c.meta["alpha"])
        scaler = Scaler(c.tensors.pop("scaler.mean"), c.tensors.pop("scaler.std"))
        params = NetworkParams.from_items(c.tensors.items())
        params.check(arch)
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"{path}: checkpoint v{FORMAT_VERSION} does not match its architecture ({exc})") from exc
    if expect_arch is not None and arch != expect_arch:
        raise FormatError(f"{path}: checkpoint v{FORMAT_VERSION} holds a different architecture than requested")
    if scaler.mean.shape != (arch.input_len,):
        raise FormatError(f"{path}: scaler length {scaler.mean.shape} != input length {arch.input_len}")
    meta = {k: v for k, v in c.meta.items() if k not in ("arch", "alpha")}
    return Checkpoint(params, arch, alpha, scaler, meta)


# -- feature caches -----------------------------------------------------------


def save_features(path, noisy, clean, scaler: Scaler, meta: dict | None = None) -> None:
    tensors = [("noisy", noisy), ("clean", clean), ("scaler.mean", scaler.mean), ("scaler.std", scaler.std)]
    write_container(path, "features", meta or {}, tensors)


def load_features(path):
    """Returns ``(noisy, clean, scaler, meta)``."""
    c = read_container(path, "features")
    try:
        t = c.tensors
        return t["noisy"], t["clean"], Scaler(t["scaler.mean"], t["scaler.std"]), c.meta
    except KeyError as exc:
        raise FormatError(f"{path}: feature cache lacks tensor {exc}") from exc

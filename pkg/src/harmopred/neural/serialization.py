"""Flat binary parameter layout with a text manifest.

The payload is every array in manifest order, each stored as little-endian
float64 in row-major order with no padding. The manifest has one line per
array: ``<key> float64 <d0>x<d1>...`` (a scalar-free layout, so every key has
at least one dimension). Keys are ordered by layer, then by gate as laid out
in :mod:`harmopred.neural.layers`.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

DTYPE = np.dtype("<f8")


def pack_params(params, order=None) -> tuple[bytes, str]:
    """Return ``(payload, manifest)``. ``order`` defaults to sorted keys."""
    keys = list(order) if order is not None else sorted(params)
    chunks, lines = [], []
    for k in keys:
        if any(c.isspace() for c in k):
            raise ValueError(f"parameter key {k!r} contains whitespace")
        arr = np.ascontiguousarray(params[k], dtype=DTYPE)
        chunks.append(arr.tobytes(order="C"))
        lines.append(f"{k} float64 {'x'.join(str(d) for d in arr.shape)}")
    return b"".join(chunks), "\n".join(lines) + ("\n" if lines else "")


def parse_manifest(manifest: str) -> list[tuple[str, tuple[int, ...]]]:
    out = []
    for n, line in enumerate(manifest.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3 or parts[1] != "float64":
            raise ValueError(f"manifest line {n}: expected '<key> float64 <shape>', got {line!r}")
        try:
            shape = tuple(int(d) for d in parts[2].split("x"))
        except ValueError:
            raise ValueError(f"manifest line {n}: bad shape {parts[2]!r}") from None
        out.append((parts[0], shape))
    return out


def unpack_params(payload: bytes, manifest: str) -> dict[str, np.ndarray]:
    entries = parse_manifest(manifest)
    need = sum(int(np.prod(s)) for _, s in entries) * DTYPE.itemsize
    if len(payload) != need:
        raise ValueError(f"payload has {len(payload)} bytes, manifest describes {need}")
    out, pos = {}, 0
    for key, shape in entries:
        size = int(np.prod(shape)) * DTYPE.itemsize
        out[key] = np.frombuffer(payload, dtype=DTYPE, count=size // DTYPE.itemsize, offset=pos).reshape(shape).astype(np.float64)
        pos += size
    return out


def save_params(params, path, order=None) -> tuple[Path, Path]:
    """Write ``path`` (payload) and ``path`` + ``.manifest``."""
    path = Path(path)
    payload, manifest = pack_params(params, order)
    path.write_bytes(payload)
    mpath = path.with_name(path.name + ".manifest")
    mpath.write_text(manifest, encoding="utf-8")
    return path, mpath


def load_params(path) -> dict[str, np.ndarray]:
    path = Path(path)
    manifest = path.with_name(path.name + ".manifest").read_text(encoding="utf-8")
    return unpack_params(path.read_bytes(), manifest)

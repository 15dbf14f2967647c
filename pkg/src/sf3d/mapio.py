"""On-disk formats for feature maps and weight tensors.

SFMAP1 layout: ``b"SFMAP1"``, u32 rows, u32 cols, then ``rows * cols``
little-endian f64 values in row-major order.

SFTEN1 (weights): ``b"SFTEN1"``, u32 tensor count, then per tensor
u32 name length, UTF-8 name, u32 ndim, ndim x u32 dims, f64 values
(little-endian, row-major).
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

SFMAP_MAGIC = b"SFMAP1"
SFTEN_MAGIC = b"SFTEN1"


def write_sfmap(path, values) -> None:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"SFMAP1 stores 2-D maps, got shape {arr.shape}")
    rows, cols = arr.shape
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(SFMAP_MAGIC)
        fh.write(struct.pack("<II", rows, cols))
        fh.write(np.ascontiguousarray(arr).astype("<f8").tobytes())


def read_sfmap(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:6] != SFMAP_MAGIC:
        raise ValueError(f"{path} is not an SFMAP1 file")
    rows, cols = struct.unpack_from("<II", raw, 6)
    body = raw[14:]
    if len(body) != rows * cols * 8:
        raise ValueError(f"{path}: expected {rows * cols} values, found {len(body) // 8}")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)


def write_map_csv(path, values) -> None:
    """One row per cell: ``f,t,value``."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D map, got shape {arr.shape}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    f_idx, t_idx = np.indices(arr.shape)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["f", "t", "value"])
        for f, t, v in zip(f_idx.ravel(), t_idx.ravel(), arr.ravel()):
            w.writerow([int(f), int(t), repr(float(v))])


def read_map_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} has no data rows")
    f = np.array([int(r["f"]) for r in rows])
    t = np.array([int(r["t"]) for r in rows])
    out = np.full((f.max() + 1, t.max() + 1), np.nan)
    out[f, t] = [float(r["value"]) for r in rows]
    return out


def write_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(SFTEN_MAGIC)
        fh.write(struct.pack("<I", len(tensors)))
        for name, t in tensors.items():
            arr = np.asarray(t, dtype=np.float64)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr).astype("<f8").tobytes())


def read_tensors(path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[:6] != SFTEN_MAGIC:
        raise ValueError(f"{path} is not an SFTEN1 file")
    (count,) = struct.unpack_from("<I", raw, 6)
    pos = 10
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        name = raw[pos : pos + nlen].decode("utf-8")
        pos += nlen
        (ndim,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}I", raw, pos)
        pos += 4 * ndim
        n = int(np.prod(shape)) if ndim else 1
        out[name] = np.frombuffer(raw, dtype="<f8", count=n, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * n
    if pos != len(raw):
        raise ValueError(f"{path} has {len(raw) - pos} trailing bytes")
    return out

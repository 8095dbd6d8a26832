"""Core grid data model and the single-file tensor-bundle container.

A bundle is a flat container of named arrays with dtypes f32 or u8:

    magic "DBXB" | version u32 LE | manifest length u32 LE |
    manifest (UTF-8 JSON list of {name, dtype, shape, offset}) | blob

Offsets index into the blob, entries must not overlap, and all f32
payloads must be finite. Everything is little-endian.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    DimMismatch,
    IoFailure,
    NonFiniteValue,
    OverlappingEntries,
    TruncatedBlob,
    ZeroTargetSize,
)

MAGIC = b"DBXB"
VERSION = 1

_DTYPES = {"f32": np.dtype("<f4"), "u8": np.dtype("u1")}


def _dtype_of(arr: np.ndarray) -> str:
    if arr.dtype == np.uint8:
        return "u8"
    return "f32"


@dataclass
class TensorBundle:
    """Ordered mapping of array names to numpy arrays (f32 or u8)."""

    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    def put(self, name: str, arr: np.ndarray) -> None:
        if arr.dtype == np.uint8:
            self.arrays[name] = np.ascontiguousarray(arr, dtype=np.uint8)
        else:
            self.arrays[name] = np.ascontiguousarray(arr, dtype="<f4")

    def get(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self.arrays

    def names(self) -> list[str]:
        return list(self.arrays)


def write_bundle(bundle: TensorBundle, path) -> None:
    """Serialize `bundle` to `path`. Round-trips bit-exactly."""
    manifest = []
    blob_parts = []
    offset = 0
    for name, arr in bundle.arrays.items():
        dtype = _dtype_of(arr)
        data = np.ascontiguousarray(arr, dtype=_DTYPES[dtype]).tobytes()
        manifest.append(
            {"name": name, "dtype": dtype, "shape": list(arr.shape), "offset": offset}
        )
        blob_parts.append(data)
        offset += len(data)
    mtext = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    try:
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<II", VERSION, len(mtext)))
            f.write(mtext)
            for part in blob_parts:
                f.write(part)
    except OSError as e:
        raise IoFailure(str(e)) from e


def read_bundle(path) -> TensorBundle:
    """Read and validate a bundle file written by `write_bundle`."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise IoFailure(str(e)) from e
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise BadMagic(f"{path}: not a DBXB bundle")
    version, mlen = struct.unpack("<II", raw[4:12])
    if version != VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    if len(raw) < 12 + mlen:
        raise TruncatedBlob(f"{path}: manifest truncated")
    try:
        manifest = json.loads(raw[12 : 12 + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise BadMagic(f"{path}: bad manifest: {e}") from e
    blob = raw[12 + mlen :]

    spans = []
    bundle = TensorBundle()
    for entry in manifest:
        name = entry["name"]
        dtype = entry.get("dtype")
        if dtype not in _DTYPES:
            raise BadMagic(f"entry {name!r}: unknown dtype {dtype!r}")
        shape = tuple(int(s) for s in entry["shape"])
        offset = int(entry["offset"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * _DTYPES[dtype].itemsize
        if offset < 0 or offset + nbytes > len(blob):
            raise TruncatedBlob(f"entry {name!r}: declared bytes exceed blob")
        spans.append((offset, offset + nbytes, name))
        arr = np.frombuffer(blob, dtype=_DTYPES[dtype], count=nbytes // _DTYPES[dtype].itemsize, offset=offset)
        arr = arr.reshape(shape).copy()
        if dtype == "f32" and not np.all(np.isfinite(arr)):
            raise NonFiniteValue(f"entry {name!r}: non-finite values")
        bundle.arrays[name] = arr
    spans.sort()
    for (s0, e0, n0), (s1, e1, n1) in zip(spans, spans[1:]):
        if s1 < e0:
            raise OverlappingEntries(f"entries {n0!r} and {n1!r} overlap")
    return bundle


def resample_roi(grid: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Bilinear resample of a 2D grid to (target_h, target_w).

    Uses corner-aligned sampling; the output stays within the input's
    value range and is the identity at equal sizes.
    """
    if target_h <= 0 or target_w <= 0:
        raise ZeroTargetSize(f"target size {target_h}x{target_w}")
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2 or grid.size == 0:
        raise DimMismatch(f"expected non-empty 2D grid, got shape {grid.shape}")
    h, w = grid.shape
    if (h, w) == (target_h, target_w):
        return grid.copy()

    ys = np.linspace(0.0, h - 1.0, target_h) if target_h > 1 else np.zeros(1)
    xs = np.linspace(0.0, w - 1.0, target_w) if target_w > 1 else np.zeros(1)
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = grid[np.ix_(y0, x0)] * (1 - fx) + grid[np.ix_(y0, x1)] * fx
    bot = grid[np.ix_(y1, x0)] * (1 - fx) + grid[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def resample_stack(stack: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Resample each channel of a (C, H, W) stack."""
    return np.stack([resample_roi(c, target_h, target_w) for c in stack])


@dataclass
class RoiObject:
    """One box proposal with its cropped RGB, features and mask.

    rgb is (3, H, W), feature (C, H, W), mask (H, W) with values in
    [0, 1]; box is (x0, y0, x1, y1) in image pixels and area its pixel
    area in the original image.
    """

    id: str
    category: int
    box: tuple[float, float, float, float]
    confidence: float
    rgb: np.ndarray
    feature: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        x0, y0, x1, y1 = self.box
        if not (x1 > x0 and y1 > y0):
            raise DimMismatch(f"object {self.id}: degenerate box {self.box}")
        if self.rgb.shape[1:] != self.mask.shape or self.feature.shape[1:] != self.mask.shape:
            raise DimMismatch(f"object {self.id}: rgb/feature/mask resolution mismatch")
        if self.mask.min() < 0.0 or self.mask.max() > 1.0:
            raise NonFiniteValue(f"object {self.id}: mask values outside [0,1]")

    @property
    def area(self) -> float:
        x0, y0, x1, y1 = self.box
        return (x1 - x0) * (y1 - y0)

    @property
    def resolution(self) -> tuple[int, int]:
        return self.mask.shape

    def resampled(self, size: int) -> "RoiObject":
        """Copy of this object with all grids at a square `size` resolution."""
        if self.mask.shape == (size, size):
            return self
        return RoiObject(
            id=self.id,
            category=self.category,
            box=self.box,
            confidence=self.confidence,
            rgb=resample_stack(self.rgb, size, size),
            feature=resample_stack(self.feature, size, size),
            mask=np.clip(resample_roi(self.mask, size, size), 0.0, 1.0),
        )

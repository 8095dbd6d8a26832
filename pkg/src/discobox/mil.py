"""Bag construction from the box-tightness prior and MIL bag losses.

A tight box touches the object on every side, so every row and column
crossing the box holds at least one foreground pixel (a positive bag),
while rows/columns that miss the box entirely are negative bags.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoxOutsideCrop, DegenerateBox, DimMismatch, EmptyBagSet

EPS = 1e-7


@dataclass
class Bag:
    pixel_indices: np.ndarray  # flat indices into the (H, W) crop
    positive: bool


@dataclass
class BagSet:
    bags: list[Bag]
    crop_h: int
    crop_w: int
    box: tuple[int, int, int, int]  # (x0, y0, x1, y1), half-open


def build_bags(crop_h: int, crop_w: int, tight_box: tuple[int, int, int, int]) -> BagSet:
    """Build row/column bags for a crop containing a tight box.

    Positive bags are the in-box segments of rows and columns crossing
    the box; negative bags are full rows/columns with no box overlap.
    """
    x0, y0, x1, y1 = (int(v) for v in tight_box)
    if x1 <= x0 or y1 <= y0:
        raise DegenerateBox(f"box {tight_box} has zero extent")
    if x0 < 0 or y0 < 0 or x1 > crop_w or y1 > crop_h:
        raise BoxOutsideCrop(f"box {tight_box} outside {crop_h}x{crop_w} crop")

    idx = np.arange(crop_h * crop_w).reshape(crop_h, crop_w)
    bags: list[Bag] = []
    for y in range(y0, y1):
        bags.append(Bag(idx[y, x0:x1].copy(), True))
    for x in range(x0, x1):
        bags.append(Bag(idx[y0:y1, x].copy(), True))
    for y in range(crop_h):
        if y < y0 or y >= y1:
            bags.append(Bag(idx[y, :].copy(), False))
    for x in range(crop_w):
        if x < x0 or x >= x1:
            bags.append(Bag(idx[:, x].copy(), False))
    return BagSet(bags, crop_h, crop_w, (x0, y0, x1, y1))


def _bag_maxima(bagset: BagSet, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != (bagset.crop_h, bagset.crop_w):
        raise DimMismatch(
            f"mask {mask.shape} vs crop {(bagset.crop_h, bagset.crop_w)}"
        )
    flat = mask.ravel()
    p = np.array([flat[b.pixel_indices].max() for b in bagset.bags])
    y = np.array([1.0 if b.positive else 0.0 for b in bagset.bags])
    return p, y


def mil_loss_bce(bagset: BagSet, mask: np.ndarray) -> float:
    """Binary cross-entropy MIL loss over per-bag max probabilities."""
    p, y = _bag_maxima(bagset, mask)
    p = np.clip(p, EPS, 1.0 - EPS)
    return float(-np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def mil_loss_dice(bagset: BagSet, mask: np.ndarray) -> float:
    """Dice MIL loss over the vector of per-bag maxima vs bag labels."""
    if not bagset.bags:
        raise EmptyBagSet("no bags")
    p, y = _bag_maxima(bagset, mask)
    denom = float(np.sum(p * p) + np.sum(y * y))
    if denom == 0.0:
        return 0.0
    return float(1.0 - 2.0 * np.sum(p * y) / denom)

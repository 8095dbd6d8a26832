"""Seeded synthetic fixtures: shape RoIs with known masks, permuted
feature pairs for matcher recovery tests, and metric scenarios.

Everything is reproducible from the seed alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corrmetric import AnnotatedObject, CorrespondencePrediction, Keypoint
from .tensors import RoiObject

FEATURE_CHANNELS = 8


def _ellipse_mask(rng: np.random.Generator, size: int) -> np.ndarray:
    """Random convex blob: a rotated ellipse indicator."""
    cy, cx = rng.uniform(0.35 * size, 0.65 * size, size=2)
    ry = rng.uniform(0.18 * size, 0.38 * size)
    rx = rng.uniform(0.18 * size, 0.38 * size)
    theta = rng.uniform(0.0, np.pi)
    ys, xs = np.mgrid[0:size, 0:size]
    u = (xs - cx) * np.cos(theta) + (ys - cy) * np.sin(theta)
    v = -(xs - cx) * np.sin(theta) + (ys - cy) * np.cos(theta)
    return ((u / rx) ** 2 + (v / ry) ** 2 <= 1.0).astype(np.uint8)


def gen_shape_roi(
    seed: int,
    size: int = 32,
    noise_rate: float = 0.0,
    category: int = 1,
    rgb_noise: float = 8.0,
) -> tuple[RoiObject, np.ndarray]:
    """Random two-color blob RoI with a ground-truth labeling.

    The mask probability is the ground truth with pixels flipped
    independently at `noise_rate`; features are color-derived.
    """
    rng = np.random.default_rng(seed)
    gt = _ellipse_mask(rng, size)
    c_fg = rng.uniform(0, 255, size=3)
    c_bg = rng.uniform(0, 255, size=3)
    while np.linalg.norm(c_fg - c_bg) < 120.0:
        c_bg = rng.uniform(0, 255, size=3)
    rgb = np.where(gt[None] > 0, c_fg[:, None, None], c_bg[:, None, None])
    rgb = rgb + rng.normal(0.0, rgb_noise, size=rgb.shape)
    rgb = np.clip(rgb, 0.0, 255.0)

    flips = rng.uniform(size=gt.shape) < noise_rate
    mask = np.where(flips, 1 - gt, gt).astype(np.float64)

    proj = rng.normal(size=(FEATURE_CHANNELS, 3))
    feat = np.einsum("cq,qhw->chw", proj, rgb / 255.0)
    feat = feat / np.maximum(np.linalg.norm(feat, axis=0, keepdims=True), 1e-9)

    obj = RoiObject(
        id=f"syn-{seed}",
        category=category,
        box=(0.0, 0.0, 2.0 * size, 2.0 * size),
        confidence=1.0,
        rgb=rgb,
        feature=feat,
        mask=mask,
    )
    return obj, gt


def _spatial_permutation(rng: np.random.Generator, size: int, kind: str) -> np.ndarray:
    """Flat permutation p with target pixel p[i] for source pixel i."""
    idx = np.arange(size * size).reshape(size, size)
    if kind == "identity":
        return idx.ravel()
    if kind == "random":
        return rng.permutation(size * size)
    if kind != "structured":
        raise ValueError(f"unknown permutation kind: {kind!r}")
    # structured: random composition of flips, transpose and a roll
    if rng.uniform() < 0.5:
        idx = idx[::-1, :]
    if rng.uniform() < 0.5:
        idx = idx[:, ::-1]
    if rng.uniform() < 0.5:
        idx = idx.T
    dy, dx = rng.integers(0, size, size=2)
    idx = np.roll(idx, (int(dy), int(dx)), axis=(0, 1))
    return idx.ravel()


def gen_permuted_pair(
    seed: int,
    size: int = 16,
    kind: str = "structured",
    channels: int = 16,
) -> tuple[RoiObject, RoiObject, np.ndarray]:
    """Pair of RoIs where the second's features are a known spatial
    permutation of the first's distinct random unit features.

    Returns (obj_a, obj_b, perm) with f_b[:, flat p[i]] == f_a[:, flat i].
    """
    rng = np.random.default_rng(seed)
    feats = rng.normal(size=(channels, size * size))
    feats /= np.linalg.norm(feats, axis=0, keepdims=True)
    perm = _spatial_permutation(rng, size, kind)
    feats_b = np.empty_like(feats)
    feats_b[:, perm] = feats
    f_a = feats.reshape(channels, size, size)
    f_b = feats_b.reshape(channels, size, size)

    def to_obj(tag, f):
        rgb = np.clip((f[:3] * 0.5 + 0.5) * 255.0, 0.0, 255.0)
        return RoiObject(
            id=f"perm-{seed}-{tag}",
            category=1,
            box=(0.0, 0.0, 2.0 * size, 2.0 * size),
            confidence=1.0,
            rgb=rgb,
            feature=f,
            mask=np.ones((size, size)),
        )

    return to_obj("a", f_a), to_obj("b", f_b), perm


def gen_metric_fixture(
    seed: int,
    n_pairs: int = 5,
    noise_px: float = 0.0,
    kp_per_object: int = 6,
    image_size: float = 400.0,
):
    """Annotated image pairs plus predictions perturbed by `noise_px`.

    Prediction confidence is the product of the two box confidences.
    Returns (objects_by_image, predictions).
    """
    rng = np.random.default_rng(seed)
    objects_by_image: dict[str, list[AnnotatedObject]] = {}
    predictions: list[CorrespondencePrediction] = []
    for p in range(n_pairs):
        img_a = f"img{2 * p}"
        img_b = f"img{2 * p + 1}"
        cat = f"cat{rng.integers(0, 3)}"
        orient = rng.uniform(0.0, 360.0)
        objs = []
        for img in (img_a, img_b):
            x0, y0 = rng.uniform(0.0, image_size * 0.3, size=2)
            bw, bh = rng.uniform(image_size * 0.3, image_size * 0.6, size=2)
            box = (x0, y0, x0 + bw, y0 + bh)
            kps = tuple(
                Keypoint(
                    f"kp{k}",
                    float(rng.uniform(x0, x0 + bw)),
                    float(rng.uniform(y0, y0 + bh)),
                    True,
                )
                for k in range(kp_per_object)
            )
            objs.append(
                AnnotatedObject(
                    image_id=img,
                    category=cat,
                    box=box,
                    orientation=float((orient + rng.uniform(-20.0, 20.0)) % 360.0),
                    keypoints=kps,
                )
            )
        objects_by_image[img_a] = [objs[0]]
        objects_by_image[img_b] = [objs[1]]
        conf_a = float(rng.uniform(0.5, 1.0))
        conf_b = float(rng.uniform(0.5, 1.0))
        for ka, kb in zip(objs[0].keypoints, objs[1].keypoints):
            noise = rng.uniform(-noise_px, noise_px, size=4) if noise_px > 0 else np.zeros(4)
            predictions.append(
                CorrespondencePrediction(
                    source_image=img_a,
                    target_image=img_b,
                    src_xy=(ka.x + noise[0], ka.y + noise[1]),
                    tgt_xy=(kb.x + noise[2], kb.y + noise[3]),
                    confidence=conf_a * conf_b,
                    src_box=objs[0].box,
                    tgt_box=objs[1].box,
                    category=cat,
                )
            )
    return objects_by_image, predictions

"""Multi-object semantic correspondence benchmark machinery.

Ground-truth pairs come from all intra-class object pairs across image
pairs sharing a class, dropping pairs whose circular 3D-orientation
difference exceeds 60 degrees and keypoints occluded on either side.
Each ranked prediction earns fractional TP/FP (or an FN indicator)
against the keypoint pairs of its object pair, under a distance
threshold expressed as a fraction of the box diagonal, and AP@alpha is
the area under the monotonized precision-recall curve.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

DEFAULT_ALPHAS = (0.0075, 0.01, 0.015, 0.02, 0.03)
MAX_ORIENTATION_DIFF = 60.0


@dataclass(frozen=True)
class Keypoint:
    name: str
    x: float
    y: float
    visible: bool = True


@dataclass(frozen=True)
class AnnotatedObject:
    image_id: str
    category: str
    box: tuple[float, float, float, float]
    orientation: float  # degrees in [0, 360)
    keypoints: tuple[Keypoint, ...]

    @property
    def diagonal(self) -> float:
        x0, y0, x1, y1 = self.box
        return math.hypot(x1 - x0, y1 - y0)


@dataclass
class GroundTruthPair:
    source: AnnotatedObject
    target: AnnotatedObject
    keypoint_pairs: list[tuple[tuple[float, float], tuple[float, float]]]

    def swapped(self) -> "GroundTruthPair":
        return GroundTruthPair(
            self.target, self.source, [(t, s) for s, t in self.keypoint_pairs]
        )


@dataclass(frozen=True)
class CorrespondencePrediction:
    source_image: str
    target_image: str
    src_xy: tuple[float, float]
    tgt_xy: tuple[float, float]
    confidence: float
    src_box: tuple[float, float, float, float] | None = None
    tgt_box: tuple[float, float, float, float] | None = None
    category: str | None = None


@dataclass
class ScoredPrediction:
    prediction: CorrespondencePrediction
    tp: float
    fp: float
    fn: int


def circular_diff(a: float, b: float) -> float:
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def generate_pairs(
    objects_by_image: dict[str, list[AnnotatedObject]]
) -> list[GroundTruthPair]:
    """All intra-class object pairs across image pairs, filtered by the
    orientation gap and keypoint visibility rules."""
    image_ids = list(objects_by_image)
    pairs: list[GroundTruthPair] = []
    for i, img_a in enumerate(image_ids):
        for img_b in image_ids[i + 1 :]:
            for obj_a in objects_by_image[img_a]:
                for obj_b in objects_by_image[img_b]:
                    if obj_a.category != obj_b.category:
                        continue
                    if circular_diff(obj_a.orientation, obj_b.orientation) > MAX_ORIENTATION_DIFF:
                        continue
                    kps_b = {k.name: k for k in obj_b.keypoints if k.visible}
                    kp_pairs = [
                        ((k.x, k.y), (kps_b[k.name].x, kps_b[k.name].y))
                        for k in obj_a.keypoints
                        if k.visible and k.name in kps_b
                    ]
                    if kp_pairs:
                        pairs.append(GroundTruthPair(obj_a, obj_b, kp_pairs))
    return pairs


def score_prediction(
    pred: CorrespondencePrediction,
    gt_pairs: list[GroundTruthPair],
    alpha: float,
) -> ScoredPrediction:
    """Fractional TP/FP and the FN indicator for one prediction against
    the keypoint pairs of its object pair(s).

    Source-side distances are normalized by the source object's box
    diagonal, target-side by the target's.
    """
    ps = np.array(pred.src_xy)
    pt = np.array(pred.tgt_xy)
    s_ok = []
    t_ok = []
    for pair in gt_pairs:
        sd = pair.source.diagonal
        td = pair.target.diagonal
        for (gs, gt) in pair.keypoint_pairs:
            s_ok.append(np.hypot(*(ps - gs)) / sd <= alpha)
            t_ok.append(np.hypot(*(pt - gt)) / td <= alpha)
    s_ok = np.array(s_ok, dtype=bool)
    t_ok = np.array(t_ok, dtype=bool)
    n_src = int(s_ok.sum())
    denom = n_src + (1 if n_src == 0 else 0)
    tp = float(np.sum(s_ok & t_ok)) / denom
    fp = float(np.sum(s_ok & ~t_ok)) / denom
    fn = 1 if n_src == 0 else 0
    return ScoredPrediction(pred, tp, fp, fn)


def ap_from_scored(scored: list[ScoredPrediction]) -> float:
    """All-point-interpolated AP of one ranked list (stable sort by
    descending confidence)."""
    if not scored:
        return 0.0
    conf = np.array([s.prediction.confidence for s in scored])
    order = np.argsort(-conf, kind="stable")
    tp = np.array([scored[i].tp for i in order])
    fp = np.array([scored[i].fp for i in order])
    fn = np.array([scored[i].fn for i in order])
    total = float(np.sum(tp + fn))
    if total == 0.0:
        return 0.0
    ctp = np.cumsum(tp)
    cfp = np.cumsum(fp)
    recall = ctp / total
    denom = ctp + cfp
    precision = np.where(denom > 0.0, ctp / np.where(denom > 0.0, denom, 1.0), 0.0)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_r = 0.0
    ap = 0.0
    for r, p in zip(recall, envelope):
        ap += (r - prev_r) * p
        prev_r = r
    return float(ap)


def _index_pairs(pairs: list[GroundTruthPair]):
    index: dict[tuple, list[GroundTruthPair]] = {}
    for pair in pairs:
        key = (pair.source.image_id, pair.target.image_id, pair.source.category)
        index.setdefault(key, []).append(pair)
        sw = pair.swapped()
        key = (sw.source.image_id, sw.target.image_id, sw.source.category)
        index.setdefault(key, []).append(sw)
    return index


def _pairs_for_prediction(index, pred: CorrespondencePrediction):
    candidates = index.get((pred.source_image, pred.target_image, pred.category), [])
    if pred.src_box is not None and pred.tgt_box is not None:
        matched = [
            p
            for p in candidates
            if np.allclose(p.source.box, pred.src_box, atol=1e-6)
            and np.allclose(p.target.box, pred.tgt_box, atol=1e-6)
        ]
        if matched:
            return matched
    return candidates


def evaluate(
    objects_by_image: dict[str, list[AnnotatedObject]],
    predictions: list[CorrespondencePrediction],
    alphas: tuple[float, ...] = DEFAULT_ALPHAS,
) -> dict:
    """Full evaluation: returns {alpha: AP}, the mean AP and a warning
    flag for an empty prediction set."""
    pairs = generate_pairs(objects_by_image)
    index = _index_pairs(pairs)
    ap_by_alpha = {}
    for alpha in alphas:
        scored = []
        for pred in predictions:
            cands = _pairs_for_prediction(index, pred)
            scored.append(score_prediction(pred, cands, alpha))
        ap_by_alpha[alpha] = ap_from_scored(scored)
    mean_ap = float(np.mean(list(ap_by_alpha.values()))) if ap_by_alpha else 0.0
    return {
        "ap": ap_by_alpha,
        "mean_ap": mean_ap,
        "warning_empty": len(predictions) == 0,
    }


# --- JSON file formats -------------------------------------------------

def load_annotations(path) -> dict[str, list[AnnotatedObject]]:
    """Annotation file: {"images": [{"id", "objects": [{"category",
    "box", "orientation", "keypoints": [{"name","x","y","visible"}]}]}]}."""
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    try:
        out: dict[str, list[AnnotatedObject]] = {}
        for img in data["images"]:
            objs = []
            for o in img.get("objects", []):
                kps = tuple(
                    Keypoint(k["name"], float(k["x"]), float(k["y"]), bool(k.get("visible", True)))
                    for k in o.get("keypoints", [])
                )
                objs.append(
                    AnnotatedObject(
                        image_id=str(img["id"]),
                        category=str(o["category"]),
                        box=tuple(float(v) for v in o["box"]),
                        orientation=float(o.get("orientation", 0.0)),
                        keypoints=kps,
                    )
                )
            out[str(img["id"])] = objs
        return out
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{path}: bad annotation record: {e}") from e


def dump_annotations(path, images: dict[str, list[AnnotatedObject]]) -> None:
    """Write annotations in the format load_annotations reads."""
    payload = {
        "images": [
            {
                "id": image_id,
                "objects": [
                    {
                        "category": o.category,
                        "box": list(o.box),
                        "orientation": o.orientation,
                        "keypoints": [
                            {"name": k.name, "x": k.x, "y": k.y, "visible": k.visible}
                            for k in o.keypoints
                        ],
                    }
                    for o in objects
                ],
            }
            for image_id, objects in images.items()
        ]
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, separators=(",", ":"))


def dump_predictions(path, preds: list[CorrespondencePrediction]) -> None:
    """Write predictions in the format load_predictions reads."""
    payload = {
        "predictions": [
            {
                "source_image": p.source_image,
                "target_image": p.target_image,
                "src_xy": list(p.src_xy),
                "tgt_xy": list(p.tgt_xy),
                "confidence": p.confidence,
                "src_box": list(p.src_box) if p.src_box else None,
                "tgt_box": list(p.tgt_box) if p.tgt_box else None,
                "category": p.category,
            }
            for p in preds
        ]
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, separators=(",", ":"))


def load_predictions(path) -> list[CorrespondencePrediction]:
    """Prediction file: {"predictions": [{source_image, target_image,
    src_xy, tgt_xy, confidence, src_box, tgt_box, category}]}."""
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    try:
        preds = []
        for r in data["predictions"]:
            preds.append(
                CorrespondencePrediction(
                    source_image=str(r["source_image"]),
                    target_image=str(r["target_image"]),
                    src_xy=tuple(float(v) for v in r["src_xy"]),
                    tgt_xy=tuple(float(v) for v in r["tgt_xy"]),
                    confidence=float(r["confidence"]),
                    src_box=tuple(float(v) for v in r["src_box"]) if r.get("src_box") else None,
                    tgt_box=tuple(float(v) for v in r["tgt_box"]) if r.get("tgt_box") else None,
                    category=str(r["category"]) if r.get("category") is not None else None,
                )
            )
        return preds
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{path}: bad prediction record: {e}") from e

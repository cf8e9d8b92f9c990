"""Vector-map average precision under Chamfer thresholds, and raster IoU."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CLASS_NAMES, NUM_CLASSES, chamfer_points


@dataclass(frozen=True)
class EvalConfig:
    thresholds: tuple[float, ...] = (0.5, 1.0, 1.5)
    n_samples: int = 100
    iou_binarize: float = 0.5

    def __post_init__(self):
        t = self.thresholds
        if not t or any(x <= 0 for x in t) or any(a >= b for a, b in zip(t, t[1:])):
            raise ValueError("thresholds must be positive and sorted ascending")

    def to_json(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "n_samples": self.n_samples,
            "iou_binarize": self.iou_binarize,
        }

    @classmethod
    def from_json(cls, d: dict) -> "EvalConfig":
        return cls(
            thresholds=tuple(d["thresholds"]),
            n_samples=int(d["n_samples"]),
            iou_binarize=float(d["iou_binarize"]),
        )


@dataclass
class ScoredPolyline:
    """One prediction, resampled and ready for Chamfer matching."""

    frame: str
    instance: int
    cls_index: int
    confidence: float
    samples: np.ndarray  # (n_samples, 2)


def average_precision(
    preds: list[ScoredPolyline],
    gts_by_frame: dict[str, list[np.ndarray]],
    tau: float,
) -> float | None:
    """All-point-interpolated AP for one class at one Chamfer threshold.

    Predictions are matched greedily in global confidence order; within a
    frame a prediction is a TP if its Chamfer distance to the closest still
    unmatched GT is below tau. Returns None when the class has no GT anywhere.
    """
    n_gt = sum(len(v) for v in gts_by_frame.values())
    if n_gt == 0:
        return None
    order = sorted(preds, key=lambda p: (-p.confidence, p.frame, p.instance))
    used = {f: np.zeros(len(v), dtype=bool) for f, v in gts_by_frame.items()}
    tp = np.zeros(len(order))
    for i, p in enumerate(order):
        gts = gts_by_frame.get(p.frame, [])
        best_j, best_d = -1, float("inf")
        mask = used.get(p.frame)
        for j, g in enumerate(gts):
            if mask[j]:
                continue
            d = chamfer_points(p.samples, g)
            if d < best_d:
                best_d, best_j = d, j
        if best_j >= 0 and best_d < tau:
            tp[i] = 1.0
            mask[best_j] = True
    if len(order) == 0:
        return 0.0
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(1.0 - tp)
    recall = cum_tp / n_gt
    precision = cum_tp / (cum_tp + cum_fp)
    # precision envelope (all-point interpolation)
    env = np.maximum.accumulate(precision[::-1])[::-1]
    prev_r = 0.0
    ap = 0.0
    for r, e in zip(recall, env):
        ap += (r - prev_r) * e
        prev_r = r
    return float(ap)


def map_score(
    preds: list[ScoredPolyline],
    gts_by_class: dict[int, dict[str, list[np.ndarray]]],
    cfg: EvalConfig,
):
    """Per-class AP averaged over thresholds plus their mean over present classes."""
    per_class: dict[str, dict] = {}
    ap_values = []
    for ci, name in enumerate(CLASS_NAMES):
        class_preds = [p for p in preds if p.cls_index == ci]
        gts = gts_by_class.get(ci, {})
        per_tau = {}
        vals = []
        for tau in cfg.thresholds:
            ap = average_precision(class_preds, gts, tau)
            per_tau[f"{tau:g}"] = ap
            if ap is not None:
                vals.append(ap)
        mean_ap = float(np.mean(vals)) if vals else None
        per_class[name] = {"AP": mean_ap, "per_threshold": per_tau}
        if mean_ap is not None:
            ap_values.append(mean_ap)
    return {
        "per_class": per_class,
        "mAP": float(np.mean(ap_values)) if ap_values else None,
    }


def iou(pred_probs: np.ndarray, gt: np.ndarray, cfg: EvalConfig):
    """Per-class IoU of binarized probabilities against a binary raster.

    Both arrays are (H, W, C). Classes with an empty union are reported as
    absent (None) and excluded from mIoU.
    """
    if pred_probs.shape != gt.shape:
        raise ValueError("shape mismatch")
    per_class: dict[str, float | None] = {}
    vals = []
    for ci, name in enumerate(CLASS_NAMES[:NUM_CLASSES]):
        p = pred_probs[:, :, ci] >= cfg.iou_binarize
        g = gt[:, :, ci] > 0.5
        union = np.logical_or(p, g).sum()
        if union == 0:
            per_class[name] = None
            continue
        inter = np.logical_and(p, g).sum()
        v = float(inter / union)
        per_class[name] = v
        vals.append(v)
    return {
        "per_class": per_class,
        "mIoU": float(np.mean(vals)) if vals else None,
    }

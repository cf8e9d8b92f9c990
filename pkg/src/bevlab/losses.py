"""Loss stack for set-predicted polylines plus the dense raster loss.

Instance matching is an exact minimum-cost assignment; the line loss is
minimized over the orientation group of each ground-truth polyline
(direction for open lines, cyclic shift x direction for closed loops).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from scipy.optimize import linear_sum_assignment

from .geometry import NUM_CLASSES, VectorMap, resample_polyline

EMPTY_CLASS = NUM_CLASSES  # index of the "no instance" class


@dataclass(frozen=True)
class LossWeights:
    lam_line: float = 50.0
    lam_class: float = 5.0
    lam_trans: float = 0.1

    def __post_init__(self):
        if min(self.lam_line, self.lam_class, self.lam_trans) < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass
class Assignment:
    pairs: list[tuple[int, int]]  # (prediction index, GT index)
    unmatched_preds: list[int]


@dataclass
class GtInstance:
    cls_index: int
    points: torch.Tensor  # (Np, 2) meters
    closed: bool


def targets_from_vector_map(vmap: VectorMap, n_points: int) -> list[GtInstance]:
    """Resample GT polylines to the decoder's fixed point count."""
    out = []
    for pl in vmap:
        rs = resample_polyline(pl, n_points)
        out.append(
            GtInstance(pl.cls_index, torch.from_numpy(rs.points).to(torch.float32), pl.closed)
        )
    return out


def smooth_l1(diff: torch.Tensor, beta: float = 1.0) -> torch.Tensor:
    a = diff.abs()
    return torch.where(a < beta, 0.5 * a * a / beta, a - 0.5 * beta)


def point_orderings(points: torch.Tensor, closed: bool) -> torch.Tensor:
    """All equivalent orderings of a polyline: (G, Np, 2).

    Open lines: identity and reversal. Closed lines: every cyclic shift in
    both directions.
    """
    if closed:
        n = points.shape[0]
        shifts = [torch.roll(points, -k, dims=0) for k in range(n)]
        rev = points.flip(0)
        shifts += [torch.roll(rev, -k, dims=0) for k in range(n)]
        return torch.stack(shifts)
    return torch.stack([points, points.flip(0)])


def line_loss(pred: torch.Tensor, gt: torch.Tensor, closed: bool, beta: float = 1.0) -> torch.Tensor:
    """Orientation-minimized mean per-point smooth L1 between two point sets."""
    orders = point_orderings(gt, closed)
    cost = smooth_l1(pred.unsqueeze(0) - orders, beta).sum(-1).mean(-1)
    return cost.min()


def _line_cost_matrix(pred_points: torch.Tensor, targets: list[GtInstance], beta: float = 1.0) -> np.ndarray:
    with torch.no_grad():
        cols = []
        for t in targets:
            orders = point_orderings(t.points, t.closed)
            c = smooth_l1(pred_points.unsqueeze(1) - orders.unsqueeze(0), beta)
            cols.append(c.sum(-1).mean(-1).min(-1).values)
        return torch.stack(cols, dim=1).double().numpy()


def _lexicographic_lsap(cost: np.ndarray) -> list[tuple[int, int]]:
    """Minimum-cost assignment; ties resolved to the lexicographically
    smallest (pred index, gt index) pair list."""
    n, m = cost.shape
    rows, cols = linear_sum_assignment(cost)
    best = math.fsum(cost[r, c] for r, c in zip(rows, cols))

    pairs: list[tuple[int, int]] = []
    fixed: list[float] = []
    remaining = list(range(m))
    for i in range(n):
        if not remaining:
            break
        matched = None
        for j in remaining:
            rest = [g for g in remaining if g != j]
            rest_rows = list(range(i + 1, n))
            if len(rest_rows) < len(rest):
                continue
            if rest:
                sub = cost[np.ix_(rest_rows, rest)]
                rr, cc = linear_sum_assignment(sub)
                total = math.fsum(fixed + [cost[i, j]] + [sub[a, b] for a, b in zip(rr, cc)])
            else:
                total = math.fsum(fixed + [cost[i, j]])
            if total <= best:
                matched = j
                break
        if matched is not None:
            pairs.append((i, matched))
            fixed.append(float(cost[i, matched]))
            remaining.remove(matched)
    return pairs


def match_instances(
    pred_points: torch.Tensor,
    pred_logits: torch.Tensor,
    targets: list[GtInstance],
    weights: LossWeights,
) -> Assignment:
    """Exact assignment under lam_line * line cost + lam_class * (-log p(class))."""
    n = pred_points.shape[0]
    m = len(targets)
    if m > n:
        raise ValueError(f"more GT instances ({m}) than predictions ({n})")
    if m == 0:
        return Assignment([], list(range(n)))
    line_c = _line_cost_matrix(pred_points, targets)
    with torch.no_grad():
        logp = F.log_softmax(pred_logits.double(), dim=-1).numpy()
    cls_c = -logp[:, [t.cls_index for t in targets]]
    cost = weights.lam_line * line_c + weights.lam_class * cls_c
    pairs = _lexicographic_lsap(cost)
    matched_preds = {i for i, _ in pairs}
    return Assignment(pairs, [i for i in range(n) if i not in matched_preds])


def focal_class_loss(
    logits: torch.Tensor,
    targets: torch.Tensor,
    alpha: float = 0.25,
    gamma: float = 2.0,
) -> torch.Tensor:
    """Softmax focal loss; empty-class targets weighted by (1 - alpha).

    Accepts (C+1,) with scalar target or (N, C+1) with (N,) targets; returns
    the per-instance loss (scalar or (N,)).
    """
    squeeze = logits.dim() == 1
    if squeeze:
        logits = logits.unsqueeze(0)
        targets = torch.as_tensor([int(targets)])
    logp = F.log_softmax(logits, dim=-1)
    lp_t = logp.gather(1, targets.view(-1, 1)).squeeze(1)
    p_t = lp_t.exp()
    a_t = torch.where(
        targets == EMPTY_CLASS,
        torch.as_tensor(1.0 - alpha, dtype=logits.dtype),
        torch.as_tensor(alpha, dtype=logits.dtype),
    )
    loss = -a_t * (1.0 - p_t) ** gamma * lp_t
    return loss.squeeze(0) if squeeze else loss


def transform_loss(aux: torch.Tensor, gt_transformed: torch.Tensor, beta: float = 1.0) -> torch.Tensor:
    """Sum (not mean) of per-point smooth L1 for the auxiliary motion head."""
    return smooth_l1(aux - gt_transformed, beta).sum()


def dice_loss(pred: torch.Tensor, gt: torch.Tensor, eps: float = 1e-5) -> torch.Tensor:
    """Mean over classes of 1 - (2*sum(p*g)+eps) / (sum(p^2)+sum(g^2)+eps).

    pred and gt are (..., C, H, W); leading batch dims are averaged.
    """
    dims = (-2, -1)
    inter = (pred * gt).sum(dims)
    denom = (pred * pred).sum(dims) + (gt * gt).sum(dims)
    return (1.0 - (2.0 * inter + eps) / (denom + eps)).mean()


def vector_loss(
    pred_points: torch.Tensor,
    pred_logits: torch.Tensor,
    targets: list[GtInstance],
    weights: LossWeights,
    aux_points: torch.Tensor | None = None,
    aux_targets: list[torch.Tensor] | None = None,
    assignment: Assignment | None = None,
    beta: float = 1.0,
):
    """Matched set loss: sum over matched pairs of the weighted line/class/trans
    terms plus the empty-class term for unmatched predictions.

    Returns (total, breakdown) where breakdown holds the weighted components.
    """
    if assignment is None:
        assignment = match_instances(pred_points, pred_logits, targets, weights)

    device = pred_points.device
    zero = torch.zeros((), dtype=pred_points.dtype, device=device)
    line_sum = zero.clone()
    trans_sum = zero.clone()
    class_targets = torch.full((pred_points.shape[0],), EMPTY_CLASS, dtype=torch.long)
    for i, j in assignment.pairs:
        t = targets[j]
        line_sum = line_sum + line_loss(pred_points[i], t.points.to(device), t.closed, beta)
        class_targets[i] = t.cls_index
        if aux_points is not None and aux_targets is not None:
            trans_sum = trans_sum + transform_loss(aux_points[i], aux_targets[j].to(device), beta)
    class_sum = focal_class_loss(pred_logits, class_targets.to(device)).sum()

    total = weights.lam_line * line_sum + weights.lam_class * class_sum + weights.lam_trans * trans_sum
    breakdown = {
        "line": float(weights.lam_line * line_sum.detach()),
        "class": float(weights.lam_class * class_sum.detach()),
        "trans": float(weights.lam_trans * trans_sum.detach()),
        "total": float(total.detach()),
        "matched": len(assignment.pairs),
    }
    return total, breakdown

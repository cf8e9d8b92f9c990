"""Geometry primitives: metric BEV grids, class-labeled polylines, rigid ego transforms.

Conventions: ego frame has x pointing forward (longitudinal) and y pointing
left (lateral). Grid rows index x, grid columns index y, and cells are
half-open intervals so a point on an interior boundary belongs to the upper
cell. Points exactly on the max extent clamp into the last cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CLASS_NAMES = ("ped", "div", "bound")
CLASS_INDEX = {name: i for i, name in enumerate(CLASS_NAMES)}
NUM_CLASSES = len(CLASS_NAMES)


@dataclass(frozen=True)
class GridSpec:
    """Metric extent and resolution of a BEV grid (rows = x, cols = y)."""

    x_extent: tuple[float, float] = (-15.0, 15.0)
    y_extent: tuple[float, float] = (-7.5, 7.5)
    height_cells: int = 50
    width_cells: int = 25

    def __post_init__(self):
        if self.height_cells < 2 or self.width_cells < 2:
            raise ValueError("grid needs at least 2 cells per axis")
        if not (self.x_extent[0] < self.x_extent[1] and self.y_extent[0] < self.y_extent[1]):
            raise ValueError("grid extents must be increasing")
        if self.cell_height <= 0 or self.cell_width <= 0:
            raise ValueError("cell sizes must be strictly positive")
        if not (self.x_extent[0] <= 0.0 <= self.x_extent[1] and self.y_extent[0] <= 0.0 <= self.y_extent[1]):
            raise ValueError("ego origin must map inside the grid")

    @property
    def cell_height(self) -> float:
        return (self.x_extent[1] - self.x_extent[0]) / self.height_cells

    @property
    def cell_width(self) -> float:
        return (self.y_extent[1] - self.y_extent[0]) / self.width_cells

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height_cells, self.width_cells)

    def cell_centers(self) -> np.ndarray:
        """(H, W, 2) array of cell-center coordinates in meters."""
        xs = self.x_extent[0] + (np.arange(self.height_cells) + 0.5) * self.cell_height
        ys = self.y_extent[0] + (np.arange(self.width_cells) + 0.5) * self.cell_width
        return np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)

    def to_json(self) -> dict:
        return {
            "x_extent": list(self.x_extent),
            "y_extent": list(self.y_extent),
            "height_cells": self.height_cells,
            "width_cells": self.width_cells,
        }

    @classmethod
    def from_json(cls, d: dict) -> "GridSpec":
        return cls(
            x_extent=tuple(d["x_extent"]),
            y_extent=tuple(d["y_extent"]),
            height_cells=int(d["height_cells"]),
            width_cells=int(d["width_cells"]),
        )


@dataclass
class Polyline:
    """Ordered point sequence with a map class. Closed lines omit the repeat vertex."""

    cls: str
    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        if self.cls not in CLASS_NAMES:
            raise ValueError(f"unknown class {self.cls!r}")
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("polyline needs an (n>=2, 2) point array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("polyline coordinates must be finite")
        if self.closed and np.allclose(pts[0], pts[-1]):
            raise ValueError("closed polylines keep closure implicit (first != last point)")
        self.points = pts

    @property
    def cls_index(self) -> int:
        return CLASS_INDEX[self.cls]

    def arc_length(self) -> float:
        pts = self.points
        if self.closed:
            pts = np.vstack([pts, pts[:1]])
        return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


@dataclass
class VectorMap:
    """A set of class-labeled polylines in ego-frame meters."""

    polylines: list[Polyline] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.polylines)

    def __iter__(self):
        return iter(self.polylines)

    def by_class(self, cls: str) -> list[Polyline]:
        return [p for p in self.polylines if p.cls == cls]


@dataclass(frozen=True)
class EgoTransform:
    """4x4 rigid transform between ego frames (applies to homogeneous points)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise ValueError("transform must be 4x4")
        if not np.array_equal(m[3], np.array([0.0, 0.0, 0.0, 1.0])):
            raise ValueError("bottom row must be (0, 0, 0, 1)")
        r = m[:3, :3]
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-6:
            raise ValueError("rotation block must be orthonormal within 1e-6")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform (n, 2) ego points through the homogeneous matrix (z = 0)."""
        pts = np.asarray(points, dtype=np.float64)
        hom = np.zeros((pts.shape[0], 4))
        hom[:, :2] = pts
        hom[:, 3] = 1.0
        return (self.matrix @ hom.T).T[:, :2]

    def inverse(self) -> "EgoTransform":
        r = self.matrix[:3, :3]
        t = self.matrix[:3, 3]
        inv = np.eye(4)
        inv[:3, :3] = r.T
        inv[:3, 3] = -r.T @ t
        return EgoTransform(inv)

    @classmethod
    def identity(cls) -> "EgoTransform":
        return cls(np.eye(4))

    @classmethod
    def from_planar(cls, x: float, y: float, yaw: float) -> "EgoTransform":
        c, s = math.cos(yaw), math.sin(yaw)
        m = np.eye(4)
        m[0, 0], m[0, 1], m[0, 3] = c, -s, x
        m[1, 0], m[1, 1], m[1, 3] = s, c, y
        return cls(m)


def world_to_grid(point, grid: GridSpec):
    """Map an ego-meters point to a (row, col) cell index, or None when out of range.

    Floor-based binning; points on the max extent clamp into the last cell.
    """
    x, y = float(point[0]), float(point[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError("non-finite coordinates")
    if not (grid.x_extent[0] <= x <= grid.x_extent[1] and grid.y_extent[0] <= y <= grid.y_extent[1]):
        return None
    row = min(int(math.floor((x - grid.x_extent[0]) / grid.cell_height)), grid.height_cells - 1)
    col = min(int(math.floor((y - grid.y_extent[0]) / grid.cell_width)), grid.width_cells - 1)
    return (row, col)


def grid_indices(points: np.ndarray, grid: GridSpec):
    """Vectorized world_to_grid: returns (rows, cols, inside_mask)."""
    pts = np.asarray(points, dtype=np.float64)
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite coordinates")
    inside = (
        (pts[:, 0] >= grid.x_extent[0])
        & (pts[:, 0] <= grid.x_extent[1])
        & (pts[:, 1] >= grid.y_extent[0])
        & (pts[:, 1] <= grid.y_extent[1])
    )
    rows = np.minimum(
        np.floor((pts[:, 0] - grid.x_extent[0]) / grid.cell_height).astype(np.int64),
        grid.height_cells - 1,
    )
    cols = np.minimum(
        np.floor((pts[:, 1] - grid.y_extent[0]) / grid.cell_width).astype(np.int64),
        grid.width_cells - 1,
    )
    return rows, cols, inside


def resample_polyline(p: Polyline, n: int) -> Polyline:
    """Resample to n points equally spaced by arc length.

    Open lines keep both endpoints exactly; closed lines are sampled at n
    equidistant positions around the loop starting from the first vertex.
    """
    if n < 2:
        raise ValueError("need at least 2 sample points")
    pts = p.points
    if p.closed:
        pts = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    total = float(seg.sum())
    if total <= 0.0:
        raise ValueError("cannot resample a zero-length polyline")
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if p.closed:
        s = np.arange(n) * (total / n)
    else:
        s = np.linspace(0.0, total, n)
    out = np.stack([np.interp(s, cum, pts[:, 0]), np.interp(s, cum, pts[:, 1])], axis=1)
    if not p.closed:
        out[0] = p.points[0]
        out[-1] = p.points[-1]
    return Polyline(p.cls, out, p.closed)


def chamfer_points(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric mean nearest-point distance between two sample sets."""
    diff = a[:, None, :] - b[None, :, :]
    d = np.sqrt((diff**2).sum(-1))
    return 0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean())


def chamfer_distance(a: Polyline, b: Polyline, n_samples: int = 100) -> float:
    """Chamfer distance in meters between two polylines resampled to n_samples."""
    sa = resample_polyline(a, n_samples).points
    sb = resample_polyline(b, n_samples).points
    return chamfer_points(sa, sb)


def transform_map(vmap: VectorMap, t: EgoTransform) -> VectorMap:
    """Apply a rigid ego transform to every polyline; classes and order preserved."""
    return VectorMap([Polyline(p.cls, t.apply(p.points), p.closed) for p in vmap])


def _clip_segment(p, q, box):
    """Liang-Barsky clip of segment p-q to box = (x_lo, x_hi, y_lo, y_hi).

    Returns (a, b, t0, t1) clipped endpoints and parameters, or None.
    """
    x_lo, x_hi, y_lo, y_hi = box
    dx, dy = q[0] - p[0], q[1] - p[1]
    t0, t1 = 0.0, 1.0
    for num, den in (
        (x_lo - p[0], dx),
        (p[0] - x_hi, -dx),
        (y_lo - p[1], dy),
        (p[1] - y_hi, -dy),
    ):
        if den == 0.0:
            if num > 0.0:
                return None
            continue
        t = num / den
        if den > 0.0:
            if t > t1:
                return None
            t0 = max(t0, t)
        else:
            if t < t0:
                return None
            t1 = min(t1, t)
    if t0 > t1:
        return None
    a = (p[0] + t0 * dx, p[1] + t0 * dy) if t0 > 0.0 else (p[0], p[1])
    b = (p[0] + t1 * dx, p[1] + t1 * dy) if t1 < 1.0 else (q[0], q[1])
    return a, b, t0, t1


def clip_open_polyline(points: np.ndarray, box) -> list[np.ndarray]:
    """Clip an open polyline to an axis-aligned box, splitting into pieces."""
    pieces = []
    cur: list = []
    for p, q in zip(points[:-1], points[1:]):
        res = _clip_segment(p, q, box)
        if res is None:
            if len(cur) >= 2:
                pieces.append(np.array(cur))
            cur = []
            continue
        a, b, t0, t1 = res
        if cur and t0 == 0.0:
            cur.append(b)
        else:
            if len(cur) >= 2:
                pieces.append(np.array(cur))
            cur = [a, b]
        if t1 < 1.0:
            if len(cur) >= 2:
                pieces.append(np.array(cur))
            cur = []
    if len(cur) >= 2:
        pieces.append(np.array(cur))
    return pieces


def clip_closed_polygon(points: np.ndarray, box) -> np.ndarray | None:
    """Sutherland-Hodgman clip of a convex closed polygon to an axis-aligned box."""
    x_lo, x_hi, y_lo, y_hi = box
    planes = (
        (0, x_lo, 1.0),
        (0, x_hi, -1.0),
        (1, y_lo, 1.0),
        (1, y_hi, -1.0),
    )
    poly = [tuple(p) for p in points]
    for axis, bound, sign in planes:
        if not poly:
            return None
        out = []
        for i in range(len(poly)):
            p = poly[i]
            q = poly[(i + 1) % len(poly)]
            p_in = sign * (p[axis] - bound) >= 0.0
            q_in = sign * (q[axis] - bound) >= 0.0
            if p_in:
                out.append(p)
            if p_in != q_in:
                t = (bound - p[axis]) / (q[axis] - p[axis])
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
        poly = out
    if len(poly) < 3:
        return None
    # drop consecutive duplicates introduced by clipping at corners
    cleaned = [poly[0]]
    for p in poly[1:]:
        if not (abs(p[0] - cleaned[-1][0]) < 1e-12 and abs(p[1] - cleaned[-1][1]) < 1e-12):
            cleaned.append(p)
    while len(cleaned) > 1 and abs(cleaned[0][0] - cleaned[-1][0]) < 1e-12 and abs(cleaned[0][1] - cleaned[-1][1]) < 1e-12:
        cleaned.pop()
    if len(cleaned) < 3:
        return None
    return np.array(cleaned)


def clip_vector_map(vmap: VectorMap, box, min_length: float = 0.0) -> VectorMap:
    """Clip a vector map to a box; open lines split into pieces, closed stay closed.

    Pieces shorter than min_length (open) are dropped.
    """
    out = []
    for pl in vmap:
        if pl.closed:
            clipped = clip_closed_polygon(pl.points, box)
            if clipped is not None:
                out.append(Polyline(pl.cls, clipped, True))
        else:
            for piece in clip_open_polyline(pl.points, box):
                p = Polyline(pl.cls, piece, False)
                if p.arc_length() >= min_length:
                    out.append(p)
    return VectorMap(out)

"""Rasterization of vector maps onto per-class binary occupancy grids."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import CLASS_INDEX, NUM_CLASSES, GridSpec, VectorMap
from .geometry import _clip_segment


@dataclass
class RasterMap:
    """Per-class H x W occupancy layers over a metric grid, values in [0, 1]."""

    grid: GridSpec
    channels: np.ndarray  # (H, W, C) float32

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float32)
        if ch.shape != (self.grid.height_cells, self.grid.width_cells, NUM_CLASSES):
            raise ValueError("raster shape inconsistent with grid spec")
        self.channels = ch

    def channel(self, cls: str) -> np.ndarray:
        return self.channels[:, :, CLASS_INDEX[cls]]


def _cell_idx(coord: float, n: int) -> int:
    # half-open cells; the max boundary clamps into the last cell
    return min(int(math.floor(coord)), n - 1)


def supercover_cells(p0, p1, grid: GridSpec) -> list[tuple[int, int]]:
    """Cells crossed by the segment p0-p1 under the half-open cell convention.

    A segment running exactly along an interior boundary marks only the upper
    cell, matching floor binning of sampled points.
    """
    h, w = grid.height_cells, grid.width_cells
    u0 = (p0[0] - grid.x_extent[0]) / grid.cell_height
    v0 = (p0[1] - grid.y_extent[0]) / grid.cell_width
    u1 = (p1[0] - grid.x_extent[0]) / grid.cell_height
    v1 = (p1[1] - grid.y_extent[0]) / grid.cell_width
    res = _clip_segment((u0, v0), (u1, v1), (0.0, float(h), 0.0, float(w)))
    if res is None:
        return []
    (ua, va), (ub, vb), _, _ = res

    r, c = _cell_idx(ua, h), _cell_idx(va, w)
    r_end, c_end = _cell_idx(ub, h), _cell_idx(vb, w)
    du, dv = ub - ua, vb - va

    cells = [(r, c)]
    if du == 0.0 and dv == 0.0:
        return cells

    step_r = 1 if du > 0 else (-1 if du < 0 else 0)
    step_c = 1 if dv > 0 else (-1 if dv < 0 else 0)
    inf = float("inf")
    if du != 0.0:
        next_u = r + 1 if du > 0 else r
        t_max_r = (next_u - ua) / du
        t_delta_r = abs(1.0 / du)
    else:
        t_max_r, t_delta_r = inf, inf
    if dv != 0.0:
        next_v = c + 1 if dv > 0 else c
        t_max_c = (next_v - va) / dv
        t_delta_c = abs(1.0 / dv)
    else:
        t_max_c, t_delta_c = inf, inf

    max_steps = abs(r_end - r) + abs(c_end - c) + 4
    steps = 0
    while (r, c) != (r_end, c_end) and steps < max_steps:
        steps += 1
        if t_max_r < t_max_c:
            r += step_r
            t_max_r += t_delta_r
        elif t_max_c < t_max_r:
            c += step_c
            t_max_c += t_delta_c
        else:
            # exact corner crossing: under half-open cells only the diagonal
            # neighbor is entered
            r += step_r
            c += step_c
            t_max_r += t_delta_r
            t_max_c += t_delta_c
        if 0 <= r < h and 0 <= c < w:
            cells.append((r, c))
        else:
            break
    if cells[-1] != (r_end, c_end):
        cells.append((r_end, c_end))
    return cells


def fill_polygon(points: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Boolean (H, W) mask of cells whose center lies inside the closed polygon."""
    h, w = grid.height_cells, grid.width_cells
    xs = grid.x_extent[0] + (np.arange(h) + 0.5) * grid.cell_height
    ys = grid.y_extent[0] + (np.arange(w) + 0.5) * grid.cell_width
    cx = xs[:, None]
    cy = ys[None, :]
    inside = np.zeros((h, w), dtype=bool)
    n = len(points)
    for i in range(n):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % n]
        if y1 == y2:
            continue
        cond = (y1 > cy) != (y2 > cy)
        x_int = x1 + (cy - y1) * (x2 - x1) / (y2 - y1)
        inside ^= cond & (cx < x_int)
    return inside


def rasterize_map(vmap: VectorMap, grid: GridSpec, line_width: int = 1) -> RasterMap:
    """Render a vector map into binary per-class layers.

    Open polylines are drawn by supercover traversal and dilated to
    line_width; closed polylines (crossings, islands) are filled by
    cell-center containment. Overlapping classes set both channels.
    """
    if line_width < 1:
        raise ValueError("line_width must be >= 1")
    h, w = grid.height_cells, grid.width_cells
    lines = np.zeros((h, w, NUM_CLASSES), dtype=bool)
    fills = np.zeros((h, w, NUM_CLASSES), dtype=bool)
    for pl in vmap:
        ch = CLASS_INDEX[pl.cls]
        if pl.closed:
            fills[:, :, ch] |= fill_polygon(pl.points, grid)
        else:
            for p, q in zip(pl.points[:-1], pl.points[1:]):
                for r, c in supercover_cells(p, q, grid):
                    lines[r, c, ch] = True
    if line_width > 1:
        struct = np.ones((line_width, line_width), dtype=bool)
        for ch in range(NUM_CLASSES):
            if lines[:, :, ch].any():
                lines[:, :, ch] = ndimage.binary_dilation(lines[:, :, ch], structure=struct)
    return RasterMap(grid, (lines | fills).astype(np.float32))

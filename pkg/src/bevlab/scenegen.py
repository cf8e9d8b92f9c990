"""Procedural synthetic road scenes: ground-truth maps, ego motion, degraded observations.

A scene is built once in world coordinates (smooth centerline, lane offsets,
crossings, optional traffic island) and re-expressed in each frame's ego
frame, so frame-to-frame consistency holds by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import io

from .geometry import (
    EgoTransform,
    GridSpec,
    Polyline,
    VectorMap,
    clip_vector_map,
)
from .raster import rasterize_map

FRAME_DT = 0.5  # seconds between frames (2 Hz)
_ARC_STEP = 0.5  # meters between curve vertices
_OBS_STREAM = 0x0B5


@dataclass
class SceneParams:
    seed: int
    n_lanes: tuple[int, int] = (1, 3)
    lane_width: float = 3.5
    curvature: tuple[float, float] = (0.0, 0.02)
    p_crossing: float = 0.6
    p_island: float = 0.1
    frames: int = 4
    ego_speed: tuple[float, float] = (6.0, 12.0)

    def __post_init__(self):
        if not (0.0 <= self.p_crossing <= 1.0 and 0.0 <= self.p_island <= 1.0):
            raise ValueError("probabilities must be in [0, 1]")
        if self.lane_width <= 0:
            raise ValueError("lane_width must be positive")
        if self.frames < 1:
            raise ValueError("need at least one frame")
        if self.n_lanes[0] < 1 or self.n_lanes[0] > self.n_lanes[1]:
            raise ValueError("bad n_lanes range")

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "n_lanes": list(self.n_lanes),
            "lane_width": self.lane_width,
            "curvature": list(self.curvature),
            "p_crossing": self.p_crossing,
            "p_island": self.p_island,
            "frames": self.frames,
            "ego_speed": list(self.ego_speed),
        }

    @classmethod
    def from_json(cls, d: dict) -> "SceneParams":
        return cls(
            seed=int(d["seed"]),
            n_lanes=tuple(d["n_lanes"]),
            lane_width=float(d["lane_width"]),
            curvature=tuple(d["curvature"]),
            p_crossing=float(d["p_crossing"]),
            p_island=float(d["p_island"]),
            frames=int(d["frames"]),
            ego_speed=tuple(d["ego_speed"]),
        )


@dataclass
class DegradationConfig:
    """Observation corruption standing in for an imperfect camera-to-BEV pipeline."""

    blur: int = 3  # box kernel size, 1 disables
    noise_sigma: float = 0.25
    n_occlusions: tuple[int, int] = (1, 2)
    occlusion_frac: tuple[float, float] = (0.12, 0.3)
    falloff: float = 0.025  # linear attenuation per meter of range

    @classmethod
    def none(cls) -> "DegradationConfig":
        return cls(blur=1, noise_sigma=0.0, n_occlusions=(0, 0), occlusion_frac=(0.0, 0.0), falloff=0.0)

    def to_json(self) -> dict:
        return {
            "blur": self.blur,
            "noise_sigma": self.noise_sigma,
            "n_occlusions": list(self.n_occlusions),
            "occlusion_frac": list(self.occlusion_frac),
            "falloff": self.falloff,
        }

    @classmethod
    def from_json(cls, d: dict) -> "DegradationConfig":
        return cls(
            blur=int(d["blur"]),
            noise_sigma=float(d["noise_sigma"]),
            n_occlusions=tuple(d["n_occlusions"]),
            occlusion_frac=tuple(d["occlusion_frac"]),
            falloff=float(d["falloff"]),
        )


@dataclass
class Observation:
    grid: GridSpec
    channels: np.ndarray  # (H, W, C) float32

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float32)
        if ch.shape[:2] != (self.grid.height_cells, self.grid.width_cells):
            raise ValueError("observation shape inconsistent with grid")
        if not np.all(np.isfinite(ch)):
            raise ValueError("observation values must be finite")
        self.channels = ch


@dataclass
class Scene:
    maps: list[VectorMap]  # per frame, in that frame's ego coordinates
    transforms: list[EgoTransform]  # transforms[t-1] maps ego frame t-1 into frame t
    params: SceneParams
    extent: tuple[float, float]  # generation half-extent (x, y), >= perception range


class _RoadCurve:
    """Smooth centerline with slowly varying curvature, sampled every _ARC_STEP meters."""

    def __init__(self, rng: np.random.Generator, params: SceneParams, s_min: float, s_max: float):
        k_lo, k_hi = params.curvature
        total_amp = rng.uniform(k_lo, k_hi)
        split = rng.uniform(0.5, 0.9)
        self._amp = (total_amp * split, total_amp * (1.0 - split))
        self._wavelen = (rng.uniform(50.0, 120.0), rng.uniform(25.0, 60.0))
        self._phase = (rng.uniform(0.0, 2 * math.pi), rng.uniform(0.0, 2 * math.pi))
        theta0 = rng.uniform(-0.2, 0.2)

        n_lo = int(math.ceil(-s_min / _ARC_STEP))
        n_hi = int(math.ceil(s_max / _ARC_STEP))
        self.s = (np.arange(-n_lo, n_hi + 1)) * _ARC_STEP
        kappa = self._kappa(self.s)
        # integrate heading and position outward from s = 0 (index n_lo)
        dtheta = 0.5 * (kappa[1:] + kappa[:-1]) * _ARC_STEP
        theta = np.concatenate([[0.0], np.cumsum(dtheta)])
        theta = theta - theta[n_lo] + theta0
        dxy = np.stack([np.cos(theta), np.sin(theta)], axis=1) * _ARC_STEP
        pos = np.concatenate([[[0.0, 0.0]], np.cumsum(0.5 * (dxy[1:] + dxy[:-1]), axis=0)])
        pos = pos - pos[n_lo]
        self.theta = theta
        self.center = pos

    def _kappa(self, s):
        a1, a2 = self._amp
        l1, l2 = self._wavelen
        p1, p2 = self._phase
        return a1 * np.sin(2 * math.pi * s / l1 + p1) + a2 * np.sin(2 * math.pi * s / l2 + p2)

    def heading(self, s):
        return np.interp(s, self.s, self.theta)

    def point(self, s, offset=0.0):
        x = np.interp(s, self.s, self.center[:, 0])
        y = np.interp(s, self.s, self.center[:, 1])
        th = self.heading(s)
        return np.stack([x - np.sin(th) * offset, y + np.cos(th) * offset], axis=-1)

    def offset_curve(self, offset: float) -> np.ndarray:
        normal = np.stack([-np.sin(self.theta), np.cos(self.theta)], axis=1)
        return self.center + normal * offset


def generate_scene(params: SceneParams, extent: tuple[float, float] = (21.0, 13.5)) -> Scene:
    """Build one deterministic scene from its seed.

    Roads run roughly longitudinally through the ego position; boundaries
    flank the outermost lanes and dividers separate adjacent lanes.
    """
    gx, gy = extent
    if params.n_lanes[1] * params.lane_width > 2.0 * gy:
        raise ValueError("lane_width * n_lanes exceeds the lateral extent")

    rng = np.random.default_rng(params.seed)
    n_lanes = int(rng.integers(params.n_lanes[0], params.n_lanes[1] + 1))
    speed = rng.uniform(*params.ego_speed)
    travel = speed * FRAME_DT * (params.frames - 1)
    total_width = n_lanes * params.lane_width
    reach = math.hypot(gx, gy) + total_width + 8.0
    curve = _RoadCurve(rng, params, -reach, travel + reach)

    lane_idx = int(rng.integers(0, n_lanes))
    ego_offset = -total_width / 2.0 + (lane_idx + 0.5) * params.lane_width
    ego_offset += rng.uniform(-0.3, 0.3)

    world = []
    half = total_width / 2.0
    world.append(Polyline("bound", curve.offset_curve(-half), False))
    world.append(Polyline("bound", curve.offset_curve(half), False))
    divider_offsets = [-half + k * params.lane_width for k in range(1, n_lanes)]
    dividers = [curve.offset_curve(d) for d in divider_offsets]

    # optional traffic island replacing a stretch of one divider
    if rng.random() < params.p_island and n_lanes >= 2:
        k = int(rng.integers(0, len(divider_offsets)))
        s_mid = rng.uniform(0.0, travel + 6.0)
        half_len = rng.uniform(2.0, 3.5)
        width = rng.uniform(0.8, 1.3)
        d = divider_offsets[k]
        s0, s1 = s_mid - half_len, s_mid + half_len
        corners = np.array(
            [
                curve.point(s0, d - width / 2.0),
                curve.point(s1, d - width / 2.0),
                curve.point(s1, d + width / 2.0),
                curve.point(s0, d + width / 2.0),
            ]
        )
        world.append(Polyline("bound", corners, True))
        keep_lo = curve.s <= s0 - 1.0
        keep_hi = curve.s >= s1 + 1.0
        pieces = []
        if keep_lo.sum() >= 2:
            pieces.append(dividers[k][keep_lo])
        if keep_hi.sum() >= 2:
            pieces.append(dividers[k][keep_hi])
        dividers = [dv for i, dv in enumerate(dividers) if i != k] + pieces

    for dv in dividers:
        world.append(Polyline("div", dv, False))

    # pedestrian crossings: perpendicular rectangles spanning the road
    if rng.random() < params.p_crossing:
        n_cross = 1 + int(rng.random() < 0.4)
        positions: list[float] = []
        for _ in range(n_cross):
            for _attempt in range(8):
                s_c = rng.uniform(-4.0, travel + 10.0)
                if all(abs(s_c - p) >= 8.0 for p in positions):
                    positions.append(s_c)
                    break
        for s_c in positions:
            half_len = rng.uniform(1.2, 2.0)
            span = half + 0.5
            corners = np.array(
                [
                    curve.point(s_c - half_len, -span),
                    curve.point(s_c + half_len, -span),
                    curve.point(s_c + half_len, span),
                    curve.point(s_c - half_len, span),
                ]
            )
            world.append(Polyline("ped", corners, True))

    world_map = VectorMap(world)

    poses = []
    for t in range(params.frames):
        s_t = t * speed * FRAME_DT
        pos = curve.point(s_t, ego_offset)
        yaw = float(curve.heading(s_t))
        poses.append(EgoTransform.from_planar(float(pos[0]), float(pos[1]), yaw))

    box = (-gx, gx, -gy, gy)
    maps = []
    for pose in poses:
        to_ego = pose.inverse()
        ego_map = VectorMap(
            [Polyline(p.cls, to_ego.apply(p.points), p.closed) for p in world_map]
        )
        maps.append(clip_vector_map(ego_map, box, min_length=0.0))

    transforms = [
        EgoTransform(poses[t].inverse().matrix @ poses[t - 1].matrix)
        for t in range(1, params.frames)
    ]
    return Scene(maps=maps, transforms=transforms, params=params, extent=extent)


def render_observation(
    scene: Scene, frame: int, degradation: DegradationConfig, grid: GridSpec
) -> Observation:
    """Degraded rendering of the frame's GT raster: blur, noise, occlusion, range falloff."""
    if frame >= scene.params.frames:
        raise ValueError("frame index out of range")
    x = rasterize_map(scene.maps[frame], grid).channels.astype(np.float32).copy()
    rng = np.random.default_rng([_OBS_STREAM, scene.params.seed, frame])

    if degradation.blur > 1:
        for c in range(x.shape[2]):
            x[:, :, c] = ndimage.uniform_filter(x[:, :, c], size=degradation.blur, mode="constant")
    if degradation.noise_sigma > 0.0:
        x = x + rng.normal(0.0, degradation.noise_sigma, size=x.shape).astype(np.float32)
    lo, hi = degradation.n_occlusions
    n_occ = int(rng.integers(lo, hi + 1)) if hi > 0 else 0
    h, w = grid.height_cells, grid.width_cells
    for _ in range(n_occ):
        fh = rng.uniform(*degradation.occlusion_frac)
        fw = rng.uniform(*degradation.occlusion_frac)
        oh = max(1, int(round(fh * h)))
        ow = max(1, int(round(fw * w)))
        r0 = int(rng.integers(0, max(1, h - oh + 1)))
        c0 = int(rng.integers(0, max(1, w - ow + 1)))
        x[r0 : r0 + oh, c0 : c0 + ow, :] = 0.0
    if degradation.falloff > 0.0:
        centers = grid.cell_centers()
        r = np.hypot(centers[:, :, 0], centers[:, :, 1])
        atten = np.maximum(0.0, 1.0 - degradation.falloff * r).astype(np.float32)
        x = x * atten[:, :, None]
    return Observation(grid, x.astype(np.float32))


@dataclass
class DatasetConfig:
    n_train: int = 500
    n_val: int = 100
    base_seed: int = 9000
    grid: GridSpec = field(default_factory=GridSpec)
    scene: SceneParams = field(default_factory=lambda: SceneParams(seed=0))
    degradation: DegradationConfig = field(default_factory=DegradationConfig)
    gen_margin: float = 6.0

    @property
    def gen_extent(self) -> tuple[float, float]:
        gx = self.grid.x_extent[1] - self.grid.x_extent[0]
        gy = self.grid.y_extent[1] - self.grid.y_extent[0]
        return (gx / 2.0 + self.gen_margin, gy / 2.0 + self.gen_margin)

    def to_json(self) -> dict:
        return {
            "n_train": self.n_train,
            "n_val": self.n_val,
            "base_seed": self.base_seed,
            "grid": self.grid.to_json(),
            "scene": self.scene.to_json(),
            "degradation": self.degradation.to_json(),
            "gen_margin": self.gen_margin,
        }

    @classmethod
    def from_json(cls, d: dict) -> "DatasetConfig":
        return cls(
            n_train=int(d["n_train"]),
            n_val=int(d["n_val"]),
            base_seed=int(d["base_seed"]),
            grid=GridSpec.from_json(d["grid"]),
            scene=SceneParams.from_json(d["scene"]),
            degradation=DegradationConfig.from_json(d["degradation"]),
            gen_margin=float(d["gen_margin"]),
        )


_VAL_SEED_OFFSET = 1_000_000
DATASET_VERSION = "1"


def dataset_seeds(cfg: DatasetConfig) -> tuple[list[int], list[int]]:
    """Disjoint deterministic seed ranges for the train and val splits."""
    train = [cfg.base_seed + i for i in range(cfg.n_train)]
    val = [cfg.base_seed + _VAL_SEED_OFFSET + i for i in range(cfg.n_val)]
    assert not set(train) & set(val)
    return train, val


def build_dataset(cfg: DatasetConfig, out_dir) -> dict:
    """Generate scenes and observations on disk; idempotent for a fixed config.

    Returns the manifest, which is also written as manifest.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_seeds, val_seeds = dataset_seeds(cfg)
    entries = [(s, "train") for s in train_seeds] + [(s, "val") for s in val_seeds]

    scenes_meta = []
    for idx, (seed, split) in enumerate(entries):
        sid = f"{split}_{idx if split == 'train' else idx - cfg.n_train:04d}"
        sdir = out / "scenes" / sid
        sdir.mkdir(parents=True, exist_ok=True)
        params = replace(cfg.scene, seed=seed)
        scene = generate_scene(params, cfg.gen_extent)

        vec_path = sdir / "vector.jsonl"
        io.write_vector_maps(
            vec_path, [(f"{sid}/{t}", scene.maps[t]) for t in range(params.frames)]
        )
        io.write_json(
            sdir / "transforms.json",
            {"transforms": [t.matrix.tolist() for t in scene.transforms]},
        )
        obs_files = []
        for t in range(params.frames):
            obs = render_observation(scene, t, cfg.degradation, cfg.grid)
            opath = sdir / f"obs_{t:02d}.amap"
            io.write_array(opath, obs.channels)
            obs_files.append(str(opath.relative_to(out)))
        scenes_meta.append(
            {
                "id": sid,
                "seed": seed,
                "split": split,
                "files": {
                    "vector": str(vec_path.relative_to(out)),
                    "transforms": str((sdir / "transforms.json").relative_to(out)),
                    "observations": obs_files,
                },
            }
        )

    manifest = {
        "version": DATASET_VERSION,
        "grid": cfg.grid.to_json(),
        "scene_template": cfg.scene.to_json(),
        "degradation": cfg.degradation.to_json(),
        "gen_margin": cfg.gen_margin,
        "n_train": cfg.n_train,
        "n_val": cfg.n_val,
        "base_seed": cfg.base_seed,
        "scenes": scenes_meta,
    }
    io.write_json(out / "manifest.json", manifest)
    return manifest

"""In-memory view of a generated dataset, with per-frame training targets."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .geometry import EgoTransform, GridSpec, VectorMap, clip_vector_map
from .raster import rasterize_map

# GT pieces shorter than this (meters) are dropped when clipping to the
# perception range; they carry no stable supervision signal
MIN_GT_LENGTH = 1.0


@dataclass
class FrameSample:
    scene_id: str
    frame: int
    observation: np.ndarray  # (H, W, C) float32
    vmap: VectorMap  # generation-range map in this frame's ego coordinates

    @property
    def key(self) -> str:
        return f"{self.scene_id}/{self.frame}"


@dataclass
class SceneData:
    id: str
    seed: int
    split: str
    frames: list[FrameSample]
    transforms: list[EgoTransform]


class MapDataset:
    def __init__(self, root, manifest: dict, scenes: list[SceneData]):
        self.root = Path(root)
        self.manifest = manifest
        self.grid = GridSpec.from_json(manifest["grid"])
        self.scenes = scenes

    def split(self, name: str) -> list[SceneData]:
        return [s for s in self.scenes if s.split == name]

    def frames(self, split: str) -> list[FrameSample]:
        return [f for s in self.split(split) for f in s.frames]

    def perception_gt(self, sample: FrameSample) -> VectorMap:
        """Frame GT clipped to the perception range (what the model is scored on)."""
        g = self.grid
        box = (g.x_extent[0], g.x_extent[1], g.y_extent[0], g.y_extent[1])
        return clip_vector_map(sample.vmap, box, min_length=MIN_GT_LENGTH)

    def gt_raster(self, sample: FrameSample) -> np.ndarray:
        """(H, W, C) binary float32 raster of the frame GT."""
        return rasterize_map(sample.vmap, self.grid).channels


def load_dataset(root) -> MapDataset:
    root = Path(root)
    manifest = io.read_json(root / "manifest.json")
    scenes = []
    for meta in manifest["scenes"]:
        entries = io.read_vector_maps(root / meta["files"]["vector"])
        tinfo = io.read_json(root / meta["files"]["transforms"])
        transforms = [EgoTransform(np.asarray(m)) for m in tinfo["transforms"]]
        frames = []
        for t, (fid, vmap) in enumerate(entries):
            obs = io.read_array(root / meta["files"]["observations"][t])
            frames.append(FrameSample(meta["id"], t, obs, vmap))
        scenes.append(
            SceneData(meta["id"], int(meta["seed"]), meta["split"], frames, transforms)
        )
    return MapDataset(root, manifest, scenes)

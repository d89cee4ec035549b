"""Shared builders for deterministic test fixtures."""

from __future__ import annotations

import numpy as np
import pytest

from scenediff import Frame, OdometryPose, ViewSequenceMap


def make_dense_frame(rng: np.random.Generator, frame_id: int, n_features: int = 20,
                     dim: int = 8, width: int = 256, height: int = 192) -> Frame:
    keypoints = np.column_stack([
        rng.uniform(0, width, size=n_features),
        rng.uniform(0, height, size=n_features),
    ]).astype(np.float32)
    descriptors = rng.standard_normal((n_features, dim)).astype(np.float32)
    return Frame(frame_id=frame_id, keypoints=keypoints, descriptors=descriptors,
                 descriptor_kind="dense", dim=dim,
                 image_width=width, image_height=height)


def make_binary_frame(rng: np.random.Generator, frame_id: int, n_features: int = 20,
                      bits: int = 32, width: int = 256, height: int = 192) -> Frame:
    keypoints = np.column_stack([
        rng.uniform(0, width, size=n_features),
        rng.uniform(0, height, size=n_features),
    ]).astype(np.float32)
    codes = rng.integers(0, 256, size=(n_features, bits // 8), dtype=np.uint8)
    return Frame(frame_id=frame_id, keypoints=keypoints, descriptors=codes,
                 descriptor_kind="binary", dim=bits,
                 image_width=width, image_height=height)


def straight_poses(n: int, spacing: float = 1.0) -> list[OdometryPose]:
    return [OdometryPose(frame_id=i, x=i * spacing, y=0.0, heading=0.0)
            for i in range(n)]


def make_map(rng: np.random.Generator, n_frames: int = 10, n_features: int = 20,
             dim: int = 8) -> ViewSequenceMap:
    frames = [make_dense_frame(rng, i, n_features, dim) for i in range(n_frames)]
    vmap = ViewSequenceMap(frames=frames, poses=straight_poses(n_frames))
    vmap.validate()
    return vmap


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)

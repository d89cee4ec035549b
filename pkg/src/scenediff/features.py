"""Core domain types: keypoints, features, frames, poses, and the view-sequence map.

Frames store keypoints and descriptors as contiguous arrays; ``LocalFeature`` is a
per-row view used by the scoring operations. Feature ids are row indices in file
order. All types are immutable by convention after load and safe to share across
workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

DENSE = "dense"
BINARY = "binary"

# Canonical capture size; stores may declare any size in their manifest.
DEFAULT_IMAGE_WIDTH = 1024
DEFAULT_IMAGE_HEIGHT = 768


@dataclass(frozen=True)
class Keypoint:
    """Pixel position of a local feature, x right, y down."""

    x: float
    y: float


@dataclass(frozen=True)
class LocalFeature:
    """One keypoint plus its descriptor row; feature_id is the row index."""

    feature_id: int
    keypoint: Keypoint
    descriptor: np.ndarray


@dataclass(frozen=True)
class OdometryPose:
    """2D ground-plane odometry pose; heading in [-pi, pi)."""

    frame_id: int
    x: float
    y: float
    heading: float


def wrap_heading(theta: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return float((theta + math.pi) % (2.0 * math.pi) - math.pi)


@dataclass
class Frame:
    """One view: keypoints (N, 2) float32 and descriptors for N local features.

    descriptor_kind is "dense" (descriptors (N, dim) float32) or "binary"
    (descriptors (N, dim // 8) uint8 packed codes, most significant bit first).
    """

    frame_id: int
    keypoints: np.ndarray
    descriptors: np.ndarray
    descriptor_kind: str
    dim: int
    image_width: int = DEFAULT_IMAGE_WIDTH
    image_height: int = DEFAULT_IMAGE_HEIGHT
    timestamp_index: int = -1

    def __post_init__(self) -> None:
        if self.timestamp_index < 0:
            self.timestamp_index = self.frame_id

    @property
    def n_features(self) -> int:
        return int(self.keypoints.shape[0])

    def feature(self, feature_id: int) -> LocalFeature:
        if not 0 <= feature_id < self.n_features:
            raise ValidationError(
                f"feature id {feature_id} out of range for frame {self.frame_id} "
                f"({self.n_features} features)"
            )
        x, y = self.keypoints[feature_id]
        return LocalFeature(feature_id, Keypoint(float(x), float(y)), self.descriptors[feature_id])

    def features(self) -> list[LocalFeature]:
        return [self.feature(i) for i in range(self.n_features)]

    def validate(self) -> None:
        kp = np.asarray(self.keypoints)
        if kp.ndim != 2 or kp.shape[1] != 2:
            raise ValidationError(f"frame {self.frame_id}: keypoints must be (N, 2)")
        if kp.shape[0] != self.descriptors.shape[0]:
            raise ValidationError(
                f"frame {self.frame_id}: {kp.shape[0]} keypoints vs "
                f"{self.descriptors.shape[0]} descriptors"
            )
        if kp.shape[0]:
            if kp[:, 0].min() < 0 or kp[:, 0].max() >= self.image_width:
                raise ValidationError(f"frame {self.frame_id}: keypoint x outside [0, width)")
            if kp[:, 1].min() < 0 or kp[:, 1].max() >= self.image_height:
                raise ValidationError(f"frame {self.frame_id}: keypoint y outside [0, height)")
        if self.descriptor_kind == DENSE:
            if self.descriptors.ndim != 2 or self.descriptors.shape[1] != self.dim:
                raise ValidationError(
                    f"frame {self.frame_id}: dense descriptors must be (N, {self.dim})"
                )
        elif self.descriptor_kind == BINARY:
            if self.dim % 8:
                raise ValidationError(f"frame {self.frame_id}: bit width {self.dim} not a byte multiple")
            if self.descriptors.ndim != 2 or self.descriptors.shape[1] != self.dim // 8:
                raise ValidationError(
                    f"frame {self.frame_id}: binary descriptors must be (N, {self.dim // 8}) bytes"
                )
        else:
            raise ValidationError(f"frame {self.frame_id}: unknown descriptor kind {self.descriptor_kind!r}")


@dataclass
class ViewSequenceMap:
    """Ordered frames with odometry poses and an optional keyframe subset."""

    frames: list[Frame] = field(default_factory=list)
    poses: list[OdometryPose] = field(default_factory=list)
    keyframe_ids: set[int] = field(default_factory=set)

    @property
    def frame_ids(self) -> list[int]:
        return [f.frame_id for f in self.frames]

    def frame(self, frame_id: int) -> Frame:
        frame = self._by_id().get(frame_id)
        if frame is None:
            raise ValidationError(f"no frame {frame_id} in map")
        return frame

    def pose(self, frame_id: int) -> OdometryPose:
        pose = self._pose_by_id().get(frame_id)
        if pose is None:
            raise ValidationError(f"no pose for frame {frame_id}")
        return pose

    def _by_id(self) -> dict[int, Frame]:
        return {f.frame_id: f for f in self.frames}

    def _pose_by_id(self) -> dict[int, OdometryPose]:
        return {p.frame_id: p for p in self.poses}

    @property
    def descriptor_kind(self) -> str:
        return self.frames[0].descriptor_kind if self.frames else DENSE

    @property
    def dim(self) -> int:
        return self.frames[0].dim if self.frames else 0

    def validate(self) -> None:
        ids = self.frame_ids
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise ValidationError("frame ids must be strictly increasing")
        stamps = [f.timestamp_index for f in self.frames]
        if any(b < a for a, b in zip(stamps, stamps[1:])):
            raise ValidationError("timestamp indices must be monotone non-decreasing")
        pose_ids = {p.frame_id for p in self.poses}
        missing = [i for i in ids if i not in pose_ids]
        if missing:
            raise ValidationError(f"missing pose for frames {missing[:5]}")
        for p in self.poses:
            if not -math.pi <= p.heading < math.pi:
                raise ValidationError(f"pose {p.frame_id}: heading {p.heading} outside [-pi, pi)")
        stray = self.keyframe_ids - set(ids)
        if stray:
            raise ValidationError(f"keyframe ids not in map: {sorted(stray)[:5]}")
        kinds = {f.descriptor_kind for f in self.frames}
        if len(kinds) > 1:
            raise ValidationError(f"mixed descriptor kinds in one map: {sorted(kinds)}")
        dims = {f.dim for f in self.frames}
        if len(dims) > 1:
            raise ValidationError(f"mixed descriptor dimensions in one map: {sorted(dims)}")
        for f in self.frames:
            f.validate()

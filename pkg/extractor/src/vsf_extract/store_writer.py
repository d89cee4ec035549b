"""VSF store writing for extracted sequences.

Mirrors the interchange layout::

    manifest.json      version 1, descriptor_kind "dense", dim, frame_count,
                       image_width, image_height (+ an extractor block with
                       the mode and, for grids, the grid shape)
    odometry.csv       "frame_id,x,y,heading"; extraction knows no odometry,
                       so every pose is written as zeros
    frames/<id>.vsf    b"VSF1", u32 LE count, then per feature f32 x, f32 y
                       and dim * f32 LE descriptor values

Keypoint coordinates are native pixels of the source image; the manifest
image size is the maximum over the sequence so every coordinate stays in
bounds when images differ in size.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ExtractionFailure
from .profiles import MODE_CONV_GRID, ExtractionProfile

FRAME_MAGIC = b"VSF1"


@dataclass(frozen=True)
class ExtractedFrame:
    frame_id: int
    keypoints: np.ndarray    # (N, 2) float32, native pixels
    descriptors: np.ndarray  # (N, dim) float32
    width: int
    height: int


def write_frame_file(path: Path, frame: ExtractedFrame) -> None:
    n = int(frame.keypoints.shape[0])
    parts = [FRAME_MAGIC, struct.pack("<I", n)]
    if n:
        kp = np.ascontiguousarray(frame.keypoints, dtype="<f4").view(np.uint8)
        desc = np.ascontiguousarray(frame.descriptors, dtype="<f4").view(np.uint8)
        parts.append(np.hstack([kp.reshape(n, 8), desc.reshape(n, -1)]).tobytes())
    path.write_bytes(b"".join(parts))


def write_store(frames: list[ExtractedFrame], out_dir: Path | str,
                profile: ExtractionProfile) -> None:
    """Write the extracted sequence as a complete, validating VSF store."""
    if not frames:
        raise ExtractionFailure("no extractable frames; nothing to write")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    (root / "frames").mkdir(exist_ok=True)

    width = max(f.width for f in frames)
    height = max(f.height for f in frames)
    extractor: dict[str, object] = {"mode": profile.mode}
    if profile.mode == MODE_CONV_GRID:
        extractor["grid"] = [profile.grid, profile.grid]
    manifest = {
        "version": 1,
        "descriptor_kind": "dense",
        "dim": profile.descriptor_dim,
        "frame_count": len(frames),
        "image_width": width,
        "image_height": height,
        "extractor": extractor,
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n")

    lines = ["frame_id,x,y,heading"]
    for frame in sorted(frames, key=lambda f: f.frame_id):
        lines.append(f"{frame.frame_id},0.0,0.0,0.0")
    (root / "odometry.csv").write_text("\n".join(lines) + "\n")

    for frame in frames:
        write_frame_file(root / "frames" / f"{frame.frame_id}.vsf", frame)

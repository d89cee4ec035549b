"""Sequence extraction: images in, VSF store out."""

from __future__ import annotations

from pathlib import Path

from .conv_features import conv_grid_features
from .errors import ExtractionFailure
from .images import load_sequence
from .keypoint_features import keypoint_sift_features
from .profiles import MODE_CONV_GRID, ExtractionProfile
from .store_writer import ExtractedFrame, write_store


def extract_frame(image, profile: ExtractionProfile, frame_id: int) -> ExtractedFrame:
    height, width = image.shape
    if profile.mode == MODE_CONV_GRID:
        keypoints, descriptors = conv_grid_features(image, profile, width, height)
    else:
        keypoints, descriptors = keypoint_sift_features(image, profile, width, height)
    return ExtractedFrame(frame_id=frame_id, keypoints=keypoints,
                          descriptors=descriptors, width=width, height=height)


def extract_sequence(image_dir: Path | str, profile: ExtractionProfile,
                     out_dir: Path | str) -> int:
    """Extract every readable image into a VSF store; returns the frame count.

    Images are processed independently in sorted filename order and written
    serially, so the output depends only on the inputs and the profile.
    """
    loaded = load_sequence(image_dir)
    if not loaded:
        raise ExtractionFailure(f"no extractable frames under {image_dir}")
    frames = [extract_frame(image, profile, frame_id)
              for frame_id, _, image in loaded]
    write_store(frames, out_dir, profile)
    return len(frames)

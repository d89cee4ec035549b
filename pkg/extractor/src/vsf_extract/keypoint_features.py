"""Sparse keypoints with gradient-histogram descriptors via OpenCV SIFT."""

from __future__ import annotations

import numpy as np
import cv2

from .profiles import SIFT_DIM, ExtractionProfile


def _to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)


def keypoint_sift_features(image: np.ndarray, profile: ExtractionProfile,
                           width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Detected keypoints (native pixels) and their 128-dim descriptors.

    Output rows are sorted by (y, x, response, angle) so the emitted order
    does not depend on detector internals.
    """
    sift = cv2.SIFT_create(nfeatures=profile.max_keypoints)
    keypoints, descriptors = sift.detectAndCompute(_to_uint8(image), None)
    if not keypoints:
        return (np.zeros((0, 2), dtype=np.float32),
                np.zeros((0, SIFT_DIM), dtype=np.float32))

    xs = np.array([kp.pt[0] for kp in keypoints], dtype=np.float64)
    ys = np.array([kp.pt[1] for kp in keypoints], dtype=np.float64)
    responses = np.array([kp.response for kp in keypoints], dtype=np.float64)
    angles = np.array([kp.angle for kp in keypoints], dtype=np.float64)

    inside = (xs >= 0.0) & (xs < width) & (ys >= 0.0) & (ys < height)
    order = np.lexsort((angles[inside], responses[inside],
                        xs[inside], ys[inside]))
    kept = np.flatnonzero(inside)[order]
    coords = np.column_stack([xs[kept], ys[kept]]).astype(np.float32)
    return coords, descriptors[kept].astype(np.float32)

"""Keypoint tracks between adjacent frames via pyramidal Lucas-Kanade flow."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import cv2

from .errors import ExtractionFailure
from .images import load_sequence

MAX_CORNERS = 300
CORNER_QUALITY = 0.01
CORNER_MIN_DISTANCE = 7.0
LK_WINDOW = (21, 21)
LK_LEVELS = 3
LK_CRITERIA = (cv2.TERM_CRITERIA_EPS | cv2.TERM_CRITERIA_COUNT, 30, 0.01)

TRACK_HEADER = ["track_id", "frame_id", "x", "y"]


def _to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)


def track_sequence(image_dir: Path | str, out_csv: Path | str,
                   max_corners: int = MAX_CORNERS) -> int:
    """Follow first-frame corners through the sequence; returns tracks written.

    Tracks start at corners of the first readable frame and advance frame to
    frame while the flow solver keeps them inside the image; a track is
    emitted once it spans at least two frames, rows ordered by track id then
    frame id (strictly increasing per track).
    """
    loaded = load_sequence(image_dir)
    if len(loaded) < 2:
        raise ExtractionFailure(
            f"tracking needs at least 2 readable images, found {len(loaded)}")

    first_id, _, first_image = loaded[0]
    prev = _to_uint8(first_image)
    corners = cv2.goodFeaturesToTrack(prev, maxCorners=max_corners,
                                      qualityLevel=CORNER_QUALITY,
                                      minDistance=CORNER_MIN_DISTANCE)
    if corners is None or len(corners) == 0:
        raise ExtractionFailure("no trackable corners in the first frame")

    points = corners.reshape(-1, 2).astype(np.float32)
    live = list(range(len(points)))
    observations: dict[int, list[tuple[int, float, float]]] = {
        tid: [(first_id, float(p[0]), float(p[1]))]
        for tid, p in zip(live, points)
    }

    for frame_id, _, image in loaded[1:]:
        if not live:
            break
        cur = _to_uint8(image)
        height, width = cur.shape
        moved, status, _ = cv2.calcOpticalFlowPyrLK(
            prev, cur, points.reshape(-1, 1, 2), None, winSize=LK_WINDOW,
            maxLevel=LK_LEVELS, criteria=LK_CRITERIA)
        moved = moved.reshape(-1, 2)
        status = status.reshape(-1).astype(bool)
        inside = ((moved[:, 0] >= 0.0) & (moved[:, 0] < width)
                  & (moved[:, 1] >= 0.0) & (moved[:, 1] < height))
        keep = status & inside

        next_live = []
        next_points = []
        for pos, tid in enumerate(live):
            if keep[pos]:
                x, y = float(moved[pos, 0]), float(moved[pos, 1])
                observations[tid].append((frame_id, x, y))
                next_live.append(tid)
                next_points.append(moved[pos])
        live = next_live
        points = np.array(next_points, dtype=np.float32).reshape(-1, 2)
        prev = cur

    emitted = {tid: obs for tid, obs in observations.items() if len(obs) >= 2}
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACK_HEADER)
        for tid in sorted(emitted):
            for frame_id, x, y in emitted[tid]:
                writer.writerow([tid, frame_id, repr(x), repr(y)])
    return len(emitted)

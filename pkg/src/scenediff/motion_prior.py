"""Motion words, anomaly ego-motion, and keyframe selection.

A motion feature is the 4D vector (x_s, y_s, x_e, y_e) formed by a tracked
keypoint's position at a start frame and its interpolated position after one
unit of cumulative ego-motion. Motion words are the features that survive
repeated reciprocal-1-NN consistency checks over random subsamples. Ego-motion
windows whose direction spread exceeds Tc are labeled anomalous; those frames
neither seed motion features nor, downstream, contribute a motion term.
"""

from __future__ import annotations

import csv
import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import FormatError, LearningError, ScoringError, ValidationError
from .features import Keypoint, OdometryPose

DEFAULT_UNIT_LENGTH = 1.0
DEFAULT_SAMPLE_SIZE = 10000
DEFAULT_ITERATIONS = 100
DEFAULT_OUTPUT_WORDS = 1000
DEFAULT_WINDOW_LENGTH = 20
DEFAULT_TC = math.radians(5.0)
DEFAULT_TM = 10.0

MOTION_MAGIC = b"MVF1"

TRACK_HEADER = ["track_id", "frame_id", "x", "y"]


@dataclass(frozen=True)
class Track:
    """One keypoint followed across frames; ids strictly increasing."""

    track_id: int
    observations: tuple[tuple[int, Keypoint], ...]

    def __post_init__(self) -> None:
        if len(self.observations) < 2:
            raise ValidationError(f"track {self.track_id}: needs at least 2 observations")
        ids = [f for f, _ in self.observations]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise ValidationError(f"track {self.track_id}: frame ids must strictly increase")

    @property
    def frame_ids(self) -> list[int]:
        return [f for f, _ in self.observations]

    def position(self, frame_id: int) -> Keypoint | None:
        for f, kp in self.observations:
            if f == frame_id:
                return kp
        return None


@dataclass(frozen=True)
class MotionFeature:
    start: Keypoint
    end: Keypoint

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in self.vector):
            raise ValidationError("motion feature components must be finite")

    @property
    def vector(self) -> tuple[float, float, float, float]:
        return (self.start.x, self.start.y, self.end.x, self.end.y)


@dataclass
class MotionVocabulary:
    """Motion words (4D rows) with their consistency-vote counts, votes descending."""

    words: np.ndarray   # (n, 4) float32
    votes: np.ndarray   # (n,)  uint32

    def __post_init__(self) -> None:
        self.words = np.asarray(self.words, dtype=np.float32).reshape(-1, 4)
        self.votes = np.asarray(self.votes, dtype=np.uint32).reshape(-1)
        if self.words.shape[0] != self.votes.shape[0]:
            raise ValidationError("word and vote counts differ")
        if np.any(self.votes[:-1] < self.votes[1:]):
            raise ValidationError("votes must be non-increasing")

    @property
    def word_count(self) -> int:
        return int(self.words.shape[0])

    def word(self, i: int) -> MotionFeature:
        xs, ys, xe, ye = (float(v) for v in self.words[i])
        return MotionFeature(start=Keypoint(xs, ys), end=Keypoint(xe, ye))


def motion_vector(start: Keypoint, end: Keypoint) -> np.ndarray:
    return np.array([start.x, start.y, end.x, end.y], dtype=np.float64)


def extract_motion_features(tracks: list[Track], poses: list[OdometryPose],
                            unit_length: float = DEFAULT_UNIT_LENGTH,
                            anomaly_frames: set[int] | None = None) -> list[MotionFeature]:
    """Track displacement over one unit of ego-motion, from every eligible start frame.

    The end point is interpolated at the exact moment the cumulative odometric
    displacement reaches unit_length; starts inside anomaly_frames are skipped,
    and starts whose track or odometry ends first contribute nothing.
    """
    if unit_length <= 0.0:
        raise ValidationError(f"unit_length must be positive, got {unit_length}")
    anomaly_frames = anomaly_frames or set()
    pose_by_id = {p.frame_id: p for p in poses}
    pose_ids = sorted(pose_by_id)
    pose_order = {f: i for i, f in enumerate(pose_ids)}

    out: list[MotionFeature] = []
    for track in tracks:
        positions = dict(track.observations)
        for f in track.frame_ids:
            if f not in pose_by_id:
                raise ValidationError(f"track {track.track_id}: no pose for frame {f}")
        for start_frame, start_kp in track.observations:
            if start_frame in anomaly_frames:
                continue
            cum = 0.0
            i = pose_order[start_frame]
            while i + 1 < len(pose_ids):
                fa, fb = pose_ids[i], pose_ids[i + 1]
                pa, pb = pose_by_id[fa], pose_by_id[fb]
                step = math.hypot(pb.x - pa.x, pb.y - pa.y)
                if cum + step >= unit_length and step > 0.0:
                    ka, kb = positions.get(fa), positions.get(fb)
                    if ka is None or kb is None:
                        break  # track gap across the crossing segment
                    alpha = (unit_length - cum) / step
                    end = Keypoint(ka.x + alpha * (kb.x - ka.x),
                                   ka.y + alpha * (kb.y - ka.y))
                    out.append(MotionFeature(start=start_kp, end=end))
                    break
                cum += step
                i += 1
    return out


def learn_motion_vocabulary(features: list[MotionFeature],
                            sample_size: int = DEFAULT_SAMPLE_SIZE,
                            iterations: int = DEFAULT_ITERATIONS,
                            output_words: int = DEFAULT_OUTPUT_WORDS,
                            seed: int = 0) -> MotionVocabulary:
    """Vote for features that are reciprocal 1-NNs inside random subsamples."""
    n = len(features)
    if n < 2:
        raise LearningError(f"need at least 2 motion features, got {n}")
    if sample_size < 2 or iterations < 1 or output_words < 1:
        raise LearningError("sample_size >= 2, iterations >= 1, output_words >= 1 required")
    data = np.array([f.vector for f in features], dtype=np.float64)
    draw = min(sample_size, n)

    counts = np.zeros(n, dtype=np.int64)
    streams = np.random.SeedSequence(seed).spawn(iterations)
    for ss in streams:
        rng = np.random.Generator(np.random.PCG64(ss))
        # sorted sample: argmin position order == feature index order, so
        # equidistant neighbors resolve to the smallest feature index
        sample = np.sort(rng.choice(n, size=draw, replace=False))
        dists = cdist(data[sample], data[sample])
        np.fill_diagonal(dists, np.inf)
        nearest = dists.argmin(axis=1)
        # reciprocity is tie-tolerant: q passes when it is among its retrieved
        # neighbor's equidistant nearest neighbors, not only the argmin one
        row_min = dists[np.arange(draw), nearest]
        reciprocal = dists[nearest, np.arange(draw)] == row_min[nearest]
        counts[sample[reciprocal]] += 1

    order = np.lexsort((np.arange(n), -counts))[: min(output_words, n)]
    return MotionVocabulary(words=data[order].astype(np.float32),
                            votes=counts[order].astype(np.uint32))


def _circular_std(directions: np.ndarray) -> float:
    """sqrt(-2 ln R) of the mean resultant length R; inf when R collapses to 0."""
    r = float(np.hypot(np.cos(directions).mean(), np.sin(directions).mean()))
    if r >= 1.0:
        return 0.0
    if r <= 0.0:
        return math.inf
    return math.sqrt(-2.0 * math.log(r))


@dataclass(frozen=True)
class EgoMotionSegmentLabel:
    frame_id: int
    anomaly: bool
    curvature: float


def detect_anomaly_ego_motion(poses: list[OdometryPose],
                              window_length: int = DEFAULT_WINDOW_LENGTH,
                              tc: float = DEFAULT_TC) -> list[EgoMotionSegmentLabel]:
    """Label each pose by the direction spread of its forward-looking window.

    Directions pair pose i with pose i + L/2 inside the window; curvature is
    their circular standard deviation. Frames whose window would overrun the
    sequence inherit the last full window's label.
    """
    if window_length < 2 or window_length % 2 != 0:
        raise ValidationError(f"window_length must be even and >= 2, got {window_length}")
    n = len(poses)
    if n < window_length:
        raise ValidationError(f"need at least {window_length} poses, got {n}")
    pts = np.array([[p.x, p.y] for p in poses], dtype=np.float64)
    half = window_length // 2

    labels: list[EgoMotionSegmentLabel] = []
    last: tuple[bool, float] = (False, 0.0)
    for a in range(n):
        if a + window_length <= n:
            delta = pts[a + half: a + window_length] - pts[a: a + half]
            moved = np.hypot(delta[:, 0], delta[:, 1]) > 0.0
            if not moved.any():
                warnings.warn(f"frame {poses[a].frame_id}: ego-motion window is "
                              "degenerate (no displacement); curvature set to 0")
                curvature = 0.0
            else:
                # zero-displacement pairs carry no direction
                d = delta[moved]
                curvature = _circular_std(np.arctan2(d[:, 1], d[:, 0]))
            last = (curvature > tc, curvature)
        labels.append(EgoMotionSegmentLabel(frame_id=poses[a].frame_id,
                                            anomaly=last[0], curvature=last[1]))
    return labels


def anomaly_frame_ids(labels: list[EgoMotionSegmentLabel]) -> set[int]:
    return {lab.frame_id for lab in labels if lab.anomaly}


def select_keyframes(frame_ids: list[int], stride: int = 10) -> list[int]:
    """Frame ids at multiples of stride, restricted to frames that exist."""
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")
    present = set(frame_ids)
    if not present:
        return []
    return [f for f in range(0, max(present) + 1, stride) if f in present]


def classify_motion(candidate: MotionFeature, vocab: MotionVocabulary,
                    tm: float = DEFAULT_TM) -> bool:
    """True iff the nearest motion word is farther than tm in 4D."""
    return bool(classify_motion_batch(
        np.array([candidate.vector], dtype=np.float64), vocab, tm)[0])


def classify_motion_batch(candidates: np.ndarray, vocab: MotionVocabulary,
                          tm: float = DEFAULT_TM) -> np.ndarray:
    if vocab.word_count == 0:
        raise ScoringError("cannot classify motion against an empty vocabulary")
    candidates = np.asarray(candidates, dtype=np.float64).reshape(-1, 4)
    if candidates.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    dists = cdist(candidates, vocab.words.astype(np.float64))
    return dists.min(axis=1) > tm


def write_motion_vocabulary(vocab: MotionVocabulary, path: Path | str) -> None:
    """Persist as motion.mvf: magic, u32 word count, per word 4 f32 + u32 votes."""
    parts = [MOTION_MAGIC, struct.pack("<I", vocab.word_count)]
    for row, votes in zip(vocab.words, vocab.votes):
        parts.append(struct.pack("<4fI", *(float(v) for v in row), int(votes)))
    Path(path).write_bytes(b"".join(parts))


def read_motion_vocabulary(path: Path | str) -> MotionVocabulary:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != MOTION_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    (count,) = struct.unpack_from("<I", data, 4)
    record = struct.calcsize("<4fI")
    expected = 8 + count * record
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    words = np.zeros((count, 4), dtype=np.float32)
    votes = np.zeros(count, dtype=np.uint32)
    for i in range(count):
        *row, v = struct.unpack_from("<4fI", data, 8 + i * record)
        words[i] = row
        votes[i] = v
    return MotionVocabulary(words=words, votes=votes)


def write_tracks_csv(tracks: list[Track], path: Path | str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACK_HEADER)
        for track in tracks:
            for frame_id, kp in track.observations:
                writer.writerow([track.track_id, frame_id, repr(kp.x), repr(kp.y)])


def read_tracks_csv(path: Path | str) -> list[Track]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRACK_HEADER:
            raise FormatError(f"{path}: expected header {TRACK_HEADER}, found {header}")
        rows: dict[int, list[tuple[int, Keypoint]]] = {}
        for row in reader:
            if len(row) != 4:
                raise FormatError(f"{path}: malformed row {row}")
            tid, fid = int(row[0]), int(row[1])
            rows.setdefault(tid, []).append((fid, Keypoint(float(row[2]), float(row[3]))))
    return [Track(track_id=tid, observations=tuple(obs)) for tid, obs in sorted(rows.items())]

"""Per-feature change likelihoods against a pool of retrieved references.

The pool is the union of the binarized feature sets of the top-R localized
reference frames. The plain criterion scores a query feature by its Hamming
distance to the nearest pool feature; the motion-weighted criterion restricts
to the K appearance-nearest candidates, hypothesizes the 4D motion implied by
each query-candidate keypoint pairing, and inflates candidates whose motion no
motion word explains. An anomalous query ego-motion disables the motion term.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigurationError, FormatError, ScoringError, ValidationError
from .features import BINARY, Frame, ViewSequenceMap
from .localization import BolcfIndex, LocalizationResult, localize
from .motion_prior import DEFAULT_TM, MotionVocabulary
from .vocabulary import ProjectionDictionary, Vocabulary, binarize_batch, hamming_to_pool

DEFAULT_TOP_K = 10

MOTION_TERM_LITERAL = "literal"
MOTION_TERM_SEPARATE = "separate"
MOTION_EVAL_PER_CANDIDATE = "per-candidate"
MOTION_EVAL_NEAREST_ONLY = "nearest-only"

CHANGES_HEADER = ["query_frame", "feature_id", "x", "y", "likelihood",
                  "matched_frame", "matched_feature", "anomaly_motion"]


@dataclass
class ReferencePool:
    """Binarized features of the retrieved references, with per-feature provenance."""

    frame_ids: np.ndarray    # (n,) int64, source frame per feature
    feature_ids: np.ndarray  # (n,) int64, feature id within its source frame
    keypoints: np.ndarray    # (n, 2) float64
    codes: np.ndarray        # (n, bits/8) uint8

    @property
    def size(self) -> int:
        return int(self.codes.shape[0])


@dataclass(frozen=True)
class ChangeScore:
    query_frame: int
    feature_id: int
    x: float
    y: float
    likelihood: float
    matched_frame: int
    matched_feature: int
    anomaly_motion: bool


def build_reference_pool(vmap: ViewSequenceMap, result: LocalizationResult,
                         proj: ProjectionDictionary | None) -> ReferencePool:
    """Union the localized frames' features, binarizing dense descriptors."""
    frame_ids: list[np.ndarray] = []
    feature_ids: list[np.ndarray] = []
    keypoints: list[np.ndarray] = []
    codes: list[np.ndarray] = []
    for frame_id in result.frame_ids:
        frame = vmap.frame(frame_id)
        if frame.n_features == 0:
            continue
        if frame.descriptor_kind == BINARY:
            frame_codes = frame.descriptors
        else:
            if proj is None:
                raise ConfigurationError("dense reference features need a projection dictionary")
            frame_codes = binarize_batch(frame.descriptors, proj)
        frame_ids.append(np.full(frame.n_features, frame_id, dtype=np.int64))
        feature_ids.append(np.arange(frame.n_features, dtype=np.int64))
        keypoints.append(frame.keypoints.astype(np.float64))
        codes.append(frame_codes)
    if not codes:
        return ReferencePool(frame_ids=np.zeros(0, dtype=np.int64),
                             feature_ids=np.zeros(0, dtype=np.int64),
                             keypoints=np.zeros((0, 2)),
                             codes=np.zeros((0, 0), dtype=np.uint8))
    return ReferencePool(frame_ids=np.concatenate(frame_ids),
                         feature_ids=np.concatenate(feature_ids),
                         keypoints=np.vstack(keypoints),
                         codes=np.vstack(codes))


def likelihood_eq1(query_code: np.ndarray, pool: ReferencePool) -> float:
    """Distance to the nearest pool feature: the min-min over references."""
    if pool.size == 0:
        raise ScoringError("reference pool is empty")
    return float(hamming_to_pool(query_code, pool.codes).min())


def _nearest_in_pool(query_code: np.ndarray, pool: ReferencePool) -> tuple[float, int]:
    dists = hamming_to_pool(query_code, pool.codes)
    order = np.lexsort((pool.feature_ids, pool.frame_ids, dists))
    best = int(order[0])
    return float(dists[best]), best


def likelihood_eq3(query_code: np.ndarray, query_xy: tuple[float, float],
                   pool: ReferencePool, motion_vocab: MotionVocabulary | None,
                   top_k: int = DEFAULT_TOP_K, tm: float = DEFAULT_TM,
                   query_anomaly_ego: bool = False,
                   motion_term: str = MOTION_TERM_LITERAL,
                   motion_eval: str = MOTION_EVAL_PER_CANDIDATE) -> tuple[float, int, bool]:
    """Motion-weighted score over the K appearance-nearest candidates.

    Returns (likelihood, pool position of the argmin candidate, whether that
    candidate's hypothesized motion was flagged anomalous).
    """
    if pool.size == 0:
        raise ScoringError("reference pool is empty")
    if top_k < 1:
        raise ValidationError(f"top_k must be >= 1, got {top_k}")
    if motion_term not in (MOTION_TERM_LITERAL, MOTION_TERM_SEPARATE):
        raise ConfigurationError(f"unknown motion_term {motion_term!r}")
    if motion_eval not in (MOTION_EVAL_PER_CANDIDATE, MOTION_EVAL_NEAREST_ONLY):
        raise ConfigurationError(f"unknown motion_eval {motion_eval!r}")
    if motion_vocab is None:
        raise ConfigurationError("motion scoring requires a motion vocabulary")

    dists = hamming_to_pool(query_code, pool.codes).astype(np.float64)
    order = np.lexsort((pool.feature_ids, pool.frame_ids, dists))
    cand = order[: min(top_k, pool.size)]

    # hypothesized motion of each pairing: query keypoint -> candidate keypoint
    qx, qy = query_xy
    vectors = np.column_stack([
        np.full(cand.size, qx), np.full(cand.size, qy),
        pool.keypoints[cand, 0], pool.keypoints[cand, 1],
    ])
    if query_anomaly_ego:
        flags = np.zeros(cand.size, dtype=bool)
        motion_dist = np.zeros(cand.size)
    else:
        word_dist = cdist(vectors, motion_vocab.words.astype(np.float64)).min(axis=1)
        flags = word_dist > tm
        if motion_eval == MOTION_EVAL_NEAREST_ONLY:
            flags = np.full(cand.size, flags[0])
            word_dist = np.full(cand.size, word_dist[0])
        motion_dist = word_dist

    if motion_term == MOTION_TERM_LITERAL:
        scores = (1.0 + flags.astype(np.float64)) * dists[cand]
    else:
        scores = dists[cand] + motion_dist

    pick = np.lexsort((pool.feature_ids[cand], pool.frame_ids[cand], scores))[0]
    return float(scores[pick]), int(cand[pick]), bool(flags[pick])


def detect_changes(query: Frame, vmap: ViewSequenceMap, index: BolcfIndex,
                   vocab: Vocabulary, proj: ProjectionDictionary,
                   motion_vocab: MotionVocabulary | None,
                   top_r: int = 10, top_k: int = DEFAULT_TOP_K, tm: float = DEFAULT_TM,
                   use_motion: bool = True, query_anomaly_ego: bool = False,
                   motion_term: str = MOTION_TERM_LITERAL,
                   motion_eval: str = MOTION_EVAL_PER_CANDIDATE,
                   localization: LocalizationResult | None = None) -> list[ChangeScore]:
    """Localize, pool the top-R references, and score every query feature."""
    result = localization if localization is not None else \
        localize(query, index, vocab, top_r=top_r)
    pool = build_reference_pool(vmap, result, proj)
    if pool.size == 0:
        raise ScoringError("localized references carry no features")
    query_codes = binarize_batch(query.descriptors, proj) if query.n_features else \
        np.zeros((0, proj.bits // 8), dtype=np.uint8)

    scores: list[ChangeScore] = []
    for i in range(query.n_features):
        x, y = (float(v) for v in query.keypoints[i])
        if use_motion:
            lik, pos, flag = likelihood_eq3(
                query_codes[i], (x, y), pool, motion_vocab,
                top_k=top_k, tm=tm, query_anomaly_ego=query_anomaly_ego,
                motion_term=motion_term, motion_eval=motion_eval)
        else:
            lik, pos = _nearest_in_pool(query_codes[i], pool)
            flag = False
        scores.append(ChangeScore(
            query_frame=query.frame_id, feature_id=i, x=x, y=y, likelihood=lik,
            matched_frame=int(pool.frame_ids[pos]),
            matched_feature=int(pool.feature_ids[pos]),
            anomaly_motion=flag))
    return scores


def write_changes_csv(scores: list[ChangeScore], path: Path | str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CHANGES_HEADER)
        for s in scores:
            writer.writerow([s.query_frame, s.feature_id, repr(s.x), repr(s.y),
                             repr(s.likelihood), s.matched_frame, s.matched_feature,
                             int(s.anomaly_motion)])


def read_changes_csv(path: Path | str) -> list[ChangeScore]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CHANGES_HEADER:
            raise FormatError(f"{path}: expected header {CHANGES_HEADER}, found {header}")
        out = []
        for row in reader:
            if len(row) != len(CHANGES_HEADER):
                raise FormatError(f"{path}: malformed row {row}")
            out.append(ChangeScore(
                query_frame=int(row[0]), feature_id=int(row[1]),
                x=float(row[2]), y=float(row[3]), likelihood=float(row[4]),
                matched_frame=int(row[5]), matched_feature=int(row[6]),
                anomaly_motion=bool(int(row[7]))))
    return out

"""End-to-end orchestration shared by the CLI and the experiment harness.

Models are learned once per map; each query is then scored against the index
restricted by the timestamp-exclusion protocol, so retrieval can never lean on
temporal adjacency to the query.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .change_detection import ChangeScore, detect_changes
from .config import RunConfig
from .errors import PairingError
from .features import Frame, OdometryPose, ViewSequenceMap
from .localization import BolcfIndex, LocalizationResult, build_index, localize
from .motion_prior import (MotionVocabulary, Track, anomaly_frame_ids,
                           detect_anomaly_ego_motion, extract_motion_features,
                           learn_motion_vocabulary, select_keyframes)
from .vocabulary import ProjectionDictionary, Vocabulary, learn_vocabulary

import numpy as np


@dataclass
class Models:
    vocab: Vocabulary
    proj: ProjectionDictionary
    motion_vocab: MotionVocabulary | None
    anomaly_frames: set[int]


def learn_models(vmap: ViewSequenceMap, tracks: list[Track], config: RunConfig,
                 vocab_train_stride: int = 1) -> Models:
    """Visual vocabulary, projection dictionary, and motion words for one map."""
    training = np.vstack([f.descriptors for f in vmap.frames[::vocab_train_stride]
                          if f.n_features])
    vocab = learn_vocabulary(training, config.word_count, seed=config.seed)
    proj = ProjectionDictionary(seed=config.seed, bits=config.bits, input_dim=vmap.dim)

    anomaly: set[int] = set()
    if len(vmap.poses) >= config.window_length:
        anomaly = anomaly_frame_ids(
            detect_anomaly_ego_motion(vmap.poses, config.window_length, config.tc))
    motion_vocab = None
    if config.use_motion and tracks:
        features = extract_motion_features(tracks, vmap.poses, config.unit_length,
                                           anomaly_frames=anomaly)
        if len(features) >= 2:
            motion_vocab = learn_motion_vocabulary(
                features, sample_size=config.motion_sample_size,
                iterations=config.motion_iterations,
                output_words=config.motion_words, seed=config.seed)
    return Models(vocab=vocab, proj=proj, motion_vocab=motion_vocab,
                  anomaly_frames=anomaly)


def build_map_index(vmap: ViewSequenceMap, models: Models, config: RunConfig) -> BolcfIndex:
    if config.keyframes_only and not vmap.keyframe_ids:
        vmap = ViewSequenceMap(
            frames=vmap.frames, poses=vmap.poses,
            keyframe_ids=set(select_keyframes(vmap.frame_ids, config.stride)))
    return build_index(vmap, models.vocab, keyframes_only=config.keyframes_only)


def restrict_index(index: BolcfIndex, query_timestamp: int, exclusion: int) -> BolcfIndex:
    """Index view minus frames inside the exclusion window (timestamp == frame id)."""
    keep = [pos for pos, fid in enumerate(index.frame_ids)
            if abs(fid - query_timestamp) >= exclusion]
    if not keep:
        raise PairingError(
            f"exclusion {exclusion} around timestamp {query_timestamp} removes "
            "every indexed frame")
    return BolcfIndex(frame_ids=[index.frame_ids[p] for p in keep],
                      word_sets=[index.word_sets[p] for p in keep],
                      word_count=index.word_count)


@dataclass
class QueryResult:
    scores: list[ChangeScore]
    localization: LocalizationResult


def score_query(query: Frame, vmap: ViewSequenceMap, index: BolcfIndex,
                models: Models, config: RunConfig,
                query_anomaly: bool = False) -> QueryResult:
    paired = restrict_index(index, query.timestamp_index, config.exclusion)
    result = localize(query, paired, models.vocab, top_r=config.top_r)
    scores = detect_changes(
        query, vmap, paired, models.vocab, models.proj, models.motion_vocab,
        top_r=config.top_r, top_k=config.top_k, tm=config.tm,
        use_motion=config.use_motion and models.motion_vocab is not None,
        query_anomaly_ego=query_anomaly, motion_term=config.motion_term,
        motion_eval=config.motion_eval, localization=result)
    return QueryResult(scores=scores, localization=result)


def localization_error(result: LocalizationResult, query_pose: OdometryPose,
                       vmap: ViewSequenceMap) -> float:
    """Meters between the query pose and the top-ranked frame's pose."""
    top_pose = vmap.pose(result.top[0])
    return math.hypot(top_pose.x - query_pose.x, top_pose.y - query_pose.y)

"""Map-relative viewpoint localization over the BoLCF index.

Each mapped frame is reduced to its set of visual word ids; a query frame is
ranked against reference frames by the asymmetric NBNN distance: the sum over
query features of the Euclidean distance to the nearest referenced word
exemplar. The exact path scores every indexed frame; an optional inverted-file
shortlist (frames sharing at least one word with the query) re-ranks exactly
and must agree with the exact path whenever it is non-degenerate.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import FormatError, RetrievalError, ValidationError
from .features import DENSE, Frame, ViewSequenceMap
from .vocabulary import Vocabulary, quantize_batch

INDEX_MAGIC = b"BIF1"

DEFAULT_TOP_R = 10


@dataclass
class BolcfIndex:
    """Per-frame word sets (unique, ascending ids) over a vocabulary."""

    frame_ids: list[int]
    word_sets: list[np.ndarray]
    word_count: int

    def __post_init__(self) -> None:
        if len(self.frame_ids) != len(self.word_sets):
            raise ValidationError("frame id and word set counts differ")
        for frame_id, words in zip(self.frame_ids, self.word_sets):
            if words.size and int(words.max()) >= self.word_count:
                raise ValidationError(
                    f"frame {frame_id}: word id {int(words.max())} outside vocabulary "
                    f"of {self.word_count} words"
                )

    @property
    def n_frames(self) -> int:
        return len(self.frame_ids)

    def inverted(self) -> dict[int, list[int]]:
        """word id -> positions of frames containing it (built on demand)."""
        table: dict[int, list[int]] = {}
        for pos, words in enumerate(self.word_sets):
            for w in words.tolist():
                table.setdefault(w, []).append(pos)
        return table


@dataclass
class LocalizationResult:
    """Top-R frames, ascending NBNN distance, frame-id ties ascending."""

    ranked: list[tuple[int, float]] = field(default_factory=list)

    @property
    def frame_ids(self) -> list[int]:
        return [f for f, _ in self.ranked]

    @property
    def top(self) -> tuple[int, float]:
        return self.ranked[0]


def build_index(vmap: ViewSequenceMap, vocab: Vocabulary, keyframes_only: bool = False) -> BolcfIndex:
    """Quantize every selected frame to its word set."""
    frame_ids = []
    word_sets = []
    for frame in vmap.frames:
        if keyframes_only and frame.frame_id not in vmap.keyframe_ids:
            continue
        if frame.descriptor_kind != DENSE:
            raise ValidationError(f"frame {frame.frame_id}: index requires dense descriptors")
        words = quantize_batch(frame.descriptors, vocab)
        frame_ids.append(frame.frame_id)
        word_sets.append(np.unique(words).astype(np.uint32))
    return BolcfIndex(frame_ids=frame_ids, word_sets=word_sets, word_count=vocab.word_count)


def nbnn_distance(query: Frame, reference_words: np.ndarray, vocab: Vocabulary) -> float:
    """Sum over query features of the distance to the nearest referenced exemplar."""
    words = np.asarray(reference_words)
    if words.size == 0:
        raise RetrievalError("reference word set is empty: NBNN distance undefined")
    if query.n_features == 0:
        return 0.0
    if query.descriptor_kind != DENSE or query.dim != vocab.dim:
        raise ValidationError(
            f"query frame {query.frame_id}: descriptors incompatible with vocabulary "
            f"(kind {query.descriptor_kind}, dim {query.dim} vs {vocab.dim})"
        )
    exemplars = vocab.exemplars[words.astype(np.int64)].astype(np.float64)
    dists = cdist(query.descriptors.astype(np.float64), exemplars)
    return float(dists.min(axis=1).sum())


def localize(query: Frame, index: BolcfIndex, vocab: Vocabulary, top_r: int = DEFAULT_TOP_R,
             shortlist: bool = False) -> LocalizationResult:
    """Rank indexed frames by NBNN distance and return the best top_r."""
    if top_r < 1:
        raise ValidationError(f"top_r must be >= 1, got {top_r}")
    if index.n_frames == 0:
        raise RetrievalError("cannot localize against an empty index")

    positions = range(index.n_frames)
    if shortlist:
        query_words = set(np.unique(quantize_batch(query.descriptors, vocab)).tolist()) \
            if query.n_features else set()
        table = index.inverted()
        hit = sorted({pos for w in query_words for pos in table.get(w, ())})
        # degenerate shortlist (too few sharing frames) falls back to the exact path
        if len(hit) >= min(top_r, index.n_frames):
            positions = hit

    scored = []
    for pos in positions:
        # a frame that referenced no words can never be matched; leave it unranked
        if index.word_sets[pos].size == 0:
            continue
        d = nbnn_distance(query, index.word_sets[pos], vocab)
        scored.append((index.frame_ids[pos], d))
    if not scored:
        raise RetrievalError("no indexed frame references any word")
    scored.sort(key=lambda t: (t[1], t[0]))
    return LocalizationResult(ranked=scored[:top_r])


def write_index(index: BolcfIndex, path: Path | str) -> None:
    """Persist as index.bif: magic, u32 frame count, per frame id/word-count/words (u32 LE)."""
    parts = [INDEX_MAGIC, struct.pack("<I", index.n_frames)]
    for frame_id, words in zip(index.frame_ids, index.word_sets):
        parts.append(struct.pack("<II", frame_id, words.size))
        parts.append(np.ascontiguousarray(words, dtype="<u4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_index(path: Path | str, word_count: int) -> BolcfIndex:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != INDEX_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    (n_frames,) = struct.unpack_from("<I", data, 4)
    offset = 8
    frame_ids = []
    word_sets = []
    for _ in range(n_frames):
        if offset + 8 > len(data):
            raise FormatError(f"{path}: truncated frame header")
        frame_id, n_words = struct.unpack_from("<II", data, offset)
        offset += 8
        end = offset + 4 * n_words
        if end > len(data):
            raise FormatError(f"{path}: truncated word list for frame {frame_id}")
        words = np.frombuffer(data, dtype="<u4", count=n_words, offset=offset).astype(np.uint32)
        offset = end
        frame_ids.append(frame_id)
        word_sets.append(words)
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes")
    return BolcfIndex(frame_ids=frame_ids, word_sets=word_sets, word_count=word_count)

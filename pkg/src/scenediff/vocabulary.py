"""Appearance priors: a fine visual vocabulary and a random-projection binarizer.

The vocabulary maps dense descriptors to word ids by nearest centroid and keeps
one exemplar (the nearest training descriptor, a medoid) per word for the
asymmetric NBNN distance. The binarizer turns dense descriptors into packed
B-bit sign codes for Hamming-distance change scoring.

All randomness flows through numpy's PCG64 generator seeded explicitly, so
learning and binarization are bit-reproducible. Distance kernels avoid
threaded BLAS reductions to keep results independent of worker counts.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from .errors import FormatError, LearningError, ValidationError

KMEANS_MAX_ITER = 100
KMEANS_REL_TOL = 1e-4

VOCAB_MAGIC = b"VVF1"


@dataclass
class Vocabulary:
    """Visual words: centroids (K, D), one exemplar descriptor per word."""

    centroids: np.ndarray
    exemplars: np.ndarray

    @property
    def word_count(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[1])

    @property
    def word_bits(self) -> int:
        # ceil(log2(word_count)); 0 for a single-word vocabulary
        return (self.word_count - 1).bit_length() if self.word_count else 0

    def __post_init__(self) -> None:
        if self.centroids.shape != self.exemplars.shape:
            raise ValidationError("centroids and exemplars must have identical shapes")


@dataclass
class ProjectionDictionary:
    """Seeded random hyperplanes; fully determined by (seed, bits, input_dim).

    Rows are drawn i.i.d. standard normal from numpy's PCG64 generator,
    filled row-major, so regeneration is bit-identical for the same triple.
    """

    seed: int
    bits: int
    input_dim: int
    rows: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.bits <= 0 or self.bits % 8:
            raise ValidationError(f"projection bits must be a positive byte multiple, got {self.bits}")
        if self.input_dim <= 0:
            raise ValidationError(f"projection input_dim must be positive, got {self.input_dim}")
        rng = np.random.Generator(np.random.PCG64(self.seed))
        self.rows = rng.standard_normal((self.bits, self.input_dim))


def learn_vocabulary(training_features: np.ndarray, word_count: int, seed: int) -> Vocabulary:
    """Cluster training descriptors into word_count centroids.

    k-means with k-means++ seeding from the given seed, Lloyd iterations until
    the largest relative centroid shift drops below 1e-4 or 100 iterations.
    Exemplars are the training descriptors nearest each centroid (ties to the
    smaller training index). Deterministic for a fixed seed.
    """
    data = np.asarray(training_features, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise LearningError("training features must be a non-empty (N, D) array")
    if word_count < 1:
        raise LearningError(f"word_count must be >= 1, got {word_count}")
    n_distinct = np.unique(data, axis=0).shape[0]
    if word_count > n_distinct:
        raise LearningError(
            f"word_count {word_count} exceeds {n_distinct} distinct training features"
        )

    rng = np.random.Generator(np.random.PCG64(seed))
    centroids = _kmeans_pp_init(data, word_count, rng)

    for _ in range(KMEANS_MAX_ITER):
        assign = _nearest_centroid(data, centroids)
        new_centroids = centroids.copy()
        counts = np.bincount(assign, minlength=word_count)
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, data)
        occupied = counts > 0
        new_centroids[occupied] = sums[occupied] / counts[occupied, None]
        shift = np.linalg.norm(new_centroids - centroids, axis=1)
        scale = np.linalg.norm(centroids, axis=1) + 1e-12
        centroids = new_centroids
        if np.max(shift / scale) <= KMEANS_REL_TOL:
            break

    dists = cdist(centroids, data, "sqeuclidean")
    exemplar_idx = np.argmin(dists, axis=1)
    centroids32 = centroids.astype(np.float32)
    exemplars32 = data[exemplar_idx].astype(np.float32)
    return Vocabulary(centroids=centroids32, exemplars=exemplars32)


def _kmeans_pp_init(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = data.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = cdist(data, data[chosen[0]][None, :], "sqeuclidean")[:, 0]
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass on already-chosen locations; cannot happen when
            # k <= number of distinct points, guarded by the caller
            raise LearningError("degenerate k-means++ seeding: no remaining spread")
        chosen[i] = rng.choice(n, p=d2 / total)
        d2 = np.minimum(d2, cdist(data, data[chosen[i]][None, :], "sqeuclidean")[:, 0])
    return data[chosen].copy()


def _nearest_centroid(data: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return np.argmin(cdist(data, centroids, "sqeuclidean"), axis=1)


def quantize(descriptor: np.ndarray, vocab: Vocabulary) -> int:
    """Word id of the nearest centroid (Euclidean); ties go to the smaller id."""
    return int(quantize_batch(np.asarray(descriptor)[None, :], vocab)[0])


def quantize_batch(descriptors: np.ndarray, vocab: Vocabulary) -> np.ndarray:
    """Vectorized quantize over an (N, D) array, same tie rule per row."""
    desc = np.asarray(descriptors, dtype=np.float64)
    if desc.ndim != 2 or desc.shape[1] != vocab.dim:
        raise ValidationError(
            f"descriptor dimension {desc.shape[-1] if desc.ndim else '?'} "
            f"does not match vocabulary dim {vocab.dim}"
        )
    if desc.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return np.argmin(cdist(desc, vocab.centroids.astype(np.float64), "sqeuclidean"), axis=1)


def exemplar_of(word: int, vocab: Vocabulary) -> np.ndarray:
    """The stored exemplar descriptor for a word id."""
    if not 0 <= word < vocab.word_count:
        raise ValidationError(f"word id {word} out of range [0, {vocab.word_count})")
    return vocab.exemplars[word]


def binarize(descriptor: np.ndarray, proj: ProjectionDictionary) -> np.ndarray:
    """Packed sign code: bit i set iff row_i . descriptor > 0 (exact zero -> 0)."""
    return binarize_batch(np.asarray(descriptor)[None, :], proj)[0]


def binarize_batch(descriptors: np.ndarray, proj: ProjectionDictionary) -> np.ndarray:
    """Vectorized binarize over (N, D) -> (N, bits / 8) uint8, MSB-first bits."""
    desc = np.asarray(descriptors, dtype=np.float64)
    if desc.ndim != 2 or desc.shape[1] != proj.input_dim:
        raise ValidationError(
            f"descriptor dimension {desc.shape[-1] if desc.ndim else '?'} "
            f"does not match projection input_dim {proj.input_dim}"
        )
    # einsum keeps the reduction single-threaded and order-fixed, so codes do
    # not depend on BLAS thread count
    dots = np.einsum("nd,bd->nb", desc, proj.rows)
    return np.packbits(dots > 0.0, axis=1)


def hamming_distance(code_a: np.ndarray, code_b: np.ndarray) -> int:
    """Hamming distance between two packed codes of equal byte width."""
    a = np.asarray(code_a, dtype=np.uint8)
    b = np.asarray(code_b, dtype=np.uint8)
    if a.shape != b.shape:
        raise ValidationError(f"code widths differ: {a.shape} vs {b.shape}")
    return int(_POPCOUNT[np.bitwise_xor(a, b)].sum())


def hamming_to_pool(code: np.ndarray, pool_codes: np.ndarray) -> np.ndarray:
    """Hamming distances from one packed code to each row of (M, nbytes)."""
    code = np.asarray(code, dtype=np.uint8)
    pool = np.asarray(pool_codes, dtype=np.uint8)
    if pool.ndim != 2 or pool.shape[1] != code.shape[0]:
        raise ValidationError(f"pool code width {pool.shape} does not match query {code.shape}")
    return _POPCOUNT[np.bitwise_xor(pool, code[None, :])].sum(axis=1).astype(np.int64)


_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


def write_vocabulary(vocab: Vocabulary, path: Path | str) -> None:
    """Persist as vocab.vvf: magic, u32 word count, u32 dim, centroids, exemplars (f32 LE)."""
    parts = [
        VOCAB_MAGIC,
        struct.pack("<II", vocab.word_count, vocab.dim),
        np.ascontiguousarray(vocab.centroids, dtype="<f4").tobytes(),
        np.ascontiguousarray(vocab.exemplars, dtype="<f4").tobytes(),
    ]
    Path(path).write_bytes(b"".join(parts))


def read_vocabulary(path: Path | str) -> Vocabulary:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != VOCAB_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    count, dim = struct.unpack_from("<II", data, 4)
    expected = 12 + 2 * count * dim * 4
    if len(data) != expected:
        raise FormatError(f"{path}: size {len(data)} != expected {expected}")
    flat = np.frombuffer(data, dtype="<f4", offset=12)
    centroids = flat[: count * dim].reshape(count, dim).astype(np.float32)
    exemplars = flat[count * dim:].reshape(count, dim).astype(np.float32)
    return Vocabulary(centroids=centroids, exemplars=exemplars)

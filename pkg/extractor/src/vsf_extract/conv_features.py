"""Dense grid descriptors from a fixed two-layer convolutional filter bank.

The bank is hand-built (oriented Gaussian derivatives) with a seeded random
mixing layer, so extraction needs no downloaded weights and is bit-stable for
a given profile. The output contract is only the grid shape and descriptor
length; the store manifest records both.
"""

from __future__ import annotations

import functools
import math

import numpy as np
from scipy import ndimage

from .profiles import ExtractionProfile

MIXING_SEED = 8211
KERNEL_SIZE = 7
KERNEL_SIGMA = 1.4
ORIENTATIONS = (0.0, math.pi / 4.0, math.pi / 2.0, 3.0 * math.pi / 4.0)


@functools.lru_cache(maxsize=1)
def _filter_bank() -> np.ndarray:
    """(8, K, K) unit-norm kernels: first and second Gaussian derivatives."""
    half = KERNEL_SIZE // 2
    ys, xs = np.mgrid[-half:half + 1, -half:half + 1].astype(np.float64)
    envelope = np.exp(-(xs ** 2 + ys ** 2) / (2.0 * KERNEL_SIGMA ** 2))
    kernels = []
    for theta in ORIENTATIONS:
        u = xs * math.cos(theta) + ys * math.sin(theta)
        for profile in (u, u ** 2 - KERNEL_SIGMA ** 2):
            k = profile * envelope
            k -= k.mean()
            kernels.append(k / np.linalg.norm(k))
    return np.stack(kernels)


@functools.lru_cache(maxsize=8)
def _mixing_weights(dim: int) -> np.ndarray:
    """(dim, 16, 3, 3) seeded mixing filters over the 16 rectified maps."""
    rng = np.random.Generator(np.random.PCG64(MIXING_SEED))
    return rng.standard_normal((dim, 16, 3, 3)) / math.sqrt(16.0 * 9.0)


def _resize_bilinear(image: np.ndarray, side: int) -> np.ndarray:
    """Square bilinear resample with pixel-center alignment."""
    h, w = image.shape
    ys = (np.arange(side) + 0.5) * h / side - 0.5
    xs = (np.arange(side) + 0.5) * w / side - 0.5
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    top = image[y0[:, None], x0[None, :]] * (1.0 - wx) + image[y0[:, None], x1[None, :]] * wx
    bot = image[y1[:, None], x0[None, :]] * (1.0 - wx) + image[y1[:, None], x1[None, :]] * wx
    return top * (1.0 - wy) + bot * wy


def _second_layer(pooled: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """3x3 mixing convolution over channel maps, reflect-padded."""
    padded = np.pad(pooled, ((0, 0), (1, 1), (1, 1)), mode="reflect")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (3, 3), axis=(1, 2))
    return np.einsum("kijab,ckab->cij", windows, weights, optimize=True)


def conv_grid_features(image: np.ndarray, profile: ExtractionProfile,
                       width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """grid*grid keypoints (native pixels) and unit-norm descriptors.

    Cells are emitted row-major (top row first), each keypoint at its cell
    center in the original image coordinates.
    """
    side = profile.conv_side
    resized = _resize_bilinear(image, side)

    bank = _filter_bank()
    responses = np.stack([ndimage.correlate(resized, k, mode="reflect")
                          for k in bank])
    rectified = np.concatenate([np.maximum(responses, 0.0),
                                np.maximum(-responses, 0.0)])

    half = side // 2
    pooled = rectified.reshape(16, half, 2, half, 2).mean(axis=(2, 4))
    mixed = np.maximum(_second_layer(pooled, _mixing_weights(profile.dim)), 0.0)

    cell = half // profile.grid
    cells = mixed.reshape(profile.dim, profile.grid, cell, profile.grid, cell)
    grid = cells.mean(axis=(2, 4))                       # (dim, grid, grid)
    descriptors = grid.transpose(1, 2, 0).reshape(profile.cells, profile.dim)
    norms = np.linalg.norm(descriptors, axis=1, keepdims=True) + 1e-12
    descriptors = (descriptors / norms).astype(np.float32)

    rows, cols = np.divmod(np.arange(profile.cells), profile.grid)
    keypoints = np.column_stack([
        (cols + 0.5) * width / profile.grid,
        (rows + 0.5) * height / profile.grid,
    ]).astype(np.float32)
    return keypoints, descriptors

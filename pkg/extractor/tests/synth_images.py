"""Deterministic synthetic test images."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage


def textured_scene(seed: int, height: int = 120, width: int = 160) -> np.ndarray:
    """Smooth noise with hard-edged patches, as uint8 grayscale."""
    rng = np.random.default_rng(seed)
    canvas = ndimage.gaussian_filter(rng.uniform(0.0, 1.0, (height, width)), 2.0)
    canvas = (canvas - canvas.min()) / (np.ptp(canvas) + 1e-9)
    for _ in range(12):
        y = int(rng.integers(10, height - 20))
        x = int(rng.integers(10, width - 20))
        canvas[y:y + 8, x:x + 8] = rng.uniform(0.0, 1.0)
    return np.clip(canvas * 255.0, 0, 255).astype(np.uint8)


def write_sequence(directory: Path, count: int, seed: int = 0) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        path = directory / f"frame_{i:03d}.png"
        Image.fromarray(textured_scene(seed + i)).save(path)
        paths.append(path)
    return paths


def write_shift_pair(directory: Path, shift: int = 5, seed: int = 99) -> None:
    """Two crops of one wide scene; content moves +shift px in x from a to b."""
    directory.mkdir(parents=True, exist_ok=True)
    wide = textured_scene(seed, 120, 160 + shift)
    Image.fromarray(wide[:, shift:160 + shift]).save(directory / "a.png")
    Image.fromarray(wide[:, 0:160]).save(directory / "b.png")

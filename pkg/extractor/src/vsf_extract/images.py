"""Image listing and grayscale loading.

Frame order is the sorted filename order of the image directory; a file that
cannot be decoded keeps its position in that order (later frames do not shift
down), it just contributes no frame.
"""

from __future__ import annotations

import logging
import warnings
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ExtractionFailure

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".ppm", ".pgm"}


def list_image_files(directory: Path | str) -> list[Path]:
    """Image files under directory, sorted by filename."""
    root = Path(directory)
    if not root.is_dir():
        raise ExtractionFailure(f"{root} is not a directory")
    return sorted(p for p in root.iterdir()
                  if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def load_grayscale(path: Path) -> np.ndarray | None:
    """Image as float64 grayscale in [0, 1]; None when it cannot be decoded."""
    try:
        with Image.open(path) as img:
            gray = img.convert("L")
            return np.asarray(gray, dtype=np.float64) / 255.0
    except Exception as exc:  # PIL raises a mix of OSError subclasses
        message = f"skipping unreadable image {path}: {exc}"
        logger.warning(message)
        warnings.warn(message, stacklevel=2)
        return None


def load_sequence(directory: Path | str) -> list[tuple[int, Path, np.ndarray]]:
    """(frame_id, path, grayscale) for every decodable image, in frame order."""
    files = list_image_files(directory)
    loaded = []
    for position, path in enumerate(files):
        image = load_grayscale(path)
        if image is not None and image.size:
            loaded.append((position, path, image))
    return loaded

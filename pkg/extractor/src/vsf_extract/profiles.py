"""Extraction profiles: what kind of features to emit and at what shape."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ProfileError

MODE_CONV_GRID = "conv_grid"
MODE_KEYPOINT_SIFT = "keypoint_sift"
MODES = (MODE_CONV_GRID, MODE_KEYPOINT_SIFT)

RESIZE_SQUARE = "square"

SIFT_DIM = 128

# conv_grid works on a square resample of grid * CELL_PIXELS pixels per side
CELL_PIXELS = 16


@dataclass(frozen=True)
class ExtractionProfile:
    """How a sequence of images turns into per-frame feature sets.

    conv_grid covers each image with a grid x grid arrangement of pooled
    filter-bank descriptors of length dim; keypoint_sift detects corners and
    describes them with 128-dim gradient histograms (dim is ignored there).
    """

    mode: str = MODE_CONV_GRID
    grid: int = 13
    dim: int = 32
    resize: str = RESIZE_SQUARE
    max_keypoints: int = 500

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ProfileError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.grid < 1:
            raise ProfileError(f"grid must be >= 1, got {self.grid}")
        if self.dim < 1:
            raise ProfileError(f"dim must be >= 1, got {self.dim}")
        if self.resize != RESIZE_SQUARE:
            raise ProfileError(f"unknown resize policy {self.resize!r}")
        if self.max_keypoints < 1:
            raise ProfileError(f"max_keypoints must be >= 1, got {self.max_keypoints}")

    @property
    def cells(self) -> int:
        return self.grid * self.grid

    @property
    def descriptor_dim(self) -> int:
        return SIFT_DIM if self.mode == MODE_KEYPOINT_SIFT else self.dim

    @property
    def conv_side(self) -> int:
        return self.grid * CELL_PIXELS

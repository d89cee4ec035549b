"""Real-image feature export into VSF interchange stores.

Two extraction modes cover the interchange contract: conv_grid tiles each
image with a fixed grid of filter-bank descriptors, keypoint_sift detects
corners and describes them with gradient histograms. A separate tracker
follows keypoints between adjacent frames into a tracks CSV.
"""

from .errors import ExtractError, ExtractionFailure, ProfileError
from .extract import extract_frame, extract_sequence
from .images import list_image_files, load_grayscale, load_sequence
from .profiles import (MODE_CONV_GRID, MODE_KEYPOINT_SIFT, MODES, SIFT_DIM,
                       ExtractionProfile)
from .store_writer import ExtractedFrame, write_store
from .tracking import TRACK_HEADER, track_sequence

__all__ = [
    "ExtractError",
    "ExtractedFrame",
    "ExtractionFailure",
    "ExtractionProfile",
    "MODES",
    "MODE_CONV_GRID",
    "MODE_KEYPOINT_SIFT",
    "ProfileError",
    "SIFT_DIM",
    "TRACK_HEADER",
    "extract_frame",
    "extract_sequence",
    "list_image_files",
    "load_grayscale",
    "load_sequence",
    "track_sequence",
    "write_store",
]

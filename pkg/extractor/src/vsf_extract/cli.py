"""Command line entry points: vsf-extract and vsf-track."""

from __future__ import annotations

import argparse
import sys

from .errors import ExtractError
from .extract import extract_sequence
from .profiles import MODES, ExtractionProfile
from .tracking import MAX_CORNERS, track_sequence


def main_extract(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="vsf-extract",
        description="Extract per-frame features from an image directory "
                    "into a VSF store")
    parser.add_argument("--images", required=True, help="image directory")
    parser.add_argument("--mode", choices=MODES, default="conv_grid")
    parser.add_argument("--out", required=True, help="output store directory")
    parser.add_argument("--grid", type=int, default=13,
                        help="cells per side in conv_grid mode")
    parser.add_argument("--dim", type=int, default=32,
                        help="descriptor length in conv_grid mode")
    parser.add_argument("--max-keypoints", type=int, default=500,
                        help="detection cap in keypoint_sift mode")
    args = parser.parse_args(argv)
    try:
        profile = ExtractionProfile(mode=args.mode, grid=args.grid,
                                    dim=args.dim,
                                    max_keypoints=args.max_keypoints)
        count = extract_sequence(args.images, profile, args.out)
    except (ExtractError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} frames to {args.out}")
    return 0


def main_track(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="vsf-track",
        description="Track keypoints across an image sequence into a CSV")
    parser.add_argument("--images", required=True, help="image directory")
    parser.add_argument("--out", required=True, help="output tracks CSV path")
    parser.add_argument("--max-corners", type=int, default=MAX_CORNERS)
    args = parser.parse_args(argv)
    try:
        count = track_sequence(args.images, args.out, max_corners=args.max_corners)
    except (ExtractError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} tracks to {args.out}")
    return 0


def extract_entry() -> None:
    raise SystemExit(main_extract())


def track_entry() -> None:
    raise SystemExit(main_track())

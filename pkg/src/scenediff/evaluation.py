"""Test pairing under viewpoint uncertainty and the global rank metric.

A query is paired against the map with every frame whose timestamp lies within
the exclusion window removed, so localization cannot fall back on temporal
adjacency. Scores from all queries are merged into one descending-likelihood
ranking; each ground-truth box is judged by the rank of its best-scoring
feature, and two methods are compared by the fraction of boxes one ranks
strictly better.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .change_detection import ChangeScore
from .errors import FormatError, PairingError, ValidationError
from .features import ViewSequenceMap

DEFAULT_EXCLUSION = 400

GT_HEADER = ["query_frame", "x0", "y0", "x1", "y1"]
REPORT_HEADER = ["query_frame", "x0", "y0", "x1", "y1", "best_rank", "in_box_features"]
PLOT_DATA_HEADER = ["query_frame", "best_rank", "localization_error"]


@dataclass(frozen=True)
class GroundTruthBox:
    """Axis-aligned changed-object box, inclusive-exclusive in both axes."""

    query_frame: int
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValidationError(
                f"box for query {self.query_frame}: need x0 < x1 and y0 < y1, "
                f"got ({self.x0}, {self.y0}, {self.x1}, {self.y1})")

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1


@dataclass(frozen=True)
class BoxRank:
    box: GroundTruthBox
    rank: int | None               # None: no feature keypoint inside the box
    in_box_ranks: tuple[int, ...]  # all in-box ranks, ascending

    @property
    def covered(self) -> bool:
        return self.rank is not None


@dataclass
class RankReport:
    boxes: list[BoxRank]
    total_features: int

    @property
    def covered_count(self) -> int:
        return sum(1 for b in self.boxes if b.covered)

    def per_query_best_rank(self) -> dict[int, int]:
        """Best covered rank per query frame."""
        best: dict[int, int] = {}
        for b in self.boxes:
            if b.rank is None:
                continue
            q = b.box.query_frame
            if q not in best or b.rank < best[q]:
                best[q] = b.rank
        return best


@dataclass(frozen=True)
class ComparisonResult:
    wins: int
    losses: int
    ties: int
    fraction: float
    per_box: tuple[tuple[float, float], ...]  # (rank_a, rank_b), inf when uncovered


def build_test_pairing(full_map: ViewSequenceMap, query_timestamp: int,
                       exclusion: int = DEFAULT_EXCLUSION) -> ViewSequenceMap:
    """Remove every frame within the exclusion window of the query timestamp."""
    if exclusion < 0:
        raise ValidationError(f"exclusion must be >= 0, got {exclusion}")
    kept = [f for f in full_map.frames
            if abs(f.timestamp_index - query_timestamp) >= exclusion]
    if not kept:
        raise PairingError(
            f"exclusion {exclusion} around timestamp {query_timestamp} removes "
            "every frame; query is unusable against this map")
    kept_ids = {f.frame_id for f in kept}
    return ViewSequenceMap(
        frames=kept,
        poses=[p for p in full_map.poses if p.frame_id in kept_ids],
        keyframe_ids=full_map.keyframe_ids & kept_ids)


def rank_changed_features(all_scores: list[ChangeScore],
                          boxes: list[GroundTruthBox]) -> RankReport:
    """Merge and rank all scores, then read off each box's best in-box rank."""
    scored_queries = {s.query_frame for s in all_scores}
    for box in boxes:
        if box.query_frame not in scored_queries:
            raise ValidationError(f"no scores for box query frame {box.query_frame}")

    likelihood = np.array([s.likelihood for s in all_scores], dtype=np.float64)
    query_ids = np.array([s.query_frame for s in all_scores], dtype=np.int64)
    feature_ids = np.array([s.feature_id for s in all_scores], dtype=np.int64)
    # descending likelihood; ties ascending (query frame, feature id)
    order = np.lexsort((feature_ids, query_ids, -likelihood))
    rank_of = np.empty(len(all_scores), dtype=np.int64)
    rank_of[order] = np.arange(1, len(all_scores) + 1)

    xs = np.array([s.x for s in all_scores])
    ys = np.array([s.y for s in all_scores])
    box_ranks: list[BoxRank] = []
    for box in boxes:
        inside = ((query_ids == box.query_frame)
                  & (xs >= box.x0) & (xs < box.x1)
                  & (ys >= box.y0) & (ys < box.y1))
        ranks = tuple(sorted(int(r) for r in rank_of[inside]))
        box_ranks.append(BoxRank(box=box, rank=ranks[0] if ranks else None,
                                 in_box_ranks=ranks))
    return RankReport(boxes=box_ranks, total_features=len(all_scores))


def compare_methods(report_a: RankReport, report_b: RankReport) -> ComparisonResult:
    """Fraction of boxes where report_a ranks strictly better; ties count to neither."""
    if [b.box for b in report_a.boxes] != [b.box for b in report_b.boxes]:
        raise ValidationError("reports cover different box sets")
    if not report_a.boxes:
        raise ValidationError("cannot compare empty reports")
    per_box = []
    wins = losses = ties = 0
    for ra, rb in zip(report_a.boxes, report_b.boxes):
        a = float(ra.rank) if ra.rank is not None else math.inf
        b = float(rb.rank) if rb.rank is not None else math.inf
        per_box.append((a, b))
        if a < b:
            wins += 1
        elif b < a:
            losses += 1
        else:
            ties += 1
    return ComparisonResult(wins=wins, losses=losses, ties=ties,
                            fraction=wins / len(per_box), per_box=tuple(per_box))


def write_gt_boxes_csv(boxes: list[GroundTruthBox], path: Path | str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GT_HEADER)
        for b in boxes:
            writer.writerow([b.query_frame, repr(b.x0), repr(b.y0), repr(b.x1), repr(b.y1)])


def read_gt_boxes_csv(path: Path | str) -> list[GroundTruthBox]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != GT_HEADER:
            raise FormatError(f"{path}: expected header {GT_HEADER}, found {header}")
        boxes = []
        for row in reader:
            if len(row) != 5:
                raise FormatError(f"{path}: malformed row {row}")
            boxes.append(GroundTruthBox(query_frame=int(row[0]),
                                        x0=float(row[1]), y0=float(row[2]),
                                        x1=float(row[3]), y1=float(row[4])))
    return boxes


def write_report_csv(report: RankReport, path: Path | str) -> None:
    """Per-box rows plus a trailing '#summary' line."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for b in report.boxes:
            writer.writerow([b.box.query_frame, repr(b.box.x0), repr(b.box.y0),
                             repr(b.box.x1), repr(b.box.y1),
                             "" if b.rank is None else b.rank, len(b.in_box_ranks)])
        covered = report.covered_count
        fh.write(f"#summary boxes={len(report.boxes)} covered={covered} "
                 f"total_features={report.total_features}\n")


def read_report_csv(path: Path | str) -> RankReport:
    path = Path(path)
    total_features = 0
    boxes: list[BoxRank] = []
    with open(path, newline="") as fh:
        header = None
        for row in csv.reader(fh):
            if row and row[0].startswith("#summary"):
                for part in row[0].split()[1:]:
                    key, _, value = part.partition("=")
                    if key == "total_features":
                        total_features = int(value)
                continue
            if header is None:
                header = row
                if header != REPORT_HEADER:
                    raise FormatError(f"{path}: expected header {REPORT_HEADER}, found {header}")
                continue
            if len(row) != len(REPORT_HEADER):
                raise FormatError(f"{path}: malformed row {row}")
            rank = None if row[5] == "" else int(row[5])
            box = GroundTruthBox(query_frame=int(row[0]), x0=float(row[1]),
                                 y0=float(row[2]), x1=float(row[3]), y1=float(row[4]))
            # in-box rank lists are not round-tripped; keep the best rank only
            boxes.append(BoxRank(box=box, rank=rank,
                                 in_box_ranks=(rank,) if rank is not None else ()))
    return RankReport(boxes=boxes, total_features=total_features)


def write_plot_data_csv(rows: list[tuple[int, int | None, float]], path: Path | str) -> None:
    """Rows of (query_frame, best rank or None, localization error in meters)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PLOT_DATA_HEADER)
        for query_frame, rank, err in rows:
            writer.writerow([query_frame, "" if rank is None else rank, repr(err)])

"""Deterministic synthetic worlds for desk-scale end-to-end experiments.

The route is a stadium-shaped circuit traversed twice at fixed arc-length
steps, so every second-lap frame has a first-lap twin at the same pose and a
timestamp gap of one circuit length; queries are placed on the second lap and
remain localizable once the exclusion window removes their temporal
neighborhood. Landmarks sit on wall lines at a few discrete laterals and
heights, which concentrates stationary-object motion features onto a small
family of image-space curves that a learned motion vocabulary can cover.
Changed objects exist only in the query epoch: either clones of mapped
landmarks moved to off-wall positions (same appearance, wrong place) or
freshly invented ones (novel appearance).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, GenerationError, ValidationError
from .features import DENSE, Frame, Keypoint, OdometryPose, ViewSequenceMap, wrap_heading
from .motion_prior import (DEFAULT_TC, DEFAULT_WINDOW_LENGTH, Track,
                           detect_anomaly_ego_motion, write_tracks_csv)
from .evaluation import GroundTruthBox, write_gt_boxes_csv
from .store import write_feature_store

WALL_LATERALS = (4.0, 7.0)
WALL_HEIGHTS = (0.5, 1.5, 2.5, 3.5)


@dataclass(frozen=True)
class WorldConfig:
    seed: int = 0
    route_frames: int = 236
    landmark_count: int = 300
    changed_count: int = 1
    query_count: int = 1
    descriptor_dim: int = 16
    noise_sigma: float = 0.15
    focal: float = 160.0
    image_width: int = 256
    image_height: int = 192
    loop_closure: bool = True
    curve_segments: tuple[tuple[int, float], ...] = ()
    turn_radius: float = 6.0
    step_length: float = 1.0
    camera_height: float = 1.5
    min_depth: float = 2.0
    max_depth: float = 60.0
    exclusion: int = 60
    moved_fraction: float = 1.0   # changed objects cloned from the map vs invented
    clone_min_shift_px: float = 60.0  # min image displacement of a moved clone
    cluster_spread: float = 0.6   # metres, lateral scatter of a changed cluster
    cluster_members: tuple[int, int] = (4, 9)  # inclusive size range per cluster
    box_margin: float = 2.0
    anomaly_window: int = DEFAULT_WINDOW_LENGTH
    anomaly_tc: float = DEFAULT_TC

    def validate(self) -> None:
        if min(self.route_frames, self.landmark_count, self.changed_count,
               self.query_count, self.descriptor_dim) < 0:
            raise ValidationError("counts must be non-negative")
        if self.noise_sigma < 0 or self.step_length <= 0 or self.focal <= 0:
            raise ValidationError("noise_sigma >= 0, step_length > 0, focal > 0 required")
        if not 0.0 <= self.moved_fraction <= 1.0:
            raise ValidationError(f"moved_fraction must be in [0, 1], got {self.moved_fraction}")
        lo, hi = self.cluster_members
        if lo < 1 or hi < lo:
            raise ValidationError(f"cluster_members bounds invalid: ({lo}, {hi})")
        if self.cluster_spread < 0:
            raise ValidationError(f"cluster_spread must be >= 0, got {self.cluster_spread}")


@dataclass
class SynthWorld:
    vmap: ViewSequenceMap
    tracks: list[Track]
    ground_truth: list[GroundTruthBox]
    queries: list[Frame]
    query_poses: list[OdometryPose]
    query_anomaly: dict[int, bool]
    circuit_frames: int = field(default=0)


def generate_curved_segment(arc_length: float, arc_angle: float, spacing: float = 1.0,
                            start_frame: int = 0, x0: float = 0.0, y0: float = 0.0,
                            heading0: float = 0.0) -> list[OdometryPose]:
    """Constant-curvature poses at fixed arc-length spacing; angle 0 is straight."""
    if arc_length <= 0 or spacing <= 0:
        raise ValidationError("arc_length and spacing must be positive")
    n = int(math.floor(arc_length / spacing + 1e-9)) + 1
    poses = []
    curvature = arc_angle / arc_length
    for i in range(n):
        s = i * spacing
        h = heading0 + curvature * s
        if curvature == 0.0:
            x = x0 + s * math.cos(heading0)
            y = y0 + s * math.sin(heading0)
        else:
            radius = 1.0 / curvature
            x = x0 + radius * (math.sin(h) - math.sin(heading0))
            y = y0 - radius * (math.cos(h) - math.cos(heading0))
        poses.append(OdometryPose(frame_id=start_frame + i, x=x, y=y,
                                  heading=wrap_heading(h)))
    return poses


def _stadium_point(s: float, straight: float, radius: float) -> tuple[float, float, float]:
    """Position and heading at arc length s along the stadium circuit."""
    turn = math.pi * radius
    s = s % (2.0 * straight + 2.0 * turn)
    if s < straight:
        return s, 0.0, 0.0
    s -= straight
    if s < turn:
        a = s / radius
        return straight + radius * math.sin(a), radius * (1.0 - math.cos(a)), a
    s -= turn
    if s < straight:
        return straight - s, 2.0 * radius, math.pi
    s -= straight
    a = s / radius
    return -radius * math.sin(a), radius * (1.0 + math.cos(a)), math.pi + a


def _route_poses(config: WorldConfig) -> tuple[list[OdometryPose], int]:
    """The full pose sequence and, for loop routes, the circuit length in frames."""
    n = config.route_frames
    if config.loop_closure:
        circuit = n // 2
        if circuit < 2:
            raise GenerationError(f"loop route needs >= 4 frames, got {n}")
        perimeter = circuit * config.step_length
        straight = (perimeter - 2.0 * math.pi * config.turn_radius) / 2.0
        if straight <= config.step_length:
            raise GenerationError(
                f"turn radius {config.turn_radius} leaves no straight segment on a "
                f"{perimeter:.1f} m circuit")
        poses = []
        for i in range(n):
            s = (i % circuit) * config.step_length
            x, y, h = _stadium_point(s, straight, config.turn_radius)
            poses.append(OdometryPose(frame_id=i, x=x, y=y, heading=wrap_heading(h)))
        return poses, circuit

    # open route: straight runs with inserted constant-curvature turns
    segments = sorted(config.curve_segments)
    poses = [OdometryPose(frame_id=0, x=0.0, y=0.0, heading=0.0)]
    seg_idx = 0
    remaining_turn = 0.0
    for i in range(1, n):
        prev = poses[-1]
        if seg_idx < len(segments) and segments[seg_idx][0] == prev.frame_id:
            remaining_turn = segments[seg_idx][1]
            seg_idx += 1
        if remaining_turn != 0.0:
            dh = math.copysign(min(abs(remaining_turn),
                                   config.step_length / config.turn_radius), remaining_turn)
            remaining_turn -= dh
        else:
            dh = 0.0
        h = prev.heading + dh
        poses.append(OdometryPose(
            frame_id=i,
            x=prev.x + config.step_length * math.cos(h),
            y=prev.y + config.step_length * math.sin(h),
            heading=wrap_heading(h)))
    return poses, 0


def _project(points: np.ndarray, pose: OdometryPose, config: WorldConfig
             ) -> tuple[np.ndarray, np.ndarray]:
    """Pinhole projection of (n, 3) world points; returns (uv, visible mask)."""
    fwd = np.array([math.cos(pose.heading), math.sin(pose.heading)])
    right = np.array([math.sin(pose.heading), -math.cos(pose.heading)])
    rel = points[:, :2] - np.array([pose.x, pose.y])
    depth = rel @ fwd
    with np.errstate(divide="ignore", invalid="ignore"):
        u = config.image_width / 2.0 + config.focal * (rel @ right) / depth
        v = config.image_height / 2.0 - config.focal * (points[:, 2] - config.camera_height) / depth
    visible = ((depth >= config.min_depth) & (depth <= config.max_depth)
               & (u >= 0.0) & (u < config.image_width)
               & (v >= 0.0) & (v < config.image_height))
    uv = np.column_stack([u, v])
    uv[~visible] = 0.0
    return uv, visible


def _unit_rows(rows: np.ndarray) -> np.ndarray:
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def generate_world(config: WorldConfig) -> SynthWorld:
    config.validate()
    rng = np.random.Generator(np.random.PCG64(config.seed))
    poses, circuit = _route_poses(config)
    if config.loop_closure and circuit < config.exclusion:
        raise GenerationError(
            f"circuit of {circuit} frames leaves no reference outside an "
            f"exclusion window of {config.exclusion}")
    perimeter = (circuit if config.loop_closure else config.route_frames) * config.step_length
    pose_xy = np.array([[p.x, p.y] for p in poses])
    pose_h = np.array([p.heading for p in poses])

    # wall landmarks: discrete laterals and heights keep stationary motion
    # features on a few image-space curves a finite word set can cover
    latents = _unit_rows(rng.standard_normal((max(config.landmark_count, 1),
                                              config.descriptor_dim)))[: config.landmark_count]
    arc = rng.uniform(0.0, perimeter, size=config.landmark_count)
    side = rng.choice([-1.0, 1.0], size=config.landmark_count)
    lateral = rng.choice(WALL_LATERALS, size=config.landmark_count)
    height = rng.choice(WALL_HEIGHTS, size=config.landmark_count)
    if config.loop_closure:
        straight = (perimeter - 2.0 * math.pi * config.turn_radius) / 2.0
        base = np.array([_stadium_point(s, straight, config.turn_radius) for s in arc]) \
            if config.landmark_count else np.zeros((0, 3))
    else:
        idx = np.minimum((arc / config.step_length).astype(int), len(poses) - 1)
        base = np.column_stack([pose_xy[idx], pose_h[idx]])
    normals = np.column_stack([-np.sin(base[:, 2]), np.cos(base[:, 2])]) \
        if config.landmark_count else np.zeros((0, 2))
    landmarks = np.column_stack([
        base[:, 0] + side * lateral * normals[:, 0],
        base[:, 1] + side * lateral * normals[:, 1],
        height]) if config.landmark_count else np.zeros((0, 3))

    # query viewpoints: spread over the second lap (loop) or the route tail
    lo = circuit if config.loop_closure else 0
    span = config.route_frames - lo
    if config.query_count > span:
        raise GenerationError(
            f"{config.query_count} queries exceed the {span} available route positions")
    query_ids = [lo + int((k + 0.5) * span / config.query_count)
                 for k in range(config.query_count)]
    if len(set(query_ids)) != len(query_ids):
        raise GenerationError("query positions collide; reduce query_count")

    # changed objects: clusters anchored ahead of a query, off the wall lines;
    # moved ones clone latents of landmarks visible from that query's pose
    changed_points: list[np.ndarray] = []
    changed_latents: list[np.ndarray] = []
    changed_object: list[int] = []
    moved_count = int(round(config.moved_fraction * config.changed_count))
    for k in range(config.changed_count):
        q = query_ids[k % len(query_ids)] if query_ids else 0
        pose = poses[q]
        m_lo, m_hi = config.cluster_members
        members = int(rng.integers(m_lo, m_hi + 1))
        forward_dist = rng.uniform(8.0, 20.0)
        lateral_off = rng.uniform(-3.0, 3.0)
        fwd = np.array([math.cos(pose.heading), math.sin(pose.heading)])
        right = np.array([math.sin(pose.heading), -math.cos(pose.heading)])
        anchor = np.array([pose.x, pose.y]) + forward_dist * fwd + lateral_off * right
        spread = rng.normal(scale=config.cluster_spread, size=(members, 2))
        heights_k = rng.uniform(0.3, 3.7, size=members)
        pts = np.column_stack([anchor + spread, heights_k])
        if k < moved_count and config.landmark_count:
            # clone sources must project far from the anchor, or the implied
            # query-to-reference displacement stays within ordinary parallax
            uv_l, vis = _project(landmarks, pose, config)
            anchor_uv, anchor_vis = _project(
                np.array([[anchor[0], anchor[1], 2.0]]), pose, config)
            source = np.flatnonzero(vis)
            if anchor_vis[0] and source.size:
                shift = np.hypot(uv_l[source, 0] - anchor_uv[0, 0],
                                 uv_l[source, 1] - anchor_uv[0, 1])
                far = source[shift >= config.clone_min_shift_px]
                source = far if far.size else source
            if source.size == 0:
                source = np.arange(config.landmark_count)
            chosen = rng.choice(source, size=members, replace=source.size < members)
            lat = latents[chosen]
        else:
            lat = _unit_rows(rng.standard_normal((members, config.descriptor_dim)))
        changed_points.append(pts)
        changed_latents.append(lat)
        changed_object.extend([k] * members)
    changed_pts = np.vstack(changed_points) if changed_points else np.zeros((0, 3))
    changed_lat = np.vstack(changed_latents) if changed_latents else \
        np.zeros((0, config.descriptor_dim))
    changed_obj = np.array(changed_object, dtype=np.int64)

    def observe(lat_rows: np.ndarray) -> np.ndarray:
        noise = rng.standard_normal(lat_rows.shape) if config.noise_sigma > 0 else 0.0
        return (lat_rows + config.noise_sigma * noise).astype(np.float32)

    # map pass: static landmarks only, observed with fresh noise per frame
    frames = []
    visible_runs: dict[int, list[list[tuple[int, Keypoint]]]] = {
        i: [] for i in range(config.landmark_count)}
    for i, pose in enumerate(poses):
        uv, vis = _project(landmarks, pose, config)
        vis_idx = np.flatnonzero(vis)
        frames.append(Frame(
            frame_id=i,
            keypoints=uv[vis_idx].astype(np.float32),
            descriptors=observe(latents[vis_idx]),
            descriptor_kind=DENSE, dim=config.descriptor_dim,
            image_width=config.image_width, image_height=config.image_height))
        for j in vis_idx:
            runs = visible_runs[int(j)]
            kp = Keypoint(float(uv[j, 0]), float(uv[j, 1]))
            if runs and runs[-1][-1][0] == i - 1:
                runs[-1].append((i, kp))
            else:
                runs.append([(i, kp)])

    tracks = []
    tid = 0
    for j in range(config.landmark_count):
        for run in visible_runs[j]:
            if len(run) >= 2:
                tracks.append(Track(track_id=tid, observations=tuple(run)))
                tid += 1

    # query pass: static landmarks plus every visible changed-object landmark
    anomaly = {lab.frame_id: lab.anomaly
               for lab in detect_anomaly_ego_motion(poses, config.anomaly_window,
                                                    config.anomaly_tc)} \
        if len(poses) >= config.anomaly_window else {p.frame_id: False for p in poses}
    queries = []
    query_poses = []
    boxes = []
    for t in query_ids:
        pose = poses[t]
        uv_s, vis_s = _project(landmarks, pose, config)
        uv_c, vis_c = _project(changed_pts, pose, config)
        s_idx = np.flatnonzero(vis_s)
        c_idx = np.flatnonzero(vis_c)
        keypoints = np.vstack([uv_s[s_idx], uv_c[c_idx]]).astype(np.float32) \
            if s_idx.size + c_idx.size else np.zeros((0, 2), dtype=np.float32)
        descriptors = np.vstack([observe(latents[s_idx]), observe(changed_lat[c_idx])]) \
            if s_idx.size + c_idx.size else \
            np.zeros((0, config.descriptor_dim), dtype=np.float32)
        queries.append(Frame(
            frame_id=t, keypoints=keypoints, descriptors=descriptors,
            descriptor_kind=DENSE, dim=config.descriptor_dim,
            image_width=config.image_width, image_height=config.image_height))
        query_poses.append(pose)
        for k in range(config.changed_count):
            members = c_idx[changed_obj[c_idx] == k]
            if members.size == 0:
                continue
            x0 = max(0.0, float(uv_c[members, 0].min()) - config.box_margin)
            x1 = min(float(config.image_width), float(uv_c[members, 0].max()) + config.box_margin)
            y0 = max(0.0, float(uv_c[members, 1].min()) - config.box_margin)
            y1 = min(float(config.image_height), float(uv_c[members, 1].max()) + config.box_margin)
            if x0 < x1 and y0 < y1:
                boxes.append(GroundTruthBox(query_frame=t, x0=x0, y0=y0, x1=x1, y1=y1))

    vmap = ViewSequenceMap(frames=frames, poses=poses, keyframe_ids=set())
    return SynthWorld(vmap=vmap, tracks=tracks, ground_truth=boxes, queries=queries,
                      query_poses=query_poses,
                      query_anomaly={t: anomaly.get(t, False) for t in query_ids},
                      circuit_frames=circuit)


QUERY_ANOMALY_HEADER = ["query_frame", "anomaly"]
QUERY_ANOMALY_NAME = "query_anomaly.csv"


def write_query_anomaly_csv(labels: dict[int, bool], path: Path | str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(QUERY_ANOMALY_HEADER)
        for frame_id in sorted(labels):
            writer.writerow([frame_id, int(labels[frame_id])])


def read_query_anomaly_csv(path: Path | str) -> dict[int, bool]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != QUERY_ANOMALY_HEADER:
            raise FormatError(f"{path}: expected header {QUERY_ANOMALY_HEADER}, found {header}")
        return {int(row[0]): bool(int(row[1])) for row in reader}


def write_world(world: SynthWorld, out_dir: Path | str) -> None:
    """Map store, query store, tracks, ground truth, and anomaly labels."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_feature_store(world.vmap, out_dir / "map")
    queries = ViewSequenceMap(frames=world.queries, poses=world.query_poses,
                              keyframe_ids=set())
    write_feature_store(queries, out_dir / "queries")
    write_query_anomaly_csv(world.query_anomaly, out_dir / "queries" / QUERY_ANOMALY_NAME)
    write_tracks_csv(world.tracks, out_dir / "tracks.csv")
    write_gt_boxes_csv(world.ground_truth, out_dir / "gt_boxes.csv")

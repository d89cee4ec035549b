"""Synthetic world generation: routes, revisits, changed objects, artifacts."""

from __future__ import annotations

import math

import numpy as np
import pytest

from scenediff import (GenerationError, WorldConfig, generate_curved_segment,
                       generate_world, read_feature_store,
                       read_query_anomaly_csv, read_tracks_csv,
                       write_query_anomaly_csv, write_world)
from scenediff.evaluation import read_gt_boxes_csv


def _small_config(**kwargs) -> WorldConfig:
    base = dict(seed=5, route_frames=120, landmark_count=80, changed_count=1,
                query_count=1, exclusion=30, turn_radius=6.0)
    base.update(kwargs)
    return WorldConfig(**base)


def test_same_seed_reproduces_the_world_exactly() -> None:
    a = generate_world(_small_config())
    b = generate_world(_small_config())
    assert len(a.vmap.frames) == len(b.vmap.frames)
    for fa, fb in zip(a.vmap.frames, b.vmap.frames):
        assert fa.descriptors.tobytes() == fb.descriptors.tobytes()
        assert fa.keypoints.tobytes() == fb.keypoints.tobytes()
    assert [q.frame_id for q in a.queries] == [q.frame_id for q in b.queries]
    assert a.ground_truth == b.ground_truth
    assert a.query_anomaly == b.query_anomaly


def test_different_seeds_differ() -> None:
    a = generate_world(_small_config(seed=1))
    b = generate_world(_small_config(seed=2))
    assert a.vmap.frames[0].descriptors.tobytes() != \
        b.vmap.frames[0].descriptors.tobytes()


def test_closed_route_revisits_exactly() -> None:
    world = generate_world(_small_config())
    assert world.circuit_frames > 0
    poses = {p.frame_id: p for p in world.vmap.poses}
    for qpose in world.query_poses:
        twin = poses[qpose.frame_id - world.circuit_frames]
        assert qpose.x == pytest.approx(twin.x, abs=1e-9)
        assert qpose.y == pytest.approx(twin.y, abs=1e-9)
        assert qpose.heading == pytest.approx(twin.heading, abs=1e-9)


def test_queries_sit_on_the_second_lap() -> None:
    world = generate_world(_small_config(query_count=3))
    for q in world.queries:
        assert world.circuit_frames <= q.frame_id < len(world.vmap.poses)


def test_queries_recapture_mapped_viewpoints() -> None:
    world = generate_world(_small_config(query_count=2))
    map_ids = [f.frame_id for f in world.vmap.frames]
    assert map_ids == sorted(map_ids)
    pose_ids = {p.frame_id for p in world.vmap.poses}
    for q, qpose in zip(world.queries, world.query_poses):
        assert q.frame_id == qpose.frame_id
        assert q.frame_id in pose_ids


def test_exclusion_wider_than_the_loop_is_rejected() -> None:
    with pytest.raises(GenerationError):
        generate_world(_small_config(exclusion=500))


def test_boxes_stay_inside_the_image() -> None:
    world = generate_world(_small_config(changed_count=2, query_count=2))
    cfg = _small_config()
    for box in world.ground_truth:
        assert 0.0 <= box.x0 < box.x1 <= cfg.image_width
        assert 0.0 <= box.y0 < box.y1 <= cfg.image_height


def test_every_query_has_an_anomaly_label() -> None:
    world = generate_world(_small_config(query_count=4))
    assert set(world.query_anomaly) == {q.frame_id for q in world.queries}


def test_tracks_follow_map_landmarks() -> None:
    world = generate_world(_small_config())
    frame_ids = {f.frame_id for f in world.vmap.frames}
    for track in world.tracks[:50]:
        ids = [f for f, _ in track.observations]
        assert all(f in frame_ids for f in ids)
        assert ids == sorted(ids)
        assert len(ids) >= 2


def test_curved_segment_quarter_circle_endpoint() -> None:
    radius = 8.0
    length = radius * math.pi / 2
    poses = generate_curved_segment(length, math.pi / 2, spacing=length / 20)
    end = poses[-1]
    assert end.x == pytest.approx(radius, abs=1e-9)
    assert end.y == pytest.approx(radius, abs=1e-9)
    assert end.heading == pytest.approx(math.pi / 2, abs=1e-9)


def test_curved_segment_zero_angle_is_straight() -> None:
    poses = generate_curved_segment(10.0, 0.0, spacing=1.0)
    assert len(poses) == 11
    assert all(p.y == 0.0 and p.heading == 0.0 for p in poses)
    assert poses[-1].x == pytest.approx(10.0)


def test_world_write_layout_and_round_trip(tmp_path) -> None:
    world = generate_world(_small_config())
    write_world(world, tmp_path)

    assert (tmp_path / "map" / "manifest.json").exists()
    assert (tmp_path / "queries" / "manifest.json").exists()
    assert (tmp_path / "queries" / "query_anomaly.csv").exists()
    assert (tmp_path / "tracks.csv").exists()
    assert (tmp_path / "gt_boxes.csv").exists()

    vmap = read_feature_store(tmp_path / "map")
    vmap.validate()
    assert len(vmap.frames) == len(world.vmap.frames)

    queries = read_feature_store(tmp_path / "queries")
    assert [f.frame_id for f in queries.frames] == \
        [q.frame_id for q in world.queries]

    assert read_gt_boxes_csv(tmp_path / "gt_boxes.csv") == world.ground_truth
    tracks = read_tracks_csv(tmp_path / "tracks.csv")
    assert len(tracks) == len(world.tracks)
    assert read_query_anomaly_csv(tmp_path / "queries" / "query_anomaly.csv") == \
        world.query_anomaly


def test_query_anomaly_csv_round_trip(tmp_path) -> None:
    labels = {170: False, 184: True, 199: False}
    write_query_anomaly_csv(labels, tmp_path / "qa.csv")
    assert read_query_anomaly_csv(tmp_path / "qa.csv") == labels


def test_moved_clones_reuse_map_appearance() -> None:
    # with moved changed objects, the changed descriptors must match some
    # landmark appearance up to observation noise: correlation with the
    # landmark latents should be near-perfect for at least one pairing
    world = generate_world(_small_config(noise_sigma=0.0))
    q = world.queries[0]
    static_count = q.n_features - sum(
        1 for box in world.ground_truth if box.query_frame == q.frame_id
        for i in range(q.n_features)
        if box.contains(float(q.keypoints[i, 0]), float(q.keypoints[i, 1])))
    assert 0 < static_count < q.n_features

    map_desc = np.vstack([f.descriptors for f in world.vmap.frames])
    changed_rows = [i for i in range(q.n_features)
                    if any(b.contains(float(q.keypoints[i, 0]),
                                      float(q.keypoints[i, 1]))
                           for b in world.ground_truth
                           if b.query_frame == q.frame_id)]
    assert changed_rows
    sims = map_desc @ q.descriptors[changed_rows].T
    assert float(sims.max()) > 0.999


def test_validation_rejects_bad_member_range() -> None:
    with pytest.raises(Exception):
        WorldConfig(cluster_members=(5, 2)).validate()

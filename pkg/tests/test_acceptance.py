"""Top-level acceptance checks: independent oracles for every core behavior.

Each test rebuilds the expected answer from scratch (pure-python double loops,
closed-form geometry, sort-and-scan ranking) and compares the library against
it, so a regression in any numerical path fails loudly here even if the
module-level tests drift.
"""

from __future__ import annotations

import hashlib
import math
import shutil
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from scenediff import (ChangeScore, GroundTruthBox, Keypoint, MotionFeature,
                       MotionVocabulary, PairingError, RunConfig,
                       ViewSequenceMap, WorldConfig, build_index,
                       build_map_index, build_test_pairing,
                       detect_anomaly_ego_motion, generate_curved_segment,
                       generate_world, learn_models, learn_motion_vocabulary,
                       learn_vocabulary, likelihood_eq1, likelihood_eq3,
                       localize, rank_changed_features, score_query)
from scenediff.change_detection import ReferencePool
from scenediff.cli import main as cli_main

from conftest import make_dense_frame, straight_poses


def test_localization_matches_brute_force_scoring() -> None:
    """Top-10 localization equals a pure-python rescoring of every frame."""
    t0 = time.time()
    rng = np.random.default_rng(7)
    frames = [make_dense_frame(rng, i, n_features=30, dim=16) for i in range(200)]
    vmap = ViewSequenceMap(frames=frames, poses=straight_poses(200))
    training = np.vstack([f.descriptors for f in frames])
    vocab = learn_vocabulary(training, word_count=64, seed=7)
    index = build_index(vmap, vocab)

    centroids = [tuple(row) for row in vocab.centroids.astype(np.float64).tolist()]
    exemplars = [tuple(row) for row in vocab.exemplars.astype(np.float64).tolist()]
    n_words = len(exemplars)

    # a frame references the words whose centroids its descriptors are nearest
    # to; the frame distance then accumulates against those words' exemplars
    def nearest_word(desc: tuple) -> int:
        return min(range(n_words), key=lambda w: (math.dist(desc, centroids[w]), w))

    frame_words = {}
    for frame in frames:
        descs = [tuple(d) for d in frame.descriptors.astype(np.float64).tolist()]
        frame_words[frame.frame_id] = sorted({nearest_word(d) for d in descs})

    queries = [make_dense_frame(rng, 1000 + i, n_features=30, dim=16)
               for i in range(50)]
    for query in queries:
        qdescs = [tuple(d) for d in query.descriptors.astype(np.float64).tolist()]
        # distance from each query feature to each word exemplar, cached once
        qd = [[math.dist(d, e) for e in exemplars] for d in qdescs]
        scored = []
        for frame in frames:
            words = frame_words[frame.frame_id]
            total = sum(min(row[w] for w in words) for row in qd)
            scored.append((total, frame.frame_id))
        scored.sort()
        expected = scored[:10]

        got = localize(query, index, vocab, top_r=10)
        assert got.frame_ids == [fid for _, fid in expected]
        for (exp_d, _), (_, got_d) in zip(expected, got.ranked):
            assert got_d == pytest.approx(exp_d, rel=1e-9)

    elapsed = time.time() - t0
    assert elapsed < 60.0
    print(f"ACCEPTANCE localization-oracle: PASS ({elapsed:.1f}s)")


def test_change_likelihoods_match_double_loop_oracles() -> None:
    """Scores agree exactly with exhaustive integer-arithmetic re-derivations."""
    rng = np.random.default_rng(9)
    n_pool, per_frame, top_k, tm = 500, 50, 10, 30.0
    codes = rng.integers(0, 256, size=(n_pool, 16), dtype=np.uint8)
    keypoints = np.column_stack([rng.uniform(0, 256, n_pool),
                                 rng.uniform(0, 192, n_pool)])
    frame_ids = np.repeat(np.arange(100, 110, dtype=np.int64), per_frame)
    feature_ids = np.tile(np.arange(per_frame, dtype=np.int64), 10)
    pool = ReferencePool(frame_ids=frame_ids, feature_ids=feature_ids,
                         keypoints=keypoints, codes=codes)
    words = rng.uniform(0.0, 256.0, size=(40, 4)).astype(np.float32)
    vocab = MotionVocabulary(words=words,
                             votes=np.arange(40, 0, -1, dtype=np.uint32))
    word_rows = [tuple(w) for w in words.astype(np.float64).tolist()]

    pool_ints = [int.from_bytes(bytes(row), "big") for row in codes.tolist()]
    fr = frame_ids.tolist()
    ft = feature_ids.tolist()
    kx = keypoints[:, 0].tolist()
    ky = keypoints[:, 1].tolist()

    for _ in range(50):
        qcode = rng.integers(0, 256, size=16, dtype=np.uint8)
        qx = float(rng.uniform(0, 256))
        qy = float(rng.uniform(0, 192))
        qint = int.from_bytes(bytes(qcode.tolist()), "big")
        ham = [(qint ^ p).bit_count() for p in pool_ints]

        assert likelihood_eq1(qcode, pool) == float(min(ham))

        cand = sorted(range(n_pool), key=lambda j: (ham[j], fr[j], ft[j]))[:top_k]
        wdist = [min(math.dist((qx, qy, kx[j], ky[j]), w) for w in word_rows)
                 for j in cand]
        flags = [d > tm for d in wdist]

        def pick(scores: list[float]) -> int:
            return min(range(len(cand)),
                       key=lambda c: (scores[c], fr[cand[c]], ft[cand[c]]))

        # inconsistent motion doubles the appearance distance
        scores = [(1.0 + flags[c]) * ham[cand[c]] for c in range(len(cand))]
        best = pick(scores)
        got = likelihood_eq3(qcode, (qx, qy), pool, vocab, top_k=top_k, tm=tm)
        assert got == (scores[best], cand[best], flags[best])

        # the nearest candidate's verdict applied to every candidate
        scores_n = [(1.0 + flags[0]) * ham[cand[c]] for c in range(len(cand))]
        best_n = pick(scores_n)
        got_n = likelihood_eq3(qcode, (qx, qy), pool, vocab, top_k=top_k, tm=tm,
                               motion_eval="nearest-only")
        assert got_n == (scores_n[best_n], cand[best_n], flags[0])

        # additive penalty instead of doubling
        scores_s = [ham[cand[c]] + wdist[c] for c in range(len(cand))]
        best_s = pick(scores_s)
        got_s = likelihood_eq3(qcode, (qx, qy), pool, vocab, top_k=top_k, tm=tm,
                               motion_term="separate")
        assert got_s[0] == pytest.approx(scores_s[best_s], rel=1e-9)
        assert got_s[1:] == (cand[best_s], flags[best_s])

        # anomalous ego-motion suppresses the motion term entirely
        got_a = likelihood_eq3(qcode, (qx, qy), pool, vocab, top_k=top_k, tm=tm,
                               query_anomaly_ego=True)
        assert got_a[0] == float(min(ham))
        assert got_a[2] is False

    print("ACCEPTANCE likelihood-oracle: PASS")


def test_motion_vocabulary_recovers_planted_clusters() -> None:
    """Consistency voting keeps cluster members and every word is a mutual 1-NN."""
    rng = np.random.default_rng(0)
    centers = rng.uniform(20.0, 200.0, size=(5, 4))
    assign = rng.integers(0, 5, size=1400)
    cluster_pts = centers[assign] + rng.normal(scale=1.0, size=(1400, 4))
    noise = rng.uniform(0.0, 220.0, size=(600, 4))
    data = np.vstack([cluster_pts, noise])
    feats = [MotionFeature(Keypoint(v[0], v[1]), Keypoint(v[2], v[3]))
             for v in data]

    vocab = learn_motion_vocabulary(feats, sample_size=2000, iterations=20,
                                    output_words=50, seed=0)
    assert vocab.words.shape == (50, 4)

    dist_to_center = cdist(vocab.words.astype(np.float64), centers).min(axis=1)
    fraction = float((dist_to_center <= 3.0).mean())
    assert fraction >= 0.95

    # every selected word must be a reciprocal 1-NN of the full feature set,
    # and with full-set sampling the vote order reduces to feature order
    dmat = cdist(data, data)
    np.fill_diagonal(dmat, np.inf)
    nn = dmat.argmin(axis=1)
    row_min = dmat[np.arange(len(data)), nn]
    mutual = np.flatnonzero(dmat[nn, np.arange(len(data))] == row_min[nn])
    np.testing.assert_array_equal(vocab.words,
                                  data[mutual[:50]].astype(np.float32))
    assert np.all(vocab.votes == 20)

    again = learn_motion_vocabulary(feats, sample_size=2000, iterations=20,
                                    output_words=50, seed=0)
    np.testing.assert_array_equal(vocab.words, again.words)
    np.testing.assert_array_equal(vocab.votes, again.votes)

    print(f"ACCEPTANCE motion-vocabulary-recovery: PASS ({fraction:.0%} in-cluster)")


def test_anomaly_detector_matches_closed_form_arc_geometry() -> None:
    """Straight runs stay clean; arcs are flagged with the analytic curvature."""
    tc = math.radians(5.0)

    straight = detect_anomaly_ego_motion(straight_poses(60), 20, tc)
    assert sum(lab.anomaly for lab in straight) == 0

    def arc_curvature(radius: float, spacing: float, window: int) -> float:
        # chord directions inside one window advance by a fixed angle omega,
        # so the mean resultant length has a closed form
        omega = spacing / radius
        m = window // 2
        r_bar = abs(math.sin(m * omega / 2.0)) / (m * abs(math.sin(omega / 2.0)))
        return math.sqrt(-2.0 * math.log(r_bar))

    # quarter circle, radius 10 m, 1 m spacing, window of 10
    quarter = generate_curved_segment(arc_length=5.0 * math.pi,
                                      arc_angle=math.pi / 2.0, spacing=1.0)
    labels_q = detect_anomaly_ego_motion(quarter, 10, tc)
    expected = arc_curvature(10.0, 1.0, 10)
    assert labels_q[0].curvature == pytest.approx(expected, abs=1e-9)
    assert expected > tc
    full_q = len(quarter) - 10 + 1
    assert all(lab.anomaly for lab in labels_q[:full_q])

    # full circle, radius 10 m: every full window curves well past 5 degrees
    circle = generate_curved_segment(arc_length=20.0 * math.pi,
                                     arc_angle=2.0 * math.pi, spacing=1.0)
    assert arc_curvature(10.0, 1.0, 20) > tc
    labels_c = detect_anomaly_ego_motion(circle, 20, tc)
    full_c = len(circle) - 20 + 1
    flagged = sum(lab.anomaly for lab in labels_c[:full_c])
    assert flagged / full_c >= 0.99

    print("ACCEPTANCE ego-motion-anomaly: PASS")


def test_motion_prior_improves_ranks_across_seeded_worlds() -> None:
    """Motion-on beats motion-off on the changed object in most worlds."""
    t0 = time.time()
    wins = ties = losses = 0
    for seed in range(100):
        world = generate_world(WorldConfig(
            seed=seed, route_frames=236, landmark_count=200, changed_count=1,
            query_count=1, exclusion=60, turn_radius=6.0, min_depth=6.0,
            noise_sigma=0.15))
        rc = RunConfig(word_count=64, exclusion=60, motion_sample_size=2500,
                       motion_iterations=25, motion_words=3000, seed=seed)
        models = learn_models(world.vmap, world.tracks, rc, vocab_train_stride=3)
        index = build_map_index(world.vmap, models, rc)
        query = world.queries[0]
        qa = world.query_anomaly[query.frame_id]

        res_on = score_query(query, world.vmap, index, models, rc,
                             query_anomaly=qa)
        res_off = score_query(query, world.vmap, index, models,
                              replace(rc, use_motion=False), query_anomaly=qa)
        rank_on = rank_changed_features(res_on.scores,
                                        world.ground_truth).boxes[0].rank
        rank_off = rank_changed_features(res_off.scores,
                                         world.ground_truth).boxes[0].rank
        r_on = rank_on if rank_on is not None else math.inf
        r_off = rank_off if rank_off is not None else math.inf
        if r_on < r_off:
            wins += 1
        elif r_on == r_off:
            ties += 1
        else:
            losses += 1

    elapsed = time.time() - t0
    non_tied = wins + losses
    assert non_tied > 0
    assert wins / non_tied >= 0.70
    assert elapsed < 600.0
    print(f"ACCEPTANCE motion-benefit: PASS "
          f"({wins}W/{ties}T/{losses}L, {wins / non_tied:.0%} of non-tied, "
          f"{elapsed:.0f}s)")


def test_rank_metric_matches_sort_and_scan_oracle() -> None:
    """Box ranks equal an independent sort-and-scan and survive score warps."""
    rng = np.random.default_rng(17)
    for trial in range(1000):
        scores: list[ChangeScore] = []
        query_ids = sorted(rng.choice(1000, size=int(rng.integers(1, 4)),
                                      replace=False).tolist())
        for q in query_ids:
            k = int(rng.integers(2, 15))
            fids = sorted(rng.choice(50, size=k, replace=False).tolist())
            for fid in fids:
                if trial % 3 == 0:
                    lik = float(rng.uniform(0.0, 10.0))
                else:
                    lik = float(rng.integers(0, 8)) * 0.5  # deliberate ties
                scores.append(ChangeScore(
                    query_frame=q, feature_id=fid,
                    x=float(rng.uniform(0, 100)), y=float(rng.uniform(0, 100)),
                    likelihood=lik, matched_frame=0, matched_feature=0,
                    anomaly_motion=False))

        boxes = []
        for _ in range(int(rng.integers(1, 4))):
            q = int(rng.choice(query_ids))
            x0 = float(rng.uniform(0, 80))
            y0 = float(rng.uniform(0, 80))
            boxes.append(GroundTruthBox(query_frame=q, x0=x0, y0=y0,
                                        x1=x0 + float(rng.uniform(1, 40)),
                                        y1=y0 + float(rng.uniform(1, 40))))

        order = sorted(range(len(scores)),
                       key=lambda i: (-scores[i].likelihood,
                                      scores[i].query_frame,
                                      scores[i].feature_id))
        rank_of = {idx: pos + 1 for pos, idx in enumerate(order)}
        expected = []
        for box in boxes:
            inside = [rank_of[i] for i, s in enumerate(scores)
                      if s.query_frame == box.query_frame
                      and box.x0 <= s.x < box.x1 and box.y0 <= s.y < box.y1]
            expected.append((min(inside) if inside else None,
                             tuple(sorted(inside))))

        report = rank_changed_features(scores, boxes)
        got = [(br.rank, br.in_box_ranks) for br in report.boxes]
        assert got == expected

        # any strictly increasing warp of the likelihoods preserves all ranks
        warped = [replace(s, likelihood=math.exp(s.likelihood / 10.0))
                  for s in scores]
        report_w = rank_changed_features(warped, boxes)
        assert [(br.rank, br.in_box_ranks) for br in report_w.boxes] == expected

    print("ACCEPTANCE rank-oracle: PASS")


def test_pairing_exclusion_window_is_airtight() -> None:
    """No retained frame ever sits within the exclusion window of the query."""
    rng = np.random.default_rng(23)
    frames = [make_dense_frame(rng, i, n_features=2, dim=4) for i in range(1200)]
    vmap = ViewSequenceMap(frames=frames, poses=straight_poses(1200))
    all_ts = {f.timestamp_index for f in frames}
    exclusion = 400

    for qt in (0, 211, 400, 599, 600, 601, 999, 1199):
        paired = build_test_pairing(vmap, qt, exclusion)
        kept = {f.timestamp_index for f in paired.frames}
        for t in kept:
            assert abs(t - qt) >= exclusion
        for t in all_ts - kept:
            assert abs(t - qt) < exclusion
        # the boundary itself is kept; one frame inside it is dropped
        for edge in (qt - exclusion, qt + exclusion):
            if edge in all_ts:
                assert edge in kept
        for inner in (qt - exclusion + 1, qt + exclusion - 1):
            if inner in all_ts:
                assert inner not in kept

    small = ViewSequenceMap(frames=frames[:300], poses=straight_poses(300))
    with pytest.raises(PairingError):
        build_test_pairing(small, 150, exclusion)

    print("ACCEPTANCE pairing-exclusion: PASS")


def test_full_pipeline_is_byte_identical_across_runs(tmp_path: Path) -> None:
    """Generation through evaluation writes identical bytes on a clean rerun."""
    world_toml = tmp_path / "world.toml"
    world_toml.write_text(
        "seed = 33\nroute_frames = 120\nlandmark_count = 80\n"
        "changed_count = 1\nquery_count = 2\nexclusion = 30\n"
        "min_depth = 6.0\n")
    run_toml = tmp_path / "run.toml"
    run_toml.write_text(
        "word_count = 32\nexclusion = 30\nmotion_sample_size = 800\n"
        "motion_iterations = 8\nmotion_words = 400\nseed = 33\n")

    def run_all() -> None:
        world = str(tmp_path / "world")
        models = str(tmp_path / "models")
        out = str(tmp_path / "out")
        steps = [
            ["gen", "--config", str(world_toml), "--out", world],
            ["learn-vocab", "--config", str(run_toml),
             "--map", f"{world}/map", "--out", models],
            ["learn-motion", "--config", str(run_toml), "--map", f"{world}/map",
             "--tracks", f"{world}/tracks.csv", "--out", models],
            ["index", "--config", str(run_toml), "--map", f"{world}/map",
             "--models", models, "--out", models],
            ["detect", "--config", str(run_toml), "--map", f"{world}/map",
             "--models", models, "--queries", f"{world}/queries", "--out", out],
            ["evaluate", "--config", str(run_toml), "--scores", f"{out}/changes.csv",
             "--gt", f"{world}/gt_boxes.csv", "--out", out],
            ["plot-data", "--config", str(run_toml), "--map", f"{world}/map",
             "--models", models, "--queries", f"{world}/queries",
             "--scores", f"{out}/changes.csv", "--gt", f"{world}/gt_boxes.csv",
             "--out", out],
        ]
        for step in steps:
            assert cli_main(step) == 0

    def digest_tree() -> dict[str, str]:
        digests = {}
        for path in sorted(tmp_path.rglob("*")):
            if path.is_file():
                digests[str(path.relative_to(tmp_path))] = hashlib.sha256(
                    path.read_bytes()).hexdigest()
        return digests

    run_all()
    first = digest_tree()
    assert len(first) > 10  # store, models, scores, reports, figures

    for sub in ("world", "models", "out"):
        shutil.rmtree(tmp_path / sub)
    run_all()
    second = digest_tree()

    assert second == first
    print(f"ACCEPTANCE pipeline-determinism: PASS ({len(first)} files)")

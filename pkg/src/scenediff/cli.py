"""Command-line pipeline: generate, learn, index, localize, detect, evaluate.

Every subcommand takes a TOML run configuration whose keys are individually
overridable by same-named flags, exits 0 on success, 1 with a machine-readable
JSON error line on stderr for domain failures, and 2 for usage errors. Each
output directory receives a run_meta.json describing how it was produced.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .change_detection import read_changes_csv, write_changes_csv
from .config import RunConfig, apply_overrides, load_config, write_run_meta
from .errors import ConfigurationError, ScenediffError, ValidationError
from .evaluation import (rank_changed_features, read_gt_boxes_csv,
                         write_plot_data_csv, write_report_csv)
from .localization import build_index, localize, read_index, write_index
from .motion_prior import (anomaly_frame_ids, detect_anomaly_ego_motion,
                           extract_motion_features, learn_motion_vocabulary,
                           read_motion_vocabulary, read_tracks_csv,
                           select_keyframes, write_motion_vocabulary)
from .pipeline import Models, localization_error, restrict_index, score_query
from .plots import save_rank_error_figure, save_rank_report_figure
from .store import read_feature_store
from .synthworld import (QUERY_ANOMALY_NAME, WorldConfig, generate_world,
                         read_query_anomaly_csv, write_world)
from .vocabulary import (ProjectionDictionary, learn_vocabulary,
                         read_vocabulary, write_vocabulary)

VOCAB_NAME = "vocab.vvf"
MOTION_NAME = "motion.mvf"
INDEX_NAME = "index.bif"

LOCALIZE_HEADER = ["query_frame", "rank", "frame_id", "distance"]


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None,
                        help="TOML run configuration file")
    flags = parser.add_argument_group("configuration overrides")
    flags.add_argument("--top-r", type=int, default=None)
    flags.add_argument("--top-k", type=int, default=None)
    flags.add_argument("--tm", type=float, default=None)
    flags.add_argument("--tc-degrees", type=float, default=None)
    flags.add_argument("--bits", type=int, default=None)
    flags.add_argument("--word-count", type=int, default=None)
    flags.add_argument("--stride", type=int, default=None)
    flags.add_argument("--unit-length", type=float, default=None)
    flags.add_argument("--window-length", type=int, default=None)
    flags.add_argument("--exclusion", type=int, default=None)
    flags.add_argument("--motion-sample-size", type=int, default=None)
    flags.add_argument("--motion-iterations", type=int, default=None)
    flags.add_argument("--motion-words", type=int, default=None)
    flags.add_argument("--seed", type=int, default=None)
    flags.add_argument("--motion", dest="use_motion",
                       action=argparse.BooleanOptionalAction, default=None)
    flags.add_argument("--keyframes-only", dest="keyframes_only",
                       action=argparse.BooleanOptionalAction, default=None)
    flags.add_argument("--motion-term", choices=["literal", "separate"], default=None)
    flags.add_argument("--motion-eval", choices=["per-candidate", "nearest-only"],
                       default=None)


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    config = load_config(getattr(args, "config", None))
    overrides = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}
    return apply_overrides(config, overrides)


def _load_index(models_dir: Path, vmap, vocab, config: RunConfig):
    index_path = models_dir / INDEX_NAME
    if index_path.exists():
        return read_index(index_path, vocab.word_count)
    keyframes = vmap.keyframe_ids
    if config.keyframes_only and not keyframes:
        keyframes = set(select_keyframes(vmap.frame_ids, config.stride))
        vmap = type(vmap)(frames=vmap.frames, poses=vmap.poses, keyframe_ids=keyframes)
    return build_index(vmap, vocab, keyframes_only=config.keyframes_only)


def _query_frames(queries, query_frame: int | None):
    if query_frame is None:
        return list(queries.frames)
    if query_frame not in set(queries.frame_ids):
        raise ValidationError(f"query frame {query_frame} not present in the query store")
    return [queries.frame(query_frame)]


def _cmd_gen(args: argparse.Namespace) -> int:
    data = {}
    if args.config is not None:
        data = tomllib.loads(Path(args.config).read_text())
    known = {f.name for f in fields(WorldConfig)}
    for key in data:
        if key not in known:
            raise ConfigurationError(f"{args.config}: unknown world key {key!r}")
    if "curve_segments" in data:
        data["curve_segments"] = tuple((int(f), float(a)) for f, a in data["curve_segments"])
    if args.seed is not None:
        data["seed"] = args.seed
    world_config = WorldConfig(**data)
    world = generate_world(world_config)
    out = Path(args.out)
    write_world(world, out)
    meta = asdict(world_config)
    meta["curve_segments"] = [list(seg) for seg in world_config.curve_segments]
    write_run_meta(meta, out, "gen")
    print(f"wrote world with {len(world.vmap.frames)} map frames, "
          f"{len(world.queries)} queries, {len(world.ground_truth)} boxes to {out}")
    return 0


def _cmd_learn_vocab(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    vmap = read_feature_store(args.map)
    training = np.vstack([f.descriptors for f in vmap.frames if f.n_features])
    vocab = learn_vocabulary(training, config.word_count, seed=config.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_vocabulary(vocab, out / VOCAB_NAME)
    write_run_meta(config, out, "learn-vocab", {"map": str(args.map)})
    print(f"wrote {vocab.word_count}-word vocabulary to {out / VOCAB_NAME}")
    return 0


def _cmd_learn_motion(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    vmap = read_feature_store(args.map)
    tracks = read_tracks_csv(args.tracks)
    anomaly = set()
    if len(vmap.poses) >= config.window_length:
        anomaly = anomaly_frame_ids(
            detect_anomaly_ego_motion(vmap.poses, config.window_length, config.tc))
    features = extract_motion_features(tracks, vmap.poses, config.unit_length,
                                       anomaly_frames=anomaly)
    motion = learn_motion_vocabulary(
        features, sample_size=config.motion_sample_size,
        iterations=config.motion_iterations, output_words=config.motion_words,
        seed=config.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_motion_vocabulary(motion, out / MOTION_NAME)
    write_run_meta(config, out, "learn-motion",
                   {"map": str(args.map), "tracks": str(args.tracks)})
    print(f"wrote {motion.word_count} motion words to {out / MOTION_NAME} "
          f"({len(features)} features, {len(anomaly)} anomaly frames excluded)")
    return 0


def _cmd_index(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    vmap = read_feature_store(args.map)
    vocab = read_vocabulary(Path(args.models) / VOCAB_NAME)
    keyframes = vmap.keyframe_ids
    if config.keyframes_only and not keyframes:
        keyframes = set(select_keyframes(vmap.frame_ids, config.stride))
        vmap = type(vmap)(frames=vmap.frames, poses=vmap.poses, keyframe_ids=keyframes)
    index = build_index(vmap, vocab, keyframes_only=config.keyframes_only)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_index(index, out / INDEX_NAME)
    write_run_meta(config, out, "index", {"map": str(args.map)})
    print(f"indexed {index.n_frames} frames to {out / INDEX_NAME}")
    return 0


def _cmd_localize(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    vmap = read_feature_store(args.map)
    queries = read_feature_store(args.queries)
    vocab = read_vocabulary(Path(args.models) / VOCAB_NAME)
    index = _load_index(Path(args.models), vmap, vocab, config)
    rows = []
    for query in _query_frames(queries, args.query_frame):
        paired = restrict_index(index, query.timestamp_index, config.exclusion)
        result = localize(query, paired, vocab, top_r=config.top_r)
        for rank, (frame_id, dist) in enumerate(result.ranked, start=1):
            rows.append([query.frame_id, rank, frame_id, repr(dist)])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "localization.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOCALIZE_HEADER)
        writer.writerows(rows)
    write_run_meta(config, out, "localize",
                   {"map": str(args.map), "queries": str(args.queries)})
    print(f"wrote {len(rows)} localization rows to {out / 'localization.csv'}")
    return 0


def _cmd_detect(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    vmap = read_feature_store(args.map)
    queries = read_feature_store(args.queries)
    models_dir = Path(args.models)
    vocab = read_vocabulary(models_dir / VOCAB_NAME)
    motion_vocab = None
    if config.use_motion:
        motion_path = models_dir / MOTION_NAME
        if not motion_path.exists():
            raise ConfigurationError(
                f"motion scoring enabled but {motion_path} is missing "
                "(pass --no-motion to score on appearance alone)")
        motion_vocab = read_motion_vocabulary(motion_path)
    proj = ProjectionDictionary(seed=config.seed, bits=config.bits, input_dim=vmap.dim)
    index = _load_index(models_dir, vmap, vocab, config)
    models = Models(vocab=vocab, proj=proj, motion_vocab=motion_vocab,
                    anomaly_frames=set())

    anomaly_path = Path(args.queries) / QUERY_ANOMALY_NAME
    anomaly = read_query_anomaly_csv(anomaly_path) if anomaly_path.exists() else {}
    all_scores = []
    for query in _query_frames(queries, args.query_frame):
        result = score_query(query, vmap, index, models, config,
                             query_anomaly=anomaly.get(query.frame_id, False))
        all_scores.extend(result.scores)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_changes_csv(all_scores, out / "changes.csv")
    write_run_meta(config, out, "detect",
                   {"map": str(args.map), "queries": str(args.queries),
                    "models": str(args.models)})
    print(f"wrote {len(all_scores)} change scores to {out / 'changes.csv'}")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    scores = read_changes_csv(args.scores)
    if not scores:
        raise ValidationError(f"score file {args.scores} contains no rows")
    boxes = read_gt_boxes_csv(args.gt)
    report = rank_changed_features(scores, boxes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(report, out / "report.csv")
    save_rank_report_figure(report, out / "report.png")
    write_run_meta(config, out, "evaluate",
                   {"scores": str(args.scores), "gt": str(args.gt)})
    print(f"wrote report for {len(report.boxes)} boxes "
          f"({report.covered_count} covered) to {out / 'report.csv'}")
    return 0


def _cmd_plot_data(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    vmap = read_feature_store(args.map)
    queries = read_feature_store(args.queries)
    vocab = read_vocabulary(Path(args.models) / VOCAB_NAME)
    index = _load_index(Path(args.models), vmap, vocab, config)
    scores = read_changes_csv(args.scores)
    if not scores:
        raise ValidationError(f"score file {args.scores} contains no rows")
    boxes = read_gt_boxes_csv(args.gt)
    best = rank_changed_features(scores, boxes).per_query_best_rank()
    rows = []
    for query in _query_frames(queries, None):
        paired = restrict_index(index, query.timestamp_index, config.exclusion)
        result = localize(query, paired, vocab, top_r=config.top_r)
        err = localization_error(result, queries.pose(query.frame_id), vmap)
        rows.append((query.frame_id, best.get(query.frame_id), err))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_plot_data_csv(rows, out / "plot_data.csv")
    save_rank_error_figure(rows, out / "plot_data.png")
    write_run_meta(config, out, "plot-data",
                   {"map": str(args.map), "queries": str(args.queries),
                    "scores": str(args.scores), "gt": str(args.gt)})
    print(f"wrote {len(rows)} plot rows to {out / 'plot_data.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenediff",
        description="Change detection on revisited routes under viewpoint uncertainty")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic world")
    p.add_argument("--config", type=Path, default=None, help="TOML world configuration")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("learn-vocab", help="learn the visual vocabulary from a map")
    p.add_argument("--map", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_run_flags(p)
    p.set_defaults(func=_cmd_learn_vocab)

    p = sub.add_parser("learn-motion", help="learn motion words from map tracks")
    p.add_argument("--map", type=Path, required=True)
    p.add_argument("--tracks", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_run_flags(p)
    p.set_defaults(func=_cmd_learn_motion)

    p = sub.add_parser("index", help="quantize map frames into a word index")
    p.add_argument("--map", type=Path, required=True)
    p.add_argument("--models", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_run_flags(p)
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("localize", help="rank reference frames for each query")
    p.add_argument("--map", type=Path, required=True)
    p.add_argument("--models", type=Path, required=True)
    p.add_argument("--queries", type=Path, required=True)
    p.add_argument("--query-frame", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)
    _add_run_flags(p)
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("detect", help="score change likelihood per query feature")
    p.add_argument("--map", type=Path, required=True)
    p.add_argument("--models", type=Path, required=True)
    p.add_argument("--queries", type=Path, required=True)
    p.add_argument("--query-frame", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)
    _add_run_flags(p)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("evaluate", help="rank ground-truth boxes from change scores")
    p.add_argument("--scores", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_run_flags(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("plot-data", help="emit rank vs localization-error data")
    p.add_argument("--map", type=Path, required=True)
    p.add_argument("--models", type=Path, required=True)
    p.add_argument("--queries", type=Path, required=True)
    p.add_argument("--scores", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_run_flags(p)
    p.set_defaults(func=_cmd_plot_data)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenediffError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "OSError", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

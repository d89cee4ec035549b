"""VSF feature-store reader and writer.

Store layout::

    manifest.json      version, descriptor_kind (dense|binary), dim or bits,
                       frame_count, image_width, image_height
    odometry.csv       header "frame_id,x,y,heading", one pose per frame
    frames/<id>.vsf    magic b"VSF1", u32 LE feature count, then per feature
                       f32 x, f32 y, descriptor payload (dim * f32 LE, or
                       bits / 8 raw bytes, MSB-first within each byte)
    keyframes.txt      one frame id per line; absent when the set is empty

Writes are byte-deterministic for a given map. Timestamp indices are not part
of the layout: frames read back with timestamp_index == frame_id, and stored
maps are expected to satisfy that equality.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .features import BINARY, DENSE, Frame, OdometryPose, ViewSequenceMap

FRAME_MAGIC = b"VSF1"

MANIFEST_NAME = "manifest.json"
ODOMETRY_NAME = "odometry.csv"
KEYFRAMES_NAME = "keyframes.txt"
FRAMES_DIR = "frames"


def _payload_width(kind: str, dim: int) -> int:
    return dim * 4 if kind == DENSE else dim // 8


def read_frame_file(path: Path | str, kind: str, dim: int, frame_id: int,
                    image_width: int, image_height: int) -> Frame:
    """Read one .vsf frame file; the descriptor layout comes from the manifest."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != FRAME_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 8:
        raise FormatError(f"{path}: truncated header")
    (count,) = struct.unpack_from("<I", data, 4)
    record = 8 + _payload_width(kind, dim)
    expected = 8 + count * record
    if len(data) != expected:
        raise FormatError(f"{path}: size {len(data)} != expected {expected} for {count} features")
    raw = np.frombuffer(data, dtype=np.uint8, offset=8).reshape(count, record) if count else \
        np.zeros((0, record), dtype=np.uint8)
    keypoints = raw[:, :8].copy().view("<f4").reshape(count, 2).astype(np.float32)
    payload = raw[:, 8:]
    if kind == DENSE:
        descriptors = payload.copy().view("<f4").reshape(count, dim).astype(np.float32)
    else:
        descriptors = payload.copy()
    return Frame(
        frame_id=frame_id,
        keypoints=keypoints,
        descriptors=descriptors,
        descriptor_kind=kind,
        dim=dim,
        image_width=image_width,
        image_height=image_height,
    )


def write_frame_file(path: Path | str, frame: Frame) -> None:
    path = Path(path)
    n = frame.n_features
    parts = [FRAME_MAGIC, struct.pack("<I", n)]
    kp = np.ascontiguousarray(frame.keypoints, dtype="<f4")
    if frame.descriptor_kind == DENSE:
        desc = np.ascontiguousarray(frame.descriptors, dtype="<f4")
        desc_bytes = desc.view(np.uint8).reshape(n, -1) if n else np.zeros((0, 0), np.uint8)
    else:
        desc_bytes = np.ascontiguousarray(frame.descriptors, dtype=np.uint8)
    kp_bytes = kp.view(np.uint8).reshape(n, 8) if n else np.zeros((0, 8), np.uint8)
    if n:
        parts.append(np.hstack([kp_bytes, desc_bytes]).tobytes())
    path.write_bytes(b"".join(parts))


def read_feature_store(path: Path | str) -> ViewSequenceMap:
    """Load and validate a VSF store into a ViewSequenceMap."""
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise FormatError(f"{root}: missing {MANIFEST_NAME}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: invalid JSON ({exc})") from exc
    if manifest.get("version") != 1:
        raise FormatError(f"{manifest_path}: unsupported version {manifest.get('version')!r}")
    kind = manifest.get("descriptor_kind")
    if kind not in (DENSE, BINARY):
        raise FormatError(f"{manifest_path}: descriptor_kind must be dense or binary, got {kind!r}")
    dim_key = "dim" if kind == DENSE else "bits"
    if dim_key not in manifest:
        raise FormatError(f"{manifest_path}: missing {dim_key!r}")
    dim = int(manifest[dim_key])
    if kind == BINARY and dim % 8:
        raise FormatError(f"{manifest_path}: bits {dim} not a byte multiple")
    width = int(manifest["image_width"])
    height = int(manifest["image_height"])
    frame_count = int(manifest["frame_count"])

    poses = read_odometry_csv(root / ODOMETRY_NAME)
    pose_ids = [p.frame_id for p in poses]
    if len(set(pose_ids)) != len(pose_ids):
        raise ValidationError(f"{root}: duplicate frame ids in odometry")
    if len(poses) != frame_count:
        raise ValidationError(
            f"{root}: manifest declares {frame_count} frames but odometry lists {len(poses)}"
        )

    frames = []
    for frame_id in sorted(pose_ids):
        frame_path = root / FRAMES_DIR / f"{frame_id}.vsf"
        if not frame_path.is_file():
            raise ValidationError(f"{root}: missing frame file for frame {frame_id}")
        frames.append(read_frame_file(frame_path, kind, dim, frame_id, width, height))

    keyframe_ids: set[int] = set()
    kf_path = root / KEYFRAMES_NAME
    if kf_path.is_file():
        for line in kf_path.read_text().splitlines():
            line = line.strip()
            if line:
                keyframe_ids.add(int(line))

    vmap = ViewSequenceMap(frames=frames, poses=sorted(poses, key=lambda p: p.frame_id),
                           keyframe_ids=keyframe_ids)
    vmap.validate()
    return vmap


def write_feature_store(vmap: ViewSequenceMap, path: Path | str) -> None:
    """Write a validated map as a VSF store; output bytes depend only on the map."""
    vmap.validate()
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    (root / FRAMES_DIR).mkdir(exist_ok=True)

    kind = vmap.descriptor_kind
    dim = vmap.dim
    width = vmap.frames[0].image_width if vmap.frames else 1024
    height = vmap.frames[0].image_height if vmap.frames else 768
    manifest = {
        "version": 1,
        "descriptor_kind": kind,
        ("dim" if kind == DENSE else "bits"): dim,
        "frame_count": len(vmap.frames),
        "image_width": width,
        "image_height": height,
    }
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")

    write_odometry_csv(root / ODOMETRY_NAME, sorted(vmap.poses, key=lambda p: p.frame_id))

    for frame in vmap.frames:
        write_frame_file(root / FRAMES_DIR / f"{frame.frame_id}.vsf", frame)

    kf_path = root / KEYFRAMES_NAME
    if vmap.keyframe_ids:
        kf_path.write_text("".join(f"{i}\n" for i in sorted(vmap.keyframe_ids)))
    elif kf_path.exists():
        kf_path.unlink()


def read_odometry_csv(path: Path | str) -> list[OdometryPose]:
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"missing odometry file {path}")
    poses = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["frame_id", "x", "y", "heading"]:
            raise FormatError(f"{path}: bad odometry header {header}")
        for row in reader:
            if not row:
                continue
            if len(row) != 4:
                raise FormatError(f"{path}: bad odometry row {row}")
            poses.append(OdometryPose(int(row[0]), float(row[1]), float(row[2]), float(row[3])))
    return poses


def write_odometry_csv(path: Path | str, poses: list[OdometryPose]) -> None:
    lines = ["frame_id,x,y,heading"]
    for p in poses:
        lines.append(f"{p.frame_id},{p.x!r},{p.y!r},{p.heading!r}")
    Path(path).write_text("\n".join(lines) + "\n")

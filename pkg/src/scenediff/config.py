"""Run configuration: fixed defaults, TOML files, CLI overrides.

Every key in the TOML file is overridable by a CLI flag of the same name, and
every run writes the effective configuration back out as run_meta.json so an
artifact directory documents exactly how it was produced.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigurationError

RUN_META_NAME = "run_meta.json"


@dataclass
class RunConfig:
    top_r: int = 10                      # reference frames kept by localization
    top_k: int = 10                      # appearance-NN candidates per query feature
    tm: float = 10.0                     # motion-word distance threshold, pixels
    tc_degrees: float = 5.0              # ego-motion direction-spread threshold
    bits: int = 128                      # binary code width
    word_count: int = 4096               # visual vocabulary size
    stride: int = 10                     # keyframe stride
    unit_length: float = 1.0             # ego-motion span of one motion feature, meters
    window_length: int = 20              # ego-motion anomaly window, frames
    exclusion: int = 400                 # test-pairing timestamp exclusion, frames
    motion_sample_size: int = 10000
    motion_iterations: int = 100
    motion_words: int = 1000
    seed: int = 0
    use_motion: bool = True
    keyframes_only: bool = False
    motion_term: str = "literal"         # or "separate"
    motion_eval: str = "per-candidate"   # or "nearest-only"

    @property
    def tc(self) -> float:
        return math.radians(self.tc_degrees)

    def validate(self) -> None:
        positive = ["top_r", "top_k", "tm", "tc_degrees", "bits", "word_count",
                    "stride", "unit_length", "window_length", "motion_sample_size",
                    "motion_iterations", "motion_words"]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.exclusion < 0:
            raise ConfigurationError(f"exclusion must be >= 0, got {self.exclusion}")
        if self.bits % 8 != 0:
            raise ConfigurationError(f"bits must be a multiple of 8, got {self.bits}")
        if self.motion_term not in ("literal", "separate"):
            raise ConfigurationError(f"motion_term must be literal or separate, got {self.motion_term!r}")
        if self.motion_eval not in ("per-candidate", "nearest-only"):
            raise ConfigurationError(
                f"motion_eval must be per-candidate or nearest-only, got {self.motion_eval!r}")


def load_config(path: Path | str | None) -> RunConfig:
    config = RunConfig()
    if path is None:
        return config
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    for key, value in data.items():
        if key not in known:
            raise ConfigurationError(f"{path}: unknown config key {key!r}")
        setattr(config, key, value)
    config.validate()
    return config


def apply_overrides(config: RunConfig, overrides: dict[str, object]) -> RunConfig:
    """CLI flags win over file values; None means the flag was not given."""
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    config.validate()
    return config


def write_run_meta(config, out_dir: Path | str, command: str,
                   inputs: dict[str, str] | None = None) -> None:
    """Reproducibility record; deliberately carries no timestamps."""
    as_dict = asdict(config) if not isinstance(config, dict) else config
    meta = {"command": command, "config": as_dict, "inputs": inputs or {}}
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / RUN_META_NAME).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

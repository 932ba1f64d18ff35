"""Configuration for onlinest runs."""

import json
import numbers
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import List

from onlinest.errors import ConfigurationError

AL_VARIANTS = ("word_adaptive", "word_original", "token_original", "token_weighted")
CHAR_DELAYS = ("separator", "last_char")
GRANULARITIES = ("char", "bpe")


def _bool_from_env(key: str, default: bool = False) -> bool:
    val = os.getenv(key)
    if val is None:
        return default
    return val.strip().lower() in ("true", "1", "yes", "on")


def _ints_from_env(key: str, default: str) -> List[int]:
    raw = os.getenv(key, default)
    try:
        return [int(x.strip()) for x in raw.split(",") if x.strip()]
    except ValueError as e:
        raise ConfigurationError(f"environment variable {key} must be a comma-separated int list") from e


@dataclass(frozen=True)
class PolicyConfig:
    """The (k, s, N) read/write schedule: wait k frames, then stride s frames, writing up to N tokens per step."""
    k: int
    s: int
    N: int

    def __post_init__(self):
        for name in ("k", "s", "N"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, numbers.Integral) or val < 1:
                raise ConfigurationError(f"policy parameter {name} must be a positive integer, got {val!r}")

    @property
    def label(self) -> str:
        return f"k{self.k}_s{self.s}_N{self.N}"


@dataclass(frozen=True)
class EngineConfig:
    """Online decoding settings."""
    policy: PolicyConfig
    max_length_ratio: float = 1.0

    def __post_init__(self):
        if not self.max_length_ratio > 0:
            raise ConfigurationError(f"max_length_ratio must be > 0, got {self.max_length_ratio!r}")


@dataclass
class OnlineConfig:
    """Runtime config for onlinest components."""
    run_dir: str = field(default_factory=lambda: os.getenv("ONLINEST_RUN_DIR", "runs"))
    workers: int = field(default_factory=lambda: int(os.getenv("ONLINEST_WORKERS", "4")))
    max_length_ratio: float = field(default_factory=lambda: float(os.getenv("ONLINEST_MAX_LENGTH_RATIO", "1.0")))
    frame_ms: float = field(default_factory=lambda: float(os.getenv("ONLINEST_FRAME_MS", "10.0")))

    al_variant: str = field(default_factory=lambda: os.getenv("ONLINEST_AL_VARIANT", "word_adaptive"))
    char_delay: str = field(default_factory=lambda: os.getenv("ONLINEST_CHAR_DELAY", "separator"))
    # empty: take the granularity of the model vocabulary
    granularity: str = field(default_factory=lambda: os.getenv("ONLINEST_GRANULARITY", ""))
    merges_path: str = field(default_factory=lambda: os.getenv("ONLINEST_MERGES_PATH", ""))

    sweep_k: List[int] = field(default_factory=lambda: _ints_from_env("ONLINEST_SWEEP_K", "100,200"))
    sweep_s: List[int] = field(default_factory=lambda: _ints_from_env("ONLINEST_SWEEP_S", "10,20"))
    sweep_n: List[int] = field(default_factory=lambda: _ints_from_env("ONLINEST_SWEEP_N", "1,2,3"))
    include_offline: bool = field(default_factory=lambda: _bool_from_env("ONLINEST_INCLUDE_OFFLINE", True))

    model_path: str = field(default_factory=lambda: os.getenv("ONLINEST_MODEL_PATH", ""))
    use_bridge: bool = field(default_factory=lambda: _bool_from_env("ONLINEST_USE_BRIDGE", False))
    bridge_url: str = field(default_factory=lambda: os.getenv("ONLINEST_BRIDGE_URL", "ws://localhost:9300/ws/model"))
    bridge_timeout_s: float = field(default_factory=lambda: float(os.getenv("ONLINEST_BRIDGE_TIMEOUT_S", "10.0")))

    host: str = field(default_factory=lambda: os.getenv("ONLINEST_HOST", "0.0.0.0"))
    port: int = field(default_factory=lambda: int(os.getenv("ONLINEST_PORT", "9300")))
    log_level: str = field(default_factory=lambda: os.getenv("ONLINEST_LOG_LEVEL", "INFO"))

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        if not self.max_length_ratio > 0:
            raise ConfigurationError(f"max_length_ratio must be > 0, got {self.max_length_ratio}")
        if not self.frame_ms > 0:
            raise ConfigurationError(f"frame_ms must be > 0, got {self.frame_ms}")
        if not (self.sweep_k and self.sweep_s and self.sweep_n):
            raise ConfigurationError("sweep value lists must be non-empty")
        if self.al_variant not in AL_VARIANTS:
            raise ConfigurationError(f"al_variant must be one of {', '.join(AL_VARIANTS)}, got {self.al_variant!r}")
        if self.char_delay not in CHAR_DELAYS:
            raise ConfigurationError(f"char_delay must be one of {', '.join(CHAR_DELAYS)}, got {self.char_delay!r}")
        if self.granularity and self.granularity not in GRANULARITIES:
            raise ConfigurationError(f"granularity must be one of {', '.join(GRANULARITIES)}, got {self.granularity!r}")

    def run_path(self, run_id: str) -> Path:
        """Return run output directory for the given run_id."""
        return Path(self.run_dir) / run_id

    def with_overrides(self, **overrides) -> "OnlineConfig":
        """Return a copy with every non-None override applied."""
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update({k: v for k, v in overrides.items() if v is not None})
        return OnlineConfig(**data)

    @classmethod
    def from_file(cls, path: str) -> "OnlineConfig":
        """Load config from a JSON file; keys not in the file keep their env/default values."""
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"config file {path} is not valid JSON: {e}") from e
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown config keys in {path}: {', '.join(unknown)}")
        return cls(**data)

"""Shared domain types: source features, vocabularies, hypotheses and decoding traces.

All types are immutable after construction. Step indices are 1-based.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from onlinest.config import PolicyConfig
from onlinest.errors import ArgumentError, FormatError, UnknownTokenError

DEFAULT_FRAME_MS = 10.0
BOS = "<s>"
EOS = "</s>"
SPACE = "␠"  # visible stand-in for the space character in char vocabularies
CONTINUATION = "@@"


class Granularity(str, Enum):
    """Target token unit."""
    CHAR = "char"
    BPE = "bpe"


@dataclass(frozen=True, eq=False)
class AudioFeatures:
    """Source sequence X: T frames of D feature dims, each frame lasting frame_ms."""
    frames: np.ndarray
    frame_ms: float = DEFAULT_FRAME_MS

    def __post_init__(self):
        arr = np.array(self.frames, dtype=np.float32, copy=True)
        if arr.ndim != 2:
            raise ArgumentError(f"features must be a T x D matrix, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ArgumentError(f"features need T >= 1 and D >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ArgumentError("features contain non-finite values")
        if not self.frame_ms > 0:
            raise ArgumentError(f"frame_ms must be > 0, got {self.frame_ms}")
        arr.setflags(write=False)
        object.__setattr__(self, "frames", arr)
        object.__setattr__(self, "frame_ms", float(self.frame_ms))

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def dim(self) -> int:
        return int(self.frames.shape[1])

    @property
    def duration_ms(self) -> float:
        return self.num_frames * self.frame_ms

    def prefix(self, n_frames: int) -> "AudioFeatures":
        """Return x_{<=n_frames}."""
        if n_frames < 1:
            raise ArgumentError(f"prefix length must be >= 1 frame, got {n_frames}")
        return AudioFeatures(self.frames[:n_frames], self.frame_ms)


@dataclass(frozen=True)
class Vocabulary:
    """Ordered, distinct token strings with bos/eos ids and a fixed granularity."""
    tokens: Tuple[str, ...]
    bos_id: int = 0
    eos_id: int = 1
    granularity: Granularity = Granularity.CHAR
    _index: Dict[str, int] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        tokens = tuple(self.tokens)
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "granularity", Granularity(self.granularity))
        if len(set(tokens)) != len(tokens):
            raise ArgumentError("vocabulary tokens must be distinct")
        for name in ("bos_id", "eos_id"):
            val = getattr(self, name)
            if not 0 <= val < len(tokens):
                raise ArgumentError(f"{name}={val} outside vocabulary of size {len(tokens)}")
        object.__setattr__(self, "_index", {tok: i for i, tok in enumerate(tokens)})

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise UnknownTokenError(f"symbol {token!r} not in vocabulary") from None

    def token_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise UnknownTokenError(f"token id {token_id} outside vocabulary of size {len(self.tokens)}")
        return self.tokens[token_id]

    def is_special(self, token_id: int) -> bool:
        return token_id in (self.bos_id, self.eos_id)

    def to_dict(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "bos_id": self.bos_id,
            "eos_id": self.eos_id,
            "granularity": self.granularity.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        try:
            return cls(
                tokens=tuple(data["tokens"]),
                bos_id=int(data["bos_id"]),
                eos_id=int(data["eos_id"]),
                granularity=Granularity(data["granularity"]),
            )
        except (KeyError, ValueError, TypeError) as e:
            raise FormatError(f"invalid vocabulary record: {e}") from e

    def fingerprint(self) -> str:
        """Stable hash used by the bridge handshake."""
        payload = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    @classmethod
    def for_chars(cls, alphabet: Iterable[str] = "abcdefghijklmnopqrstuvwxyz") -> "Vocabulary":
        """Char vocabulary: bos, eos, the space symbol, then the alphabet."""
        symbols = [c for c in dict.fromkeys(alphabet) if c != " "]
        return cls(tokens=(BOS, EOS, SPACE, *symbols), granularity=Granularity.CHAR)

    @classmethod
    def for_subwords(cls, units: Iterable[str]) -> "Vocabulary":
        """BPE vocabulary: bos, eos, then every unit with and without the continuation marker."""
        tokens = [BOS, EOS]
        for unit in dict.fromkeys(units):
            tokens.extend([unit + CONTINUATION, unit])
        return cls(tokens=tuple(dict.fromkeys(tokens)), granularity=Granularity.BPE)


@dataclass(frozen=True)
class Hypothesis:
    """Emitted token sequence Y with the step index at which each token was emitted.

    A trailing eos may be present; it never counts toward |Y|.
    """
    token_ids: Tuple[int, ...]
    emitted_at_step: Tuple[int, ...]
    eos_id: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "token_ids", tuple(int(x) for x in self.token_ids))
        object.__setattr__(self, "emitted_at_step", tuple(int(x) for x in self.emitted_at_step))
        if len(self.token_ids) != len(self.emitted_at_step):
            raise ArgumentError("token_ids and emitted_at_step must have equal length")
        steps = self.emitted_at_step
        if any(b < a for a, b in zip(steps, steps[1:])):
            raise ArgumentError("emitted_at_step must be non-decreasing")
        if self.eos_id is not None and self.eos_id in self.token_ids[:-1]:
            raise ArgumentError("eos may only appear as the final token")

    @property
    def finished(self) -> bool:
        """True when the hypothesis ends with eos."""
        return bool(self.token_ids) and self.eos_id is not None and self.token_ids[-1] == self.eos_id

    @property
    def content_ids(self) -> Tuple[int, ...]:
        return self.token_ids[:-1] if self.finished else self.token_ids

    def __len__(self) -> int:
        return len(self.content_ids)


@dataclass(frozen=True)
class TraceStep:
    """One decoding step: t, frames read g(t) and the content tokens emitted (w_t of them)."""
    t: int
    frames_read: int
    token_ids: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "token_ids", tuple(int(x) for x in self.token_ids))

    @property
    def emitted(self) -> int:
        return len(self.token_ids)


@dataclass(frozen=True)
class DecodingTrace:
    """Per-step record of g(t) and w_t; the ground truth for latency metrics."""
    steps: Tuple[TraceStep, ...]
    src_len: int
    frame_ms: float = DEFAULT_FRAME_MS

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if self.src_len < 1:
            raise ArgumentError(f"src_len must be >= 1, got {self.src_len}")
        if not self.frame_ms > 0:
            raise ArgumentError(f"frame_ms must be > 0, got {self.frame_ms}")

    @property
    def frames_read(self) -> List[int]:
        return [s.frames_read for s in self.steps]

    @property
    def emitted(self) -> List[int]:
        return [s.emitted for s in self.steps]

    @property
    def cumulative(self) -> List[int]:
        """q(t) for t = 1..len(steps)."""
        out, total = [], 0
        for s in self.steps:
            total += s.emitted
            out.append(total)
        return out

    @property
    def target_len(self) -> int:
        return sum(s.emitted for s in self.steps)

    @property
    def src_ms(self) -> float:
        return self.src_len * self.frame_ms

    def frames_at(self, t: int) -> int:
        """g(t) as recorded."""
        return self.steps[t - 1].frames_read

    def cutoff(self) -> int:
        """First recorded step that has read the whole source, or the last step if none did."""
        for step in self.steps:
            if step.frames_read >= self.src_len:
                return step.t
        return len(self.steps)


def validate_trace(
    trace: DecodingTrace,
    policy: PolicyConfig,
    hypothesis: Optional[Hypothesis] = None,
) -> List[str]:
    """Return every violated schedule invariant; an empty list means the trace conforms."""
    violations: List[str] = []
    if not trace.steps:
        return ["trace has no steps"]

    prev_g = 0
    for i, step in enumerate(trace.steps, start=1):
        t = step.t
        if t != i:
            violations.append(f"step {i} has t={t}")
        expected = min(policy.k + (i - 1) * policy.s, trace.src_len)
        if step.frames_read != expected:
            violations.append(f"g({i})≠{expected}")
        if step.frames_read > trace.src_len:
            violations.append(f"g({i}) > |X|")
        if step.frames_read < prev_g:
            violations.append(f"g({i}) < g({i - 1})")
        if step.emitted > policy.N:
            violations.append(f"w_{i} > N")
        prev_g = step.frames_read

    if hypothesis is not None and trace.target_len != len(hypothesis):
        violations.append(f"sum of w_t = {trace.target_len} but |Y| = {len(hypothesis)}")
    return violations


def hypothesis_from_steps(steps: Sequence[TraceStep], eos_id: int, eos_step: Optional[int]) -> Hypothesis:
    """Flatten trace steps (plus an optional final eos) into a Hypothesis."""
    ids: List[int] = []
    at: List[int] = []
    for step in steps:
        ids.extend(step.token_ids)
        at.extend([step.t] * step.emitted)
    if eos_step is not None:
        ids.append(eos_id)
        at.append(eos_step)
    return Hypothesis(tuple(ids), tuple(at), eos_id=eos_id)

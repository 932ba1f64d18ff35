"""Trace files: one JSON record per utterance and decoding configuration.

    {"id": ..., "k": 100, "s": 10, "N": 2, "src_len": 173, "frame_ms": 10.0,
     "steps": [{"t": 1, "g": 100, "tokens": [5, 7]}, ...],
     "stop_reason": "eos_after_full_read"}

k, s and N are null for the offline configuration. When decoding ended on
eos, the eos id is the last entry of the final step's tokens.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

from onlinest.config import PolicyConfig
from onlinest.engine import OnlineResult, StopReason
from onlinest.errors import FormatError
from onlinest.types import DecodingTrace, Hypothesis, TraceStep, hypothesis_from_steps

OFFLINE_STOP = "offline"


@dataclass(frozen=True)
class TraceRecord:
    id: str
    policy: Optional[PolicyConfig]
    src_len: int
    frame_ms: float
    steps: Tuple[TraceStep, ...]
    stop_reason: str
    eos_id: int
    finished: bool

    @property
    def is_offline(self) -> bool:
        return self.policy is None

    @property
    def config_key(self) -> Tuple[Optional[int], Optional[int], Optional[int]]:
        if self.policy is None:
            return (None, None, None)
        return (self.policy.k, self.policy.s, self.policy.N)

    @classmethod
    def from_result(cls, utt_id: str, policy: Optional[PolicyConfig], result: OnlineResult, eos_id: int) -> "TraceRecord":
        return cls.from_parts(utt_id, policy, result.hypothesis, result.trace, result.stop_reason.value, eos_id)

    @classmethod
    def from_parts(
        cls,
        utt_id: str,
        policy: Optional[PolicyConfig],
        hyp: Hypothesis,
        trace: DecodingTrace,
        stop_reason: str,
        eos_id: int,
    ) -> "TraceRecord":
        return cls(
            id=utt_id,
            policy=policy,
            src_len=trace.src_len,
            frame_ms=trace.frame_ms,
            steps=trace.steps,
            stop_reason=stop_reason,
            eos_id=eos_id,
            finished=hyp.finished,
        )

    def to_result(self) -> Tuple[Hypothesis, DecodingTrace]:
        trace = DecodingTrace(self.steps, self.src_len, self.frame_ms)
        eos_step = self.steps[-1].t if self.finished and self.steps else None
        return hypothesis_from_steps(self.steps, self.eos_id, eos_step), trace

    def to_dict(self) -> dict:
        steps = []
        for i, step in enumerate(self.steps):
            tokens = list(step.token_ids)
            if self.finished and i == len(self.steps) - 1:
                tokens.append(self.eos_id)
            steps.append({"t": step.t, "g": step.frames_read, "tokens": tokens})
        p = self.policy
        return {
            "id": self.id,
            "k": p.k if p else None,
            "s": p.s if p else None,
            "N": p.N if p else None,
            "src_len": self.src_len,
            "frame_ms": self.frame_ms,
            "eos_id": self.eos_id,
            "steps": steps,
            "stop_reason": self.stop_reason,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TraceRecord":
        try:
            eos_id = int(data["eos_id"])
            k, s, n = data["k"], data["s"], data["N"]
            policy = None if k is None else PolicyConfig(int(k), int(s), int(n))
            raw_steps = data["steps"]
            steps = []
            finished = False
            for i, st in enumerate(raw_steps):
                tokens = [int(x) for x in st["tokens"]]
                if eos_id in tokens:
                    if i != len(raw_steps) - 1 or tokens[-1] != eos_id or tokens.count(eos_id) > 1:
                        raise FormatError(f"eos may only close the final step (step {st['t']})")
                    tokens = tokens[:-1]
                    finished = True
                steps.append(TraceStep(t=int(st["t"]), frames_read=int(st["g"]), token_ids=tuple(tokens)))
            stop = str(data["stop_reason"])
            if stop not in {r.value for r in StopReason} | {OFFLINE_STOP}:
                raise FormatError(f"unknown stop_reason {stop!r}")
            return cls(
                id=str(data["id"]),
                policy=policy,
                src_len=int(data["src_len"]),
                frame_ms=float(data["frame_ms"]),
                steps=tuple(steps),
                stop_reason=stop,
                eos_id=eos_id,
                finished=finished,
            )
        except FormatError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"invalid trace record: {e}") from e


def write_traces(path: Union[str, Path], records: Iterable[TraceRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")
    return path


def read_traces(path: Union[str, Path]) -> List[TraceRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(TraceRecord.from_dict(json.loads(line)))
            except json.JSONDecodeError as e:
                raise FormatError(f"{path}:{lineno}: {e}") from e
            except FormatError as e:
                raise FormatError(f"{path}:{lineno}: {e}") from e
    return records

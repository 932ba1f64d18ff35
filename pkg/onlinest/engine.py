"""
Online decoding loop and the offline greedy baseline.

At every step t the engine reads up to g(t) frames, re-encodes the whole
prefix (the encoder is bidirectional), then decodes at most N tokens from
the cached decoder state of the last committed token. An eos produced
before the source is fully read is dropped together with its decoder state
and reading resumes; an eos with the whole source read ends the utterance.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, List, Optional

from onlinest.config import EngineConfig
from onlinest.errors import ConfigurationError, TransportError
from onlinest.model.base import EncoderStates, SpeechTranslationModel, encoder_length, predict
from onlinest.policy import Schedule, frames_at_step
from onlinest.types import AudioFeatures, DecodingTrace, Hypothesis, TraceStep, hypothesis_from_steps

logger = logging.getLogger(__name__)


class StopReason(str, Enum):
    """Why an online decoding session ended."""
    EOS_AFTER_FULL_READ = "eos_after_full_read"
    MAX_LENGTH = "max_length"
    INTERRUPTED = "interrupted"  # transport failure; only seen on partial results


@dataclass(frozen=True)
class OnlineResult:
    """Output buffer Y plus the trace that produced it."""
    hypothesis: Hypothesis
    trace: DecodingTrace
    stop_reason: StopReason


def max_output_length(src_len: int, max_length_ratio: float) -> int:
    """Largest |Y| allowed: floor(ratio * ceil(|X| / 4)); eos is not counted."""
    # exact decimal product: 0.29 * 100 must give 29, not 28
    return math.floor(Fraction(str(max_length_ratio)) * encoder_length(src_len))


def _check_dims(model: SpeechTranslationModel, features: AudioFeatures) -> None:
    if features.dim != model.input_dim:
        raise ConfigurationError(f"features have D={features.dim}, model expects D={model.input_dim}")


def _end_utterance(model: SpeechTranslationModel, utt_id: Optional[str]) -> None:
    try:
        model.end_utterance()
    except TransportError:
        logger.warning(f"[OnlineDecoder] Could not close remote utterance {utt_id!r}")


class _Session:
    """Mutable state of one online decoding run."""

    def __init__(self, model: SpeechTranslationModel, features: AudioFeatures, cfg: EngineConfig):
        self.model = model
        self.features = features
        self.policy = cfg.policy
        self.schedule = Schedule(cfg.policy, features.num_frames)
        self.limit = max_output_length(features.num_frames, cfg.max_length_ratio)
        self.eos_id = model.vocab.eos_id

        self.steps: List[TraceStep] = []
        self.committed = 0
        self.z: Any = None
        self.y_prev = model.vocab.bos_id
        self.enc: Optional[EncoderStates] = None
        self.eos_step: Optional[int] = None

    def read(self, t: int) -> int:
        g = frames_at_step(self.schedule, t)
        # once the whole source is read the cached full encoding is reused
        if self.enc is None or g > self.enc.source_frames_consumed:
            self.enc = self.model.encode(self.features.prefix(g))
        return g

    def write(self, t: int, g: int) -> bool:
        """Decode up to N tokens; returns True when eos was predicted."""
        z, y_prev = self.z, self.y_prev
        emitted: List[int] = []
        eos = False
        while len(emitted) < self.policy.N and self.committed + len(emitted) < self.limit:
            z_new, scores = self.model.decode_step(self.enc, z, y_prev)
            y = predict(scores)
            if y == self.eos_id:
                eos = True
                break
            emitted.append(y)
            z, y_prev = z_new, y

        self.model.commit(len(emitted))
        if eos:
            self.model.rollback()
            if g < self.schedule.src_len:
                logger.debug(f"[OnlineDecoder] t={t}: early eos at g={g}, kept {len(emitted)} token(s)")
        self.z, self.y_prev = z, y_prev
        self.committed += len(emitted)
        self.steps.append(TraceStep(t=t, frames_read=g, token_ids=tuple(emitted)))
        logger.debug(f"[OnlineDecoder] t={t} g={g} w={len(emitted)} |Y|={self.committed}")
        return eos

    def result(self, stop_reason: StopReason) -> OnlineResult:
        trace = DecodingTrace(tuple(self.steps), self.features.num_frames, self.features.frame_ms)
        hyp = hypothesis_from_steps(self.steps, self.eos_id, self.eos_step)
        return OnlineResult(hypothesis=hyp, trace=trace, stop_reason=stop_reason)


def online_decode(
    model: SpeechTranslationModel,
    features: AudioFeatures,
    cfg: EngineConfig,
    utt_id: Optional[str] = None,
) -> OnlineResult:
    """Simultaneous greedy decoding under the (k, s, N) policy of cfg."""
    _check_dims(model, features)
    session = _Session(model, features, cfg)
    src_len = features.num_frames

    model.begin_utterance(utt_id)
    try:
        session.z = model.init_decoder_state()
        t = 0
        while True:
            if session.steps and session.committed >= session.limit:
                stop = StopReason.MAX_LENGTH
                break
            t += 1
            g = session.read(t)
            eos = session.write(t, g)
            if eos and g >= src_len:
                session.eos_step = t
                stop = StopReason.EOS_AFTER_FULL_READ
                break
    except TransportError as e:
        e.partial = session.result(StopReason.INTERRUPTED)
        raise
    finally:
        _end_utterance(model, utt_id)

    result = session.result(stop)
    logger.debug(
        f"[OnlineDecoder] {utt_id or 'utterance'}: {stop.value} after {len(session.steps)} steps, "
        f"|Y|={session.committed}, policy={cfg.policy.label}"
    )
    return result


def offline_greedy(
    model: SpeechTranslationModel,
    features: AudioFeatures,
    max_length_ratio: float,
    utt_id: Optional[str] = None,
) -> Hypothesis:
    """Encode the full source once and decode argmax tokens until eos or the length limit."""
    _check_dims(model, features)
    if not max_length_ratio > 0:
        raise ConfigurationError(f"max_length_ratio must be > 0, got {max_length_ratio}")
    limit = max_output_length(features.num_frames, max_length_ratio)
    eos_id = model.vocab.eos_id

    tokens: List[int] = []
    model.begin_utterance(utt_id)
    try:
        enc = model.encode(features)
        z = model.init_decoder_state()
        y_prev = model.vocab.bos_id
        while len(tokens) < limit:
            z_new, scores = model.decode_step(enc, z, y_prev)
            y = predict(scores)
            if y == eos_id:
                model.rollback()
                tokens.append(eos_id)
                break
            model.commit(1)
            tokens.append(y)
            z, y_prev = z_new, y
    finally:
        _end_utterance(model, utt_id)

    return Hypothesis(tuple(tokens), tuple([1] * len(tokens)), eos_id=eos_id)


def offline_trace(hypothesis: Hypothesis, features: AudioFeatures) -> DecodingTrace:
    """Single-step trace of a full-wait decoding: g(1) = |X|, w_1 = |Y|."""
    step = TraceStep(t=1, frames_read=features.num_frames, token_ids=hypothesis.content_ids)
    return DecodingTrace((step,), features.num_frames, features.frame_ms)

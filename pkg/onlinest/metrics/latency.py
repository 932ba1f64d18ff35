"""Average Lagging family.

Token-level AL works on a DecodingTrace in source frames:

    AL       = 1/tau * sum_{t<=tau} [g(t) - (t-1)/gamma]
    AL_w     = 1/tau * sum_{t<=tau} [g(t) - (t-1)/gamma] * w_t

with gamma = |Y| / |X| and tau the cut-off step. Word-level AL applies the
same formula to per-word delays in ms, with gamma taken from the reference
word count (adaptive) or from the hypothesis word count.

(t-1)/gamma is evaluated as (t-1) * |X| / |Y| so that exact inputs give
exact results. Negative values are returned unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from onlinest.errors import ArgumentError, UndefinedMetricError
from onlinest.tokenization import CharDelay, hypothesis_words
from onlinest.types import DecodingTrace, Hypothesis, Vocabulary


class ALVariant(str, Enum):
    WORD_ADAPTIVE = "word_adaptive"
    WORD_ORIGINAL = "word_original"
    TOKEN_ORIGINAL = "token_original"
    TOKEN_WEIGHTED = "token_weighted"


def frames_to_ms(frames: float, frame_ms: float) -> float:
    return frames * frame_ms


def _lag_terms(trace: DecodingTrace, target_len: int) -> List[float]:
    """g(t) - (t-1)/gamma for t = 1..tau."""
    if target_len < 1:
        raise ArgumentError(f"gamma = 0: target_len must be >= 1, got {target_len}")
    if not trace.steps:
        raise ArgumentError("trace has no steps")
    return [
        trace.frames_at(t) - (t - 1) * trace.src_len / target_len
        for t in range(1, trace.cutoff() + 1)
    ]


def al_original(trace: DecodingTrace, target_len: int) -> float:
    """Token-level AL in frames."""
    terms = _lag_terms(trace, target_len)
    return sum(terms) / len(terms)


def al_weighted(trace: DecodingTrace, target_len: int) -> float:
    """Token-level AL with each step's lag weighted by the tokens it wrote; still divided by tau."""
    terms = _lag_terms(trace, target_len)
    return sum(term * step.emitted for term, step in zip(terms, trace.steps)) / len(terms)


@dataclass(frozen=True)
class WordDelaySequence:
    """Per-word delays d_i in ms against a source of source_ms."""
    delays_ms: Tuple[float, ...]
    source_ms: float

    def __post_init__(self):
        delays = tuple(float(d) for d in self.delays_ms)
        object.__setattr__(self, "delays_ms", delays)
        if not self.source_ms > 0:
            raise ArgumentError(f"source_ms must be > 0, got {self.source_ms}")
        if any(b < a for a, b in zip(delays, delays[1:])):
            raise ArgumentError("word delays must be non-decreasing")
        if delays and delays[-1] > self.source_ms:
            raise ArgumentError(f"word delay {delays[-1]} exceeds source duration {self.source_ms}")

    def __len__(self) -> int:
        return len(self.delays_ms)

    def gamma(self, word_count: int) -> float:
        """Words per ms."""
        return word_count / self.source_ms


def al_word_adaptive(
    words: WordDelaySequence,
    ref_word_count: int,
    src_ms: Optional[float] = None,
    adaptive: bool = True,
) -> float:
    """Word-level AL in ms.

    adaptive=False takes gamma from the hypothesis word count, which is the
    original metric evaluated on word delays.
    """
    if not words.delays_ms:
        raise UndefinedMetricError("word-level AL is undefined for an empty word sequence")
    src_ms = words.source_ms if src_ms is None else float(src_ms)
    count = ref_word_count if adaptive else len(words)
    if count < 1:
        raise ArgumentError(f"gamma = 0: word count must be >= 1, got {count}")

    delays = words.delays_ms
    tau = next((i for i, d in enumerate(delays, start=1) if d >= src_ms), len(delays))
    total = sum(delays[i - 1] - (i - 1) * src_ms / count for i in range(1, tau + 1))
    return total / tau


def word_delays(
    hyp: Hypothesis,
    trace: DecodingTrace,
    vocab: Vocabulary,
    char_delay: CharDelay = CharDelay.SEPARATOR,
) -> WordDelaySequence:
    """Delay of each hypothesis word: frames read at its completing step, in ms."""
    delays = [trace.frames_at(step) * trace.frame_ms for _, step in hypothesis_words(hyp, vocab, char_delay)]
    return WordDelaySequence(tuple(delays), trace.src_ms)


def utterance_al_ms(
    hyp: Hypothesis,
    trace: DecodingTrace,
    vocab: Vocabulary,
    reference: str,
    variant: ALVariant = ALVariant.WORD_ADAPTIVE,
    char_delay: CharDelay = CharDelay.SEPARATOR,
) -> float:
    """AL of one utterance in ms under the chosen variant.

    An empty hypothesis scores the full source duration.
    """
    variant = ALVariant(variant)
    if variant in (ALVariant.TOKEN_ORIGINAL, ALVariant.TOKEN_WEIGHTED):
        if len(hyp) == 0:
            return trace.src_ms
        fn = al_original if variant == ALVariant.TOKEN_ORIGINAL else al_weighted
        return frames_to_ms(fn(trace, len(hyp)), trace.frame_ms)

    words = word_delays(hyp, trace, vocab, char_delay)
    if not words.delays_ms:
        return trace.src_ms
    ref_words = len(reference.split())
    return al_word_adaptive(words, ref_words, adaptive=variant == ALVariant.WORD_ADAPTIVE)


def mean_al(values: Sequence[float]) -> float:
    """Corpus AL: unweighted mean of per-utterance AL."""
    if not values:
        raise UndefinedMetricError("cannot average AL over zero utterances")
    return sum(values) / len(values)

import math
import random

import pytest

from onlinest.errors import ArgumentError, UndefinedMetricError
from onlinest.metrics.latency import (
    ALVariant,
    WordDelaySequence,
    al_original,
    al_weighted,
    al_word_adaptive,
    mean_al,
    utterance_al_ms,
    word_delays,
)
from onlinest.types import SPACE, DecodingTrace, Hypothesis, TraceStep, Vocabulary


def _trace(gs, ws, src_len, frame_ms=10.0):
    steps = [TraceStep(t, g, tuple([3] * w)) for t, (g, w) in enumerate(zip(gs, ws), start=1)]
    return DecodingTrace(tuple(steps), src_len, frame_ms)


def _random_trace(rng):
    src = rng.randint(1, 300)
    k, s, n = rng.randint(1, 350), rng.randint(1, 40), rng.randint(1, 4)
    gs, t = [], 1
    while True:
        g = min(k + (t - 1) * s, src)
        gs.append(g)
        if g >= src and rng.random() < 0.3:
            break
        t += 1
    ws = [rng.randint(0, n) for _ in gs]
    if not sum(ws):
        ws[-1] = 1
    return _trace(gs, ws, src)


def _oracle_al(trace, target_len, weighted=False):
    gamma = target_len / trace.src_len
    tau = next((st.t for st in trace.steps if st.frames_read >= trace.src_len), len(trace.steps))
    total = 0.0
    for t in range(1, tau + 1):
        term = trace.steps[t - 1].frames_read - (t - 1) / gamma
        total += term * (trace.steps[t - 1].emitted if weighted else 1)
    return total / tau


def _close(a, b):
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)


class TestTokenAL:
    def test_worked_example(self):
        trace = _trace([4, 6, 8, 10], [2, 1, 1, 1], src_len=10)
        assert al_original(trace, 5) == 4.0

    def test_weighted_worked_example(self):
        trace = _trace([4, 6, 8, 10], [2, 2, 2, 2], src_len=10)
        assert al_weighted(trace, 8) == 10.25

    def test_unit_lag(self):
        trace = _trace(list(range(1, 21)), [1] * 20, src_len=20)
        assert al_original(trace, 20) == 1.0

    def test_offline_trace_is_source_length(self):
        assert al_original(_trace([37], [9], src_len=37), 9) == 37.0

    def test_steps_after_cutoff_ignored(self):
        trace = _trace([4, 6, 8, 10, 10, 10], [1, 1, 1, 1, 1, 1], src_len=10)
        assert _close(al_original(trace, 6), _oracle_al(_trace([4, 6, 8, 10], [1] * 4, 10), 6))

    def test_negative_value_returned_unchanged(self):
        assert al_original(_trace([1, 2], [1, 0], src_len=10), 1) == -3.5

    def test_gamma_zero(self):
        with pytest.raises(ArgumentError):
            al_original(_trace([4], [0], src_len=4), 0)
        with pytest.raises(ArgumentError):
            al_weighted(DecodingTrace((), 4), 2)

    def test_unit_weights_match_original(self):
        rng = random.Random(7)
        for _ in range(1000):
            tr = _random_trace(rng)
            unit = _trace(tr.frames_read, [1] * len(tr.steps), tr.src_len)
            y = rng.randint(1, 50)
            assert al_weighted(unit, y) == al_original(unit, y)

    def test_matches_direct_summation(self):
        rng = random.Random(11)
        for _ in range(1000):
            tr = _random_trace(rng)
            assert _close(al_original(tr, tr.target_len), _oracle_al(tr, tr.target_len))
            assert _close(al_weighted(tr, tr.target_len), _oracle_al(tr, tr.target_len, weighted=True))


class TestWordAL:
    def test_worked_example(self):
        words = WordDelaySequence((1000.0, 1100.0, 1200.0), 2000.0)
        assert math.isclose(al_word_adaptive(words, 3), 1300 / 3, rel_tol=1e-12)

    def test_offline_delays_give_source_duration(self):
        words = WordDelaySequence((2000.0,) * 5, 2000.0)
        assert al_word_adaptive(words, 7) == 2000.0

    def test_reference_count_only_used_when_adaptive(self):
        words = WordDelaySequence((1000.0, 1100.0, 1200.0), 2000.0)
        adaptive = al_word_adaptive(words, 6)
        original = al_word_adaptive(words, 6, adaptive=False)
        assert math.isclose(original, 1300 / 3, rel_tol=1e-12)
        assert adaptive > original

    def test_cutoff_at_first_full_delay(self):
        words = WordDelaySequence((500.0, 1000.0, 1000.0), 1000.0)
        assert al_word_adaptive(words, 2) == (500.0 + 1000.0 - 500.0) / 2

    def test_matches_direct_summation(self):
        rng = random.Random(5)
        for _ in range(1000):
            src = rng.uniform(100.0, 5000.0)
            delays = sorted(rng.uniform(0.0, src) for _ in range(rng.randint(1, 12)))
            if rng.random() < 0.5:
                delays.append(src)
            ref = rng.randint(1, 15)
            gamma = ref / src
            tau = next((i for i, d in enumerate(delays, 1) if d >= src), len(delays))
            expected = sum(delays[i - 1] - (i - 1) / gamma for i in range(1, tau + 1)) / tau
            assert _close(al_word_adaptive(WordDelaySequence(tuple(delays), src), ref), expected)

    def test_undefined_and_invalid(self):
        with pytest.raises(UndefinedMetricError):
            al_word_adaptive(WordDelaySequence((), 1000.0), 3)
        with pytest.raises(ArgumentError):
            al_word_adaptive(WordDelaySequence((10.0,), 1000.0), 0)
        with pytest.raises(ArgumentError):
            WordDelaySequence((20.0, 10.0), 1000.0)
        with pytest.raises(ArgumentError):
            WordDelaySequence((2000.0,), 1000.0)
        with pytest.raises(ArgumentError):
            WordDelaySequence((), 0.0)


class TestUtteranceAL:
    vocab = Vocabulary.for_chars("abc")

    def _hyp(self, text_ids, steps):
        return Hypothesis(tuple(text_ids) + (self.vocab.eos_id,), tuple(steps), eos_id=self.vocab.eos_id)

    def _ids(self, text):
        return [self.vocab.id_of(SPACE if c == " " else c) for c in text]

    def test_word_delays_in_ms(self):
        hyp = self._hyp(self._ids("ab c"), [1, 1, 2, 3, 3])
        trace = _trace([20, 30, 40], [2, 1, 1], src_len=40)
        assert word_delays(hyp, trace, self.vocab).delays_ms == (300.0, 400.0)

    def test_offline_trace_scores_source_duration(self):
        hyp = self._hyp(self._ids("ab c"), [1] * 5)
        trace = _trace([50], [4], src_len=50)
        for variant in (ALVariant.WORD_ADAPTIVE, ALVariant.WORD_ORIGINAL, ALVariant.TOKEN_ORIGINAL):
            assert utterance_al_ms(hyp, trace, self.vocab, "ab c", variant) == 500.0
        # one step that wrote all four tokens
        assert utterance_al_ms(hyp, trace, self.vocab, "ab c", ALVariant.TOKEN_WEIGHTED) == 2000.0

    def test_empty_hypothesis_scores_source_duration(self):
        hyp = Hypothesis((self.vocab.eos_id,), (3,), eos_id=self.vocab.eos_id)
        trace = _trace([10, 20, 30], [0, 0, 0], src_len=30)
        for variant in ALVariant:
            assert utterance_al_ms(hyp, trace, self.vocab, "a b", variant) == 300.0

    def test_variant_selects_formula(self):
        hyp = self._hyp(self._ids("ab c"), [1, 1, 2, 3, 3])
        trace = _trace([20, 30, 40], [2, 1, 1], src_len=40)
        token = utterance_al_ms(hyp, trace, self.vocab, "ab c", "token_original")
        assert math.isclose(token, 10.0 * al_original(trace, 4))
        word = utterance_al_ms(hyp, trace, self.vocab, "ab c a", ALVariant.WORD_ADAPTIVE)
        assert math.isclose(word, (300.0 + 400.0 - 400.0 / 3) / 2)


def test_mean_al():
    assert mean_al([100.0, 200.0, 600.0]) == 300.0
    with pytest.raises(UndefinedMetricError):
        mean_al([])

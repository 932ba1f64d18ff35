from onlinest.metrics.bleu import BleuEvaluator, corpus_bleu
from onlinest.metrics.latency import (
    ALVariant,
    WordDelaySequence,
    al_original,
    al_weighted,
    al_word_adaptive,
    frames_to_ms,
    mean_al,
    utterance_al_ms,
    word_delays,
)

__all__ = [
    "ALVariant",
    "BleuEvaluator",
    "WordDelaySequence",
    "al_original",
    "al_weighted",
    "al_word_adaptive",
    "corpus_bleu",
    "frames_to_ms",
    "mean_al",
    "utterance_al_ms",
    "word_delays",
]

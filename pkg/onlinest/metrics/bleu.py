"""
Corpus BLEU evaluation
"""
from typing import Sequence

from sacrebleu.metrics import BLEU

from onlinest.errors import ArgumentError


class BleuEvaluator:
    """4-gram corpus BLEU over whitespace tokens, with brevity penalty and no smoothing.

    effective_order keeps single-word references scorable: n-gram orders
    with no candidates are left out of the geometric mean.
    """

    def __init__(self, tokenize: str = "none"):
        self.bleu_model = BLEU(tokenize=tokenize, smooth_method="none", effective_order=True)

    def evaluate_corpus(self, hypotheses: Sequence[str], references: Sequence[str]) -> float:
        if len(hypotheses) != len(references):
            raise ArgumentError(
                f"hypothesis/reference count mismatch: {len(hypotheses)} vs {len(references)}"
            )
        if not hypotheses:
            raise ArgumentError("cannot score an empty corpus")
        result = self.bleu_model.corpus_score(list(hypotheses), [list(references)])
        return round(float(result.score), 8)


_default = BleuEvaluator()


def corpus_bleu(hypotheses: Sequence[str], references: Sequence[str]) -> float:
    """BLEU percentage in [0, 100]."""
    return _default.evaluate_corpus(hypotheses, references)

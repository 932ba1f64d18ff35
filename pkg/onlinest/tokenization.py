"""Character and BPE token handling, detokenization and word-boundary detection.

BPE tokens carry an "@@" suffix on every non-word-final unit, so a word is
complete as soon as a token without the marker is emitted. Character tokens
use a visible space symbol; a char word completes at the separator after it.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from onlinest.errors import ArgumentError, FormatError
from onlinest.types import CONTINUATION, EOS, SPACE, Granularity, Hypothesis, Vocabulary


class CharDelay(str, Enum):
    """Which emission commits a char-model word's delay."""
    SEPARATOR = "separator"
    LAST_CHAR = "last_char"


@dataclass(frozen=True)
class BpeModel:
    """Ordered merge list; merges are applied top-down inside each word."""
    merges: Tuple[Tuple[str, str], ...] = ()

    def __post_init__(self):
        merges = tuple((str(a), str(b)) for a, b in self.merges)
        for a, b in merges:
            if not a or not b:
                raise ArgumentError("merge symbols must be non-empty")
        object.__setattr__(self, "merges", merges)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "BpeModel":
        merges = []
        with open(path, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise FormatError(f"{path}:{lineno}: expected two space-separated symbols, got {line!r}")
                merges.append((parts[0], parts[1]))
        return cls(tuple(merges))

    def to_file(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for a, b in self.merges:
                f.write(f"{a} {b}\n")

    def segment(self, word: str) -> List[str]:
        """Split one word into units by applying every merge in order."""
        units = list(word)
        for first, second in self.merges:
            merged: List[str] = []
            i = 0
            while i < len(units):
                if i < len(units) - 1 and units[i] == first and units[i + 1] == second:
                    merged.append(first + second)
                    i += 2
                else:
                    merged.append(units[i])
                    i += 1
            units = merged
        return units

    def units(self, alphabet: Iterable[str]) -> List[str]:
        """Every unit segmentation can produce: the alphabet plus one unit per merge."""
        return list(dict.fromkeys([*alphabet, *(a + b for a, b in self.merges)]))

    def vocabulary(self, alphabet: Iterable[str]) -> Vocabulary:
        return Vocabulary.for_subwords(u for u in self.units(alphabet) if not u.isspace())

    def encode(self, text: str) -> List[str]:
        """Whitespace-split text into BPE tokens with continuation markers attached."""
        tokens: List[str] = []
        for word in text.split():
            units = self.segment(word)
            tokens.extend(u + CONTINUATION for u in units[:-1])
            tokens.append(units[-1])
        return tokens


def _symbols(text: str, vocab: Vocabulary, bpe: Optional[BpeModel]) -> List[str]:
    if vocab.granularity == Granularity.CHAR:
        return [SPACE if c == " " else c for c in text]
    return (bpe or BpeModel()).encode(text)


def tokenize(text: str, vocab: Vocabulary, bpe: Optional[BpeModel] = None) -> List[int]:
    """Map text to token ids; BPE mode normalizes whitespace to single spaces."""
    if not text:
        raise ArgumentError("cannot tokenize empty text")
    return [vocab.id_of(sym) for sym in _symbols(text, vocab, bpe)]


def _as_strings(tokens: Iterable[Union[int, str]], vocab: Vocabulary) -> List[str]:
    out = []
    for tok in tokens:
        if isinstance(tok, str):
            out.append(tok)
        else:
            if vocab.is_special(tok):
                continue
            out.append(vocab.token_of(tok))
    return [t for t in out if t not in (vocab.tokens[vocab.bos_id], vocab.tokens[vocab.eos_id])]


def detokenize(tokens: Iterable[Union[int, str]], vocab: Vocabulary) -> str:
    """Inverse of tokenize; special tokens are dropped."""
    strings = _as_strings(tokens, vocab)
    if vocab.granularity == Granularity.CHAR:
        return "".join(" " if t == SPACE else t for t in strings)
    text = " ".join(strings).replace(CONTINUATION + " ", "")
    if text.endswith(CONTINUATION):
        text = text[: -len(CONTINUATION)]
    return text


def word_boundaries(
    tokens: Sequence[Tuple[str, int]],
    granularity: Granularity,
    eos_token: str = EOS,
    char_delay: CharDelay = CharDelay.SEPARATOR,
) -> List[Tuple[str, int]]:
    """Group (token, emission step) pairs into (word, completing step) pairs.

    Tokens after eos are ignored. A word still open at the end of the
    sequence completes at the step of its last token. Leading and repeated
    char separators yield no empty words, so joining the words with single
    spaces reproduces the detokenized text only for whitespace-normalized
    output.
    """
    granularity = Granularity(granularity)
    char_delay = CharDelay(char_delay)
    words: List[Tuple[str, int]] = []
    pieces: List[str] = []
    last_step: Optional[int] = None

    def close(step: int) -> None:
        words.append(("".join(pieces), step))
        pieces.clear()

    for tok, step in tokens:
        if tok == eos_token:
            if pieces:
                close(step if granularity == Granularity.BPE or char_delay == CharDelay.SEPARATOR else last_step)
            return words

        if granularity == Granularity.CHAR:
            if tok == SPACE:
                if pieces:
                    close(step if char_delay == CharDelay.SEPARATOR else last_step)
            else:
                pieces.append(tok)
        else:
            if tok.endswith(CONTINUATION):
                pieces.append(tok[: -len(CONTINUATION)])
            else:
                pieces.append(tok)
                close(step)
        last_step = step

    if pieces:
        close(last_step)
    return words


def hypothesis_words(
    hyp: Hypothesis,
    vocab: Vocabulary,
    char_delay: CharDelay = CharDelay.SEPARATOR,
) -> List[Tuple[str, int]]:
    """Words of a hypothesis with the decoding step that completed each."""
    bos = vocab.tokens[vocab.bos_id]
    pairs = [
        (vocab.token_of(tid), step)
        for tid, step in zip(hyp.token_ids, hyp.emitted_at_step)
        if vocab.token_of(tid) != bos
    ]
    return word_boundaries(pairs, vocab.granularity, vocab.tokens[vocab.eos_id], char_delay)

import random

import pytest

from onlinest.errors import ArgumentError, FormatError, UnknownTokenError
from onlinest.tokenization import (
    BpeModel,
    CharDelay,
    detokenize,
    hypothesis_words,
    tokenize,
    word_boundaries,
)
from onlinest.types import EOS, SPACE, Granularity, Hypothesis, Vocabulary


def test_char_tokenize():
    vocab = Vocabulary.for_chars("abc")
    ids = tokenize("ab c", vocab)
    assert [vocab.token_of(i) for i in ids] == ["a", "b", SPACE, "c"]
    assert detokenize(ids, vocab) == "ab c"


def test_char_roundtrip_random_strings():
    vocab = Vocabulary.for_chars("abcdefgh")
    rng = random.Random(0)
    for _ in range(1000):
        text = "".join(rng.choice("abcdefgh ") for _ in range(rng.randint(1, 30)))
        assert detokenize(tokenize(text, vocab), vocab) == text


def test_detokenize_drops_specials():
    vocab = Vocabulary.for_chars("ab")
    ids = [vocab.bos_id, vocab.id_of("a"), vocab.id_of("b"), vocab.eos_id]
    assert detokenize(ids, vocab) == "ab"


def test_bpe_encode_and_detokenize():
    bpe = BpeModel((("l", "o"),))
    assert bpe.segment("low") == ["lo", "w"]
    assert bpe.encode("low  lo") == ["lo@@", "w", "lo"]

    vocab = Vocabulary.for_subwords(["lo", "w"])
    ids = tokenize("low lo", vocab, bpe)
    assert [vocab.token_of(i) for i in ids] == ["lo@@", "w", "lo"]
    assert detokenize(ids, vocab) == "low lo"
    assert detokenize(["lo@@", "w@@"], vocab) == "low"


def test_merges_apply_in_order():
    bpe = BpeModel((("a", "b"), ("ab", "c"), ("c", "c")))
    assert bpe.segment("abcc") == ["abc", "c"]


def test_merge_file_io(tmp_path):
    path = tmp_path / "merges.txt"
    path.write_text("# merges\nl o\n\nlo w\n", encoding="utf-8")
    bpe = BpeModel.from_file(path)
    assert bpe.merges == (("l", "o"), ("lo", "w"))

    out = tmp_path / "copy.txt"
    bpe.to_file(out)
    assert BpeModel.from_file(out) == bpe

    path.write_text("l o x\n", encoding="utf-8")
    with pytest.raises(FormatError, match=":1:"):
        BpeModel.from_file(path)


def test_tokenize_errors():
    vocab = Vocabulary.for_chars("ab")
    with pytest.raises(ArgumentError):
        tokenize("", vocab)
    with pytest.raises(UnknownTokenError):
        tokenize("abz", vocab)


class TestWordBoundaries:
    CHAR_PAIRS = [("a", 1), ("b", 2), (SPACE, 2), ("c", 3), (EOS, 4)]

    def test_char_words_complete_at_separator(self):
        assert word_boundaries(self.CHAR_PAIRS, Granularity.CHAR) == [("ab", 2), ("c", 4)]

    def test_char_words_complete_at_last_char(self):
        words = word_boundaries(self.CHAR_PAIRS, Granularity.CHAR, char_delay=CharDelay.LAST_CHAR)
        assert words == [("ab", 2), ("c", 3)]

    def test_bpe_words(self):
        pairs = [("Hel@@", 1), ("lo", 2), ("wor@@", 3), ("ld", 4), (EOS, 4)]
        assert word_boundaries(pairs, Granularity.BPE) == [("Hello", 2), ("world", 4)]

    def test_tokens_after_eos_ignored(self):
        pairs = [("x", 1), (EOS, 2), ("y", 3)]
        assert word_boundaries(pairs, "char") == [("x", 2)]

    def test_open_word_completes_at_last_token(self):
        assert word_boundaries([("a", 1), ("b", 3)], Granularity.CHAR) == [("ab", 3)]
        assert word_boundaries([("lo@@", 2)], Granularity.BPE) == [("lo", 2)]

    def test_repeated_separators_collapse(self):
        pairs = [("a", 1), (SPACE, 1), (SPACE, 2), ("b", 3)]
        assert word_boundaries(pairs, Granularity.CHAR) == [("a", 1), ("b", 3)]

    def test_empty(self):
        assert word_boundaries([], Granularity.CHAR) == []


def test_hypothesis_words_skip_bos():
    vocab = Vocabulary.for_chars("ab")
    a, b, sp = vocab.id_of("a"), vocab.id_of("b"), vocab.id_of(SPACE)
    hyp = Hypothesis((vocab.bos_id, a, sp, b, vocab.eos_id), (1, 1, 2, 3, 5), eos_id=vocab.eos_id)
    assert hypothesis_words(hyp, vocab) == [("a", 2), ("b", 5)]
    assert hypothesis_words(hyp, vocab, CharDelay.LAST_CHAR) == [("a", 1), ("b", 3)]


def _random_bpe(rng, alphabet):
    symbols, merges = list(alphabet), []
    for _ in range(rng.randint(0, 8)):
        a, b = rng.choice(symbols), rng.choice(symbols)
        merges.append((a, b))
        symbols.append(a + b)
    return BpeModel(tuple(merges))


def _random_words(rng, alphabet):
    return ["".join(rng.choice(alphabet) for _ in range(rng.randint(1, 6))) for _ in range(rng.randint(1, 6))]


def _with_steps(rng, symbols):
    step, pairs = 1, []
    for sym in symbols:
        step += rng.randint(0, 2)
        pairs.append((sym, step))
    return pairs


def test_bpe_roundtrip_random_strings():
    rng = random.Random(1)
    for _ in range(1000):
        bpe = _random_bpe(rng, "abcd")
        vocab = bpe.vocabulary("abcd")
        words = _random_words(rng, "abcd")
        text = "".join(" " * rng.randint(0, 2) + w for w in words) + " " * rng.randint(0, 2)
        assert detokenize(tokenize(text, vocab, bpe), vocab) == " ".join(words)


def test_bpe_vocabulary_covers_merge_units():
    bpe = BpeModel((("l", "o"), ("lo", "w")))
    assert bpe.units("low") == ["l", "o", "w", "lo", "low"]
    vocab = bpe.vocabulary("low")
    assert vocab.granularity == Granularity.BPE
    assert "low@@" in vocab.tokens and "lo" in vocab.tokens


@pytest.mark.parametrize("char_delay", list(CharDelay))
def test_char_words_rejoin_to_text(char_delay):
    vocab = Vocabulary.for_chars("abc")
    rng = random.Random(4)
    for _ in range(500):
        text = " ".join(_random_words(rng, "abc")) + " " * rng.randint(0, 1)
        symbols = [vocab.token_of(i) for i in tokenize(text, vocab)]
        if rng.random() < 0.5:
            symbols.append(EOS)
        words = word_boundaries(_with_steps(rng, symbols), Granularity.CHAR, char_delay=char_delay)
        assert " ".join(w for w, _ in words) == detokenize(symbols, vocab).rstrip(" ")
        steps = [s for _, s in words]
        assert steps == sorted(steps)


def test_bpe_words_rejoin_to_text():
    rng = random.Random(6)
    for _ in range(500):
        bpe = _random_bpe(rng, "abc")
        vocab = bpe.vocabulary("abc")
        text = " ".join(_random_words(rng, "abc"))
        symbols = bpe.encode(text)
        # a cut-off hypothesis may end inside a word
        symbols = symbols[: rng.randint(1, len(symbols))]
        if rng.random() < 0.5:
            symbols.append(EOS)
        words = word_boundaries(_with_steps(rng, symbols), Granularity.BPE)
        assert " ".join(w for w, _ in words) == detokenize(symbols, vocab)
        steps = [s for _, s in words]
        assert steps == sorted(steps)


def test_leading_separator_yields_no_empty_word():
    pairs = [(SPACE, 1), ("a", 2), (SPACE, 3), (SPACE, 3), ("b", 4), (EOS, 5)]
    assert word_boundaries(pairs, Granularity.CHAR) == [("a", 3), ("b", 5)]

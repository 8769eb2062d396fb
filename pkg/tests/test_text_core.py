import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from typoguard.text import (
    DEFAULT_CHARSET,
    CharSet,
    DataError,
    Token,
    build_vocab,
    encode_semichar,
    is_perturbable,
    load_stopwords,
    read_corpus_tsv,
    tokenize,
    write_corpus_tsv,
)

WORDS = st.text(alphabet="abcdefghijklmnopqrstuvwxyz", min_size=1, max_size=12)


# ---------------------------------------------------------------------------
# tokenizer


def test_tokenize_detaches_punctuation_and_lowercases():
    s = tokenize("A triumph, relentless")
    assert [t.surface for t in s.tokens] == ["a", "triumph", ",", "relentless"]


def test_tokenize_keeps_internal_apostrophe():
    assert [t.surface for t in tokenize("don't stop").tokens] == ["don't", "stop"]


def test_tokenize_splits_trailing_punctuation_separately():
    assert [t.surface for t in tokenize("Hello!!").tokens] == ["hello", "!", "!"]


def test_tokenize_rejects_empty_input():
    with pytest.raises(DataError):
        tokenize("   ")


def test_tokenize_detokenize_fixpoint():
    s = tokenize("Wait -- really?! 'tis a \"quoted\" word.")
    again = tokenize(s.text())
    assert [t.surface for t in again.tokens] == [t.surface for t in s.tokens]
    assert again.text() == s.text()


@given(st.lists(st.text(alphabet="abc.,!'", min_size=1, max_size=6), min_size=1, max_size=6))
def test_tokenize_fixpoint_property(chunks):
    text = " ".join(chunks)
    try:
        s = tokenize(text)
    except DataError:
        return  # nothing alphanumeric anywhere is a legitimate rejection
    assert tokenize(s.text()).text() == s.text()


def test_token_flags():
    assert Token("don't").is_word
    assert not Token(",").is_word
    assert Token("1998").char_len == 4 and not Token("1998").is_word


# ---------------------------------------------------------------------------
# vocabulary


def corpus(*texts):
    return [tokenize(t, 0) for t in texts]


def test_vocab_keeps_most_frequent():
    v = build_vocab(corpus("a b b"), cap=1)
    assert "b" in v and "a" not in v
    assert v.id_of("a") == v.unk_id


def test_vocab_under_cap_keeps_everything():
    v = build_vocab(corpus("x y"), cap=10)
    assert "x" in v and "y" in v


def test_vocab_tie_breaks_lexicographically():
    v = build_vocab(corpus("c c d d"), cap=1)
    assert "c" in v and "d" not in v


def test_vocab_unk_reserved_and_deterministic():
    c = corpus("the movie was fine", "the plot was fine")
    v1, v2 = build_vocab(c, 3), build_vocab(c, 3)
    assert v1.words == v2.words
    assert v1.word_of(v1.unk_id) == "<unk>"
    assert len(v1) <= 3 + 1


def test_vocab_rejects_bad_cap():
    with pytest.raises(DataError):
        build_vocab(corpus("a b"), cap=0)


# ---------------------------------------------------------------------------
# charset and encoding


def test_default_charset_geometry():
    assert DEFAULT_CHARSET.size == 39
    assert len(encode_semichar("word")) == 117


def test_charset_rejects_duplicates_and_missing_letters():
    with pytest.raises(ValueError):
        CharSet("aabcdefghijklmnopqrstuvwxyz0123456789#", "#")
    with pytest.raises(ValueError):
        CharSet("abcdefghijklmnopqrstuvwxyz#", "#")  # digits missing


def test_charset_index_bijection():
    cs = DEFAULT_CHARSET
    for i, c in enumerate(cs.chars):
        assert cs.index(c) == i
        assert cs.char(i) == c


def test_encode_word_blocks():
    cs = DEFAULT_CHARSET
    v = encode_semichar("word")
    k = cs.size
    assert v[cs.index("w")] == 1.0 and v[:k].sum() == 1.0
    assert v[2 * k + cs.index("d")] == 1.0 and v[2 * k:].sum() == 1.0
    bag = v[k : 2 * k]
    assert bag[cs.index("o")] == 1.0 and bag[cs.index("r")] == 1.0 and bag.sum() == 2.0


def test_encode_internal_permutation_invariance():
    np.testing.assert_array_equal(encode_semichar("beautiful"), encode_semichar("beuatiful"))


def test_encode_length_two_has_empty_bag():
    cs = DEFAULT_CHARSET
    v = encode_semichar("at")
    k = cs.size
    assert v[cs.index("a")] == 1.0 and v[2 * k + cs.index("t")] == 1.0
    assert v[k : 2 * k].sum() == 0.0


def test_encode_length_one_uses_same_char_twice():
    cs = DEFAULT_CHARSET
    v = encode_semichar("i")
    k = cs.size
    assert v[cs.index("i")] == 1.0 and v[2 * k + cs.index("i")] == 1.0
    assert v.sum() == 2.0


def test_encode_unknown_chars_collapse_to_placeholder():
    np.testing.assert_array_equal(encode_semichar("cafés"), encode_semichar("caf#s"))


def test_encode_rejects_empty_word():
    with pytest.raises(DataError):
        encode_semichar("")


@given(WORDS, st.randoms(use_true_random=False))
@settings(max_examples=200)
def test_encoding_invariant_under_internal_shuffle(word, rnd):
    internal = list(word[1:-1])
    rnd.shuffle(internal)
    permuted = word[0] + "".join(internal) + word[-1] if len(word) > 1 else word
    np.testing.assert_array_equal(encode_semichar(word), encode_semichar(permuted))


@given(WORDS)
@settings(max_examples=200)
def test_encoding_block_sums(word):
    k = DEFAULT_CHARSET.size
    v = encode_semichar(word)
    assert v.shape == (3 * k,)
    assert v[:k].sum() == 1.0
    assert v[2 * k :].sum() == 1.0
    assert v[k : 2 * k].sum() == max(len(word) - 2, 0)


# ---------------------------------------------------------------------------
# perturbability


def test_perturbable_plain_long_word():
    assert is_perturbable(Token("beautiful"), set())


def test_short_stopword_fails_both_conditions():
    assert not is_perturbable(Token("the"), {"the"})
    assert not is_perturbable(Token("the"), set())


def test_stopword_of_length_four_is_protected():
    assert not is_perturbable(Token("them"), {"them"})
    assert is_perturbable(Token("them"), set())


def test_punctuation_never_perturbable():
    assert not is_perturbable(Token("...."), set())


def test_bundled_stopword_list_loads():
    sw = load_stopwords()
    assert {"the", "a", "them", "was"} <= sw
    assert all(w == w.lower() for w in sw)


# ---------------------------------------------------------------------------
# corpus files


def test_corpus_tsv_roundtrip(tmp_path):
    sents = corpus("The movie was great!", "don't bother, truly awful")
    path = tmp_path / "c.tsv"
    write_corpus_tsv(path, sents)
    back = read_corpus_tsv(path)
    assert [s.text() for s in back] == [s.text() for s in sents]
    assert [s.label for s in back] == [0, 0]


def test_corpus_tsv_rejects_missing_tab(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("1 no tab here\n")
    with pytest.raises(DataError):
        read_corpus_tsv(path)


def test_corpus_tsv_rejects_bad_label(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("pos\tgood movie\n")
    with pytest.raises(DataError):
        read_corpus_tsv(path)

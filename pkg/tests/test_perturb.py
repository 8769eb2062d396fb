import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from typoguard.perturb import (
    AttackType,
    KeyboardAdjacency,
    adds,
    corrupt_corpus,
    corrupt_sentence,
    default_adjacency,
    drops,
    keyboard_subs,
    perturbation_set,
    swaps,
    word_perturbations,
)
from typoguard.text import DEFAULT_CHARSET, DataError, Token, tokenize

LETTERS = "abcdefghijklmnopqrstuvwxyz"


# ---------------------------------------------------------------------------
# independent brute-force enumerators (the oracle; kept deliberately naive)


def oracle_swaps(word):
    out = set()
    for i in range(1, len(word) - 2):
        cand = word[:i] + word[i + 1] + word[i] + word[i + 2 :]
        if cand != word:
            out.add(cand)
    return out


def oracle_drops(word):
    return {word[:i] + word[i + 1 :] for i in range(1, len(word) - 1)} - {word}


def oracle_adds(word, letters=LETTERS):
    return {
        word[:i] + c + word[i:]
        for i in range(1, len(word))
        for c in letters
    } - {word}


def oracle_keys(word, table):
    out = set()
    for i in range(1, len(word) - 1):
        for c in table.get(word[i], ""):
            cand = word[: i] + c + word[i + 1 :]
            if cand != word:
                out.add(cand)
    return out


# ---------------------------------------------------------------------------
# spec examples


def test_swaps_beautiful_has_six_distinct_variants():
    got = swaps("beautiful")
    assert set(got) == oracle_swaps("beautiful")
    assert len(got) == 6
    assert "beuatiful" in got


def test_swaps_of_constant_word_are_empty():
    assert swaps("aaaa") == []


def test_swaps_word_single_internal_pair():
    assert swaps("word") == ["wrod"]


def test_drops_beautiful_has_seven_variants():
    got = drops("beautiful")
    assert set(got) == oracle_drops("beautiful")
    assert len(got) == 7
    assert "beautful" in got


def test_drops_deduplicate_equal_results():
    assert drops("noon") == ["non"]


def test_drops_word():
    assert set(drops("word")) == {"wrd", "wod"}


def test_adds_word_counts():
    got = adds("word")
    oracle = oracle_adds("word")
    assert set(got) == oracle
    # 3 positions x 26 letters before dedup; duplicates only where the
    # inserted letter equals the preceding internal character
    assert 3 * 26 == 78
    assert len(got) == len(oracle)


def test_adds_dedupes_neighboring_equal_insertions():
    got = adds("cool")
    assert got.count("coool") == 1


def test_adds_preserve_ends_and_grow_by_one():
    for cand in adds("word"):
        assert len(cand) == 5
        assert cand[0] == "w" and cand[-1] == "d"


def test_keyboard_word_with_shipped_adjacency():
    got = keyboard_subs("word")
    adj = default_adjacency()
    assert set(adj.neighbors("o")) == set("ipkl")
    assert set(adj.neighbors("r")) == set("etdf")
    assert set(got) == oracle_keys("word", adj.table)
    assert len(got) == 8


def test_keyboard_no_alphabetic_internals_is_empty():
    assert keyboard_subs("a--b") == []


def test_keyboard_preserves_length():
    assert all(len(c) == 6 for c in keyboard_subs("strong"))


@pytest.mark.parametrize("gen", [swaps, drops, adds, keyboard_subs])
def test_generators_reject_short_words(gen):
    with pytest.raises(DataError):
        gen("abc")


# ---------------------------------------------------------------------------
# oracle equivalence over a small alphabet


def test_generators_equal_oracle_for_all_short_words():
    adj = default_adjacency()
    for n in (4, 5, 6):
        for letters in itertools.product("abc", repeat=n):
            word = "".join(letters)
            assert set(swaps(word)) == oracle_swaps(word), word
            assert set(drops(word)) == oracle_drops(word), word
            assert set(adds(word)) == oracle_adds(word), word
            assert set(keyboard_subs(word)) == oracle_keys(word, adj.table), word


@given(st.text(alphabet=LETTERS, min_size=4, max_size=10))
@settings(max_examples=300)
def test_generator_invariants(word):
    for kind in (AttackType.SWAP, AttackType.DROP, AttackType.ADD, AttackType.KEY):
        got = word_perturbations(word, kind)
        assert len(got) == len(set(got))
        assert word not in got
        for cand in got:
            assert cand[0] == word[0] and cand[-1] == word[-1]
        if kind is AttackType.SWAP:
            assert len(got) <= len(word) - 3
            assert all(len(c) == len(word) for c in got)
        elif kind is AttackType.DROP:
            assert len(got) <= len(word) - 2
            assert all(len(c) == len(word) - 1 for c in got)
        elif kind is AttackType.ADD:
            assert all(len(c) == len(word) + 1 for c in got)
        else:
            assert all(len(c) == len(word) for c in got)


def test_counts_tight_exactly_without_deduplication():
    # all-distinct characters: no dedup fires anywhere
    word = "table"
    assert len(swaps(word)) == len(word) - 3
    assert len(drops(word)) == len(word) - 2
    assert len(adds(word)) == 26 * (len(word) - 1) - sum(
        1 for i in range(1, len(word) - 1)  # insert word[i] at i or i+1 collide
    )


# ---------------------------------------------------------------------------
# sentence-level sets


STOPS = frozenset({"the", "a", "was", "and"})


def test_perturbation_set_empty_when_nothing_editable():
    s = tokenize("the a was and")
    assert len(perturbation_set(s, AttackType.ALL, STOPS)) == 0


def test_perturbation_set_size_sums_per_word():
    s = tokenize("the movie was beautiful")
    pset = perturbation_set(s, AttackType.SWAP, STOPS)
    expected = len(swaps("movie")) + len(swaps("beautiful"))
    assert len(pset) == expected


def test_all_contains_each_single_type():
    s = tokenize("the movie was beautiful")
    all_set = {x.text() for x in perturbation_set(s, AttackType.ALL, STOPS).realized()}
    for kind in (AttackType.SWAP, AttackType.DROP, AttackType.ADD, AttackType.KEY):
        sub = {x.text() for x in perturbation_set(s, kind, STOPS).realized()}
        assert sub <= all_set


def test_realized_sentences_differ_in_exactly_one_token():
    s = tokenize("the movie was beautiful")
    pset = perturbation_set(s, AttackType.ALL, STOPS)
    realized = pset.realized()
    assert len({x.text() for x in realized}) == len(realized)
    for edit, variant in zip(pset.edits, realized):
        diffs = [i for i, (a, b) in enumerate(zip(s.tokens, variant.tokens))
                 if a.surface != b.surface]
        assert diffs == [edit.token_index]


def test_words_with_unencodable_chars_are_not_edited():
    s = tokenize("the cafés was beautiful")
    pset = perturbation_set(s, AttackType.ALL, STOPS)
    assert all(s.tokens[e.token_index].surface == "beautiful" for e in pset.edits)


# ---------------------------------------------------------------------------
# corpus corruption


def corpus():
    return [tokenize(t, i % 2) for i, t in enumerate(
        ["the movie was beautiful and gripping",
         "a dull plot with wooden acting",
         "the end was fine"])]


def test_corrupt_corpus_deterministic():
    a, ra = corrupt_corpus(corpus(), AttackType.ALL, seed=7, stopwords=STOPS)
    b, rb = corrupt_corpus(corpus(), AttackType.ALL, seed=7, stopwords=STOPS)
    assert [s.text() for s in a] == [s.text() for s in b]
    assert ra == rb
    c, _ = corrupt_corpus(corpus(), AttackType.ALL, seed=8, stopwords=STOPS)
    assert [s.text() for s in a] != [s.text() for s in c]


def test_corrupt_leaves_stopwords_and_short_words_verbatim():
    out, records = corrupt_corpus(corpus(), AttackType.ALL, seed=1, stopwords=STOPS)
    for orig, cor in zip(corpus(), out):
        for a, b in zip(orig.tokens, cor.tokens):
            if not a.is_word or a.char_len < 4 or a.lowercased in STOPS:
                assert a.surface == b.surface


def test_corrupt_rate_is_total_over_editable_words():
    orig = corpus()
    out, records = corrupt_corpus(orig, AttackType.ALL, seed=3, stopwords=STOPS)
    editable = sum(
        1 for s in orig for t in s.tokens
        if t.is_word and t.char_len >= 4 and t.lowercased not in STOPS
    )
    assert len(records) == editable
    for r in records:
        assert out[r.sentence_index].tokens[r.token_index].surface == r.corrupted
        assert orig[r.sentence_index].tokens[r.token_index].surface == r.original
        assert r.corrupted != r.original


def test_all_attack_falls_back_when_sampled_type_has_no_candidates():
    # 'aaaa' has no swap and no keyboard candidates; every seed must still
    # corrupt it via drop or add
    s = tokenize("aaaa stays put", 0)
    for seed in range(20):
        out, records = corrupt_sentence(s, AttackType.ALL, random.Random(seed),
                                        STOPS, DEFAULT_CHARSET)
        corrupted = {r.token_index for r in records}
        assert 0 in corrupted


def test_single_type_skips_words_without_candidates():
    s = tokenize("aaaa stays put", 0)
    out, records = corrupt_sentence(s, AttackType.SWAP, random.Random(0), STOPS)
    assert records == []
    assert out.text() == s.text()


# ---------------------------------------------------------------------------
# adjacency file handling


def test_adjacency_file_roundtrip(tmp_path):
    path = tmp_path / "adj.txt"
    path.write_text("a: sq\nb: vn\n# comment\n\n")
    adj = KeyboardAdjacency.from_file(path)
    assert adj.neighbors("a") == "sq"
    assert adj.neighbors("z") == ""


def test_adjacency_rejects_non_letter_targets():
    with pytest.raises(DataError):
        KeyboardAdjacency({"a": "s1"})


def test_default_adjacency_targets_are_charset_members():
    adj = default_adjacency()
    for c, nbrs in adj.table.items():
        assert c in DEFAULT_CHARSET
        for n in nbrs:
            assert n in DEFAULT_CHARSET


def test_attack_type_parse():
    assert AttackType.parse("Swap") is AttackType.SWAP
    with pytest.raises(DataError):
        AttackType.parse("typo")

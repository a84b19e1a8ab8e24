import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netgram.documents import BehavioralDocument
from netgram.errors import EmptyVocabulary, SpecMismatch
from netgram.ngrams import (GramSpec, Vocabulary, featurize, fit_vocabulary, read_libsvm,
                            tokenize, write_libsvm)


def brute_substrings(text, n):
    return [text[i:j] for i in range(len(text)) for j in range(i + 1, len(text) + 1) if j - i == n]


def brute_skip_pairs(text, k):
    return [text[i] + text[j] for i in range(len(text)) for j in range(len(text))
            if 1 <= j - i <= k + 1]


def doc(text, label="A", sid="s"):
    return BehavioralDocument(sid, label, text)


def test_golden_tokens():
    assert tokenize("dhrhrhrd", GramSpec.fixed(3)) == ["dhr", "hrh", "rhr", "hrh", "rhr", "hrd"]


def test_short_text_gives_no_tokens():
    assert tokenize("d", GramSpec.fixed(3)) == []


def test_skip_bigrams():
    expected = brute_skip_pairs("abcd", 1)
    assert sorted(expected) == sorted(["ab", "ac", "bc", "bd", "cd"])
    assert tokenize("abcd", GramSpec.skipgram(1)) == ["ab", "ac", "bc", "bd", "cd"]


def test_skip_zero_is_bigrams():
    assert tokenize("abcab", GramSpec.skipgram(0)) == tokenize("abcab", GramSpec.fixed(2))


def test_combined_concatenates():
    assert tokenize("abc", GramSpec.combined(2)) == ["a", "b", "c", "ab", "bc"]


@pytest.mark.parametrize("kw", [dict(mode="fixed", n=0), dict(mode="skip", n=3, skip=1),
                                dict(mode="fixed", n=2, skip=1), dict(mode="skip", n=2)])
def test_invalid_specs(kw):
    with pytest.raises(ValueError):
        GramSpec(**kw)


def test_golden_vocabulary_and_counts():
    spec = GramSpec.fixed(3)
    vocab = fit_vocabulary([doc("dhrhrhrd")], spec)
    assert set(vocab.grams) == {"dhr", "hrh", "rhr", "hrd"}
    m = featurize([doc("dhrhrhrd")], vocab, spec, "A")
    dense = m.X.toarray()[0]
    assert [dense[vocab.index[g]] for g in ["dhr", "hrh", "rhr", "hrd"]] == [1, 2, 2, 1]
    assert m.y.tolist() == [1]


def test_two_doc_vocabulary():
    vocab = fit_vocabulary([doc("ab"), doc("ba")], GramSpec.fixed(2))
    assert vocab.grams == ("ab", "ba")


def test_vocabulary_ordering_is_length_then_lexicographic():
    vocab = fit_vocabulary([doc("cba")], GramSpec.combined(2))
    assert vocab.grams == ("a", "b", "c", "ba", "cb")


def test_vocabulary_bounded_by_alphabet_power():
    rng = random.Random(3)
    alphabet = "abcdefghijklmnopqrstuvwx"  # 24 letters
    docs = [doc("".join(rng.choice(alphabet) for _ in range(30))) for _ in range(20)]
    vocab = fit_vocabulary(docs, GramSpec.fixed(2))
    observed = {g for d in docs for g in brute_substrings(d.text, 2)}
    assert len(vocab) == len(observed) <= 24 ** 2


def test_empty_vocabulary():
    with pytest.raises(EmptyVocabulary):
        fit_vocabulary([doc(""), doc("a")], GramSpec.fixed(2))


def test_empty_document_row():
    spec = GramSpec.fixed(2)
    vocab = fit_vocabulary([doc("abc")], spec)
    m = featurize([doc("", "B")], vocab, spec, "A")
    assert m.X.nnz == 0
    assert m.y.tolist() == [-1]


def test_unseen_grams_dropped():
    spec = GramSpec.fixed(3)
    vocab = fit_vocabulary([doc("dhrhrhrd")], spec)
    base = featurize([doc("dhrhrhrd")], vocab, spec, "A").X.toarray()
    with_noise = featurize([doc("dhrhrhrdxyz")], vocab, spec, "A").X.toarray()
    # "rdx", "dxy", "xyz" are unseen; every known count is unchanged
    assert (base == with_noise).all()


def test_spec_mismatch():
    vocab = fit_vocabulary([doc("abc")], GramSpec.fixed(2))
    with pytest.raises(SpecMismatch):
        featurize([doc("abc")], vocab, GramSpec.fixed(3))


def test_tf_normalize_rows_sum_to_one():
    spec = GramSpec.fixed(2)
    docs = [doc("abab"), doc("bbbc")]
    m = featurize(docs, fit_vocabulary(docs, spec), spec, "A", tf_normalize=True)
    assert np.allclose(m.X.sum(axis=1), 1.0)


texts = st.text(alphabet="abcdefghijklmnopqrstuvwxyz", max_size=64)


@settings(max_examples=200)
@given(texts, st.integers(1, 8))
def test_fixed_tokenizer_matches_brute_force(text, n):
    assert tokenize(text, GramSpec.fixed(n)) == brute_substrings(text, n)


@given(texts, st.integers(0, 4))
def test_skip_tokenizer_matches_brute_force(text, k):
    assert Counter(tokenize(text, GramSpec.skipgram(k))) == Counter(brute_skip_pairs(text, k))


@given(st.lists(texts, min_size=1, max_size=8), st.integers(1, 5))
def test_count_conservation(corpus, n):
    docs = [doc(t) for t in corpus]
    for spec, expected in ((GramSpec.fixed(n), lambda L: max(0, L - n + 1)),
                           (GramSpec.combined(n),
                            lambda L: sum(max(0, L - k + 1) for k in range(1, n + 1)))):
        try:
            vocab = fit_vocabulary(docs, spec)
        except EmptyVocabulary:
            assert all(expected(len(t)) == 0 for t in corpus)
            continue
        m = featurize(docs, vocab, spec)
        sums = np.asarray(m.X.sum(axis=1)).ravel()
        assert sums.tolist() == [expected(len(t)) for t in corpus]
        assert (m.X.data > 0).all()
        assert m.X.indices.max(initial=-1) < len(vocab)


@given(st.lists(texts.filter(bool), min_size=1, max_size=8),
       st.lists(texts.filter(bool), max_size=4), st.integers(1, 4))
def test_vocabulary_monotone_and_combined_is_union(base, more, n):
    docs = [doc(t) for t in base]
    bigger = docs + [doc(t) for t in more]
    fixed = GramSpec.fixed(n)
    try:
        v_small = fit_vocabulary(docs, fixed)
    except EmptyVocabulary:
        v_small = Vocabulary((), fixed)
    try:
        v_big = fit_vocabulary(bigger, fixed)
    except EmptyVocabulary:
        v_big = Vocabulary((), fixed)
    assert set(v_small.grams) <= set(v_big.grams)
    combined = fit_vocabulary(docs, GramSpec.combined(n))
    total = 0
    for k in range(1, n + 1):
        try:
            total += len(fit_vocabulary(docs, GramSpec.fixed(k)))
        except EmptyVocabulary:
            pass
    assert len(combined) == total


@given(st.lists(texts, min_size=1, max_size=6))
def test_vocabulary_independent_of_document_order(corpus):
    docs = [doc(t) for t in corpus]
    spec = GramSpec.combined(3)
    try:
        v1 = fit_vocabulary(docs, spec)
    except EmptyVocabulary:
        return
    assert fit_vocabulary(list(reversed(docs)), spec).grams == v1.grams


def test_libsvm_and_vocab_round_trip(tmp_path):
    spec = GramSpec.combined(2)
    docs = [doc("abcab", "A", "x"), doc("ccc", "B", "y"), doc("", "B", "z")]
    vocab = fit_vocabulary(docs, spec)
    m = featurize(docs, vocab, spec, "A")
    write_libsvm(m, tmp_path / "f.libsvm")
    vocab.write(tmp_path / "v.tsv")
    lines = (tmp_path / "f.libsvm").read_text().splitlines()
    assert lines[0].startswith("+1 ")
    assert lines[2] == "-1"
    v2 = Vocabulary.read(tmp_path / "v.tsv")
    assert v2 == vocab and v2.digest() == vocab.digest()
    m2 = read_libsvm(tmp_path / "f.libsvm", v2)
    assert (m2.X != m.X).nnz == 0
    assert m2.y.tolist() == m.y.tolist()


def test_take_columns_keeps_vocabulary_alignment():
    spec = GramSpec.combined(2)
    docs = [doc("abcab"), doc("bca", "B")]
    m = featurize(docs, fit_vocabulary(docs, spec), spec, "A")
    cols = [m.vocabulary.index[g] for g in ("ab", "c", "a")]
    sub = m.take_columns(cols)
    assert sub.vocabulary.grams == ("a", "c", "ab")
    full = m.X.toarray()
    for j, g in enumerate(sub.vocabulary.grams):
        assert (sub.X.toarray()[:, j] == full[:, m.vocabulary.index[g]]).all()

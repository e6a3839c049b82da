import math
import re
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intopt.errors import EmptyCorpus
from intopt.kb import KnowledgeBase, PassEntry
from intopt.retrieval import (
    build_index,
    ngrams,
    resolve_analysis_set,
    retrieve,
    tokenize,
)

# --- Independent reference implementation ----------------------------------


def oracle_grams(text: str) -> list[str]:
    words = re.findall(r"[a-z0-9]+", text.lower())
    grams = []
    for n in (1, 2, 3):
        for i in range(len(words) - n + 1):
            grams.append(" ".join(words[i : i + n]))
    return grams


def oracle_scores(corpus: dict[str, str], query: str) -> dict[str, float]:
    """Brute-force TF-IDF cosine, built from scratch."""
    n = len(corpus)
    doc_grams = {doc_id: Counter(oracle_grams(text)) for doc_id, text in corpus.items()}
    df = Counter()
    for grams in doc_grams.values():
        df.update(set(grams))
    vocab = set(df)

    def idf(gram: str) -> float:
        return math.log((1 + n) / (1 + df[gram])) + 1.0

    def vector(grams: Counter, restrict: set[str]) -> dict[str, float]:
        vec = {g: c * idf(g) for g, c in grams.items() if g in restrict}
        norm = math.sqrt(sum(w * w for w in vec.values()))
        return {g: w / norm for g, w in vec.items()} if norm else {}

    query_vec = vector(Counter(oracle_grams(query)), vocab)
    scores = {}
    for doc_id, grams in doc_grams.items():
        doc_vec = vector(grams, vocab)
        scores[doc_id] = sum(w * doc_vec.get(g, 0.0) for g, w in query_vec.items())
    return scores


def kb_of(corpus: dict[str, str]) -> KnowledgeBase:
    return KnowledgeBase(
        entries={
            doc_id: PassEntry(id=doc_id, desc=text, deps=[])
            for doc_id, text in corpus.items()
        }
    )


# --- Unit behavior -----------------------------------------------------------


def test_tokenize_splits_non_alphanumeric():
    assert tokenize("Loop-Vectorize: widens INSTRUCTIONS!") == [
        "loop", "vectorize", "widens", "instructions",
    ]


def test_ngrams_word_level():
    assert ngrams(["a", "b", "c"]) == ["a", "b", "c", "a b", "b c", "a b c"]


def test_empty_corpus_raises():
    with pytest.raises(EmptyCorpus):
        build_index(kb_of({}))


def test_retrieve_rejects_bad_m():
    index = build_index(kb_of({"P": "loop unroll"}))
    with pytest.raises(ValueError):
        retrieve(index, "loop", m=0)


def test_out_of_vocabulary_query_gives_nothing():
    index = build_index(kb_of({"P": "loop unroll"}))
    assert retrieve(index, "zzz qqq") == []


def test_ties_break_by_pass_id():
    corpus = {"B": "dead code elimination", "A": "dead code elimination"}
    hits = retrieve(build_index(corpus and kb_of(corpus)), "dead code", m=2)
    assert [h.pass_id for h in hits] == ["A", "B"]
    assert hits[0].score == pytest.approx(hits[1].score, abs=1e-12)


def test_resolve_analysis_set_unions_deps():
    kb = KnowledgeBase(
        entries={
            "P1": PassEntry(id="P1", desc="loop unrolling", deps=["LoopAnalysis"]),
            "P2": PassEntry(id="P2", desc="value numbering", deps=["DominatorTreeAnalysis"]),
            "P3": PassEntry(id="P3", desc="loop vectorizer", deps=["LoopAnalysis",
                                                                   "TargetLibraryAnalysis"]),
        }
    )
    index = build_index(kb)
    analyses = resolve_analysis_set(
        ["unroll the loop", "number the values"], index, kb, m=1
    )
    assert analyses == sorted(set(analyses))
    assert "LoopAnalysis" in analyses


# --- Oracle agreement and properties ------------------------------------------

corpus_strategy = st.dictionaries(
    keys=st.text(st.characters(min_codepoint=97, max_codepoint=122), min_size=1, max_size=6),
    values=st.lists(
        st.sampled_from("loop unroll vectorize dead code global value dominator "
                        "memory alias scalar evolution inline branch".split()),
        min_size=1, max_size=8,
    ).map(" ".join),
    min_size=1, max_size=10,
)

query_strategy = st.lists(
    st.sampled_from("loop unroll vectorize dead code global value dominator "
                    "memory alias novel".split()),
    min_size=1, max_size=6,
).map(" ".join)


@settings(max_examples=250, deadline=None)
@given(corpus_strategy, query_strategy)
def test_scores_match_bruteforce_oracle(corpus, query):
    index = build_index(kb_of(corpus))
    hits = retrieve(index, query, m=len(corpus))
    expected = oracle_scores(corpus, query)
    got = {h.pass_id: h.score for h in hits}
    for doc_id, score in got.items():
        assert score == pytest.approx(expected[doc_id], abs=1e-9)


@settings(max_examples=250, deadline=None)
@given(corpus_strategy, query_strategy)
def test_scores_bounded(corpus, query):
    index = build_index(kb_of(corpus))
    for hit in retrieve(index, query, m=len(corpus)):
        assert -1e-9 <= hit.score <= 1.0 + 1e-9


@settings(max_examples=250, deadline=None)
@given(corpus_strategy)
def test_self_query_is_exactly_one(corpus):
    index = build_index(kb_of(corpus))
    for doc_id, text in corpus.items():
        hits = retrieve(index, text, m=len(corpus))
        got = {h.pass_id: h.score for h in hits}
        assert got[doc_id] == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=250, deadline=None)
@given(corpus_strategy, query_strategy, st.integers(1, 9))
def test_top_m_prefix_extends(corpus, query, m):
    index = build_index(kb_of(corpus))
    small = retrieve(index, query, m=m)
    large = retrieve(index, query, m=m + 1)
    assert [h.pass_id for h in large[: len(small)]] == [h.pass_id for h in small]
    assert all(h.rank == i + 1 for i, h in enumerate(large))


@settings(max_examples=250, deadline=None)
@given(corpus_strategy, query_strategy, st.integers(2, 5))
def test_rank_invariant_under_query_scaling(corpus, query, k):
    # Repeating the query text scales every in-vocabulary term frequency by
    # k. An out-of-vocabulary separator keeps n-grams from spanning the
    # repetition boundary (those would carry zero weight anyway).
    index = build_index(kb_of(corpus))
    base = retrieve(index, query, m=len(corpus))
    scaled = retrieve(index, " qxseparatorxq ".join([query] * k), m=len(corpus))
    base_scores = {h.pass_id: h.score for h in base}
    scaled_scores = {h.pass_id: h.score for h in scaled}
    assert set(base_scores) == set(scaled_scores)
    for pass_id, score in base_scores.items():
        assert scaled_scores[pass_id] == pytest.approx(score, abs=1e-9)
    # Rank order is preserved wherever scores are meaningfully apart.
    scaled_rank = {h.pass_id: h.rank for h in scaled}
    for first, second in zip(base, base[1:]):
        if first.score - second.score > 1e-8:
            assert scaled_rank[first.pass_id] < scaled_rank[second.pass_id]

"""Analysis-aware retrieval: TF-IDF 1-3 gram cosine matching of actions to passes.

Weighting: raw term frequency times smoothed idf, ln((1+N)/(1+df)) + 1,
with L2-normalized vectors, so cosine similarity is a plain dot product and
scores stay in [0, 1].  Ties break by pass id ascending so rankings are
deterministic.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field

from .errors import EmptyCorpus
from .kb import KnowledgeBase

logger = logging.getLogger(__name__)

_WORD_RE = re.compile(r"[a-z0-9]+")

NGRAM_RANGE = (1, 3)
DEFAULT_TOP_M = 3


def tokenize(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def ngrams(tokens: list[str], lo: int = NGRAM_RANGE[0], hi: int = NGRAM_RANGE[1]) -> list[str]:
    grams = []
    for n in range(lo, hi + 1):
        grams.extend(
            " ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1)
        )
    return grams


@dataclass
class TfIdfIndex:
    vocabulary: dict[str, int]
    idf: list[float]
    doc_vectors: dict[str, dict[int, float]]  # pass id -> {dim: weight}, L2-normalized
    ngram_range: tuple[int, int] = NGRAM_RANGE

    def vectorize(self, text: str) -> dict[int, float]:
        """TF-IDF vector of a query under the index's vocabulary, L2-normalized."""
        counts: dict[int, int] = {}
        for gram in ngrams(tokenize(text), *self.ngram_range):
            dim = self.vocabulary.get(gram)
            if dim is not None:
                counts[dim] = counts.get(dim, 0) + 1
        vec = {dim: tf * self.idf[dim] for dim, tf in counts.items()}
        return _l2_normalize(vec)


@dataclass
class RetrievalHit:
    pass_id: str
    score: float
    rank: int


def _l2_normalize(vec: dict[int, float]) -> dict[int, float]:
    norm = math.sqrt(sum(w * w for w in vec.values()))
    if norm == 0.0:
        return {}
    return {dim: w / norm for dim, w in vec.items()}


def build_index(kb: KnowledgeBase) -> TfIdfIndex:
    """Index all entry descriptions; vocabulary order follows sorted grams."""
    if not kb.entries:
        raise EmptyCorpus("knowledge base has no entries")
    doc_grams = {
        pass_id: ngrams(tokenize(entry.desc))
        for pass_id, entry in sorted(kb.entries.items())
    }
    df: dict[str, int] = {}
    for grams in doc_grams.values():
        for gram in set(grams):
            df[gram] = df.get(gram, 0) + 1
    vocabulary = {gram: dim for dim, gram in enumerate(sorted(df))}
    n_docs = len(doc_grams)
    idf = [0.0] * len(vocabulary)
    for gram, dim in vocabulary.items():
        idf[dim] = math.log((1 + n_docs) / (1 + df[gram])) + 1.0

    doc_vectors = {}
    for pass_id, grams in doc_grams.items():
        counts: dict[int, int] = {}
        for gram in grams:
            dim = vocabulary[gram]
            counts[dim] = counts.get(dim, 0) + 1
        vec = {dim: tf * idf[dim] for dim, tf in counts.items()}
        doc_vectors[pass_id] = _l2_normalize(vec)
    return TfIdfIndex(vocabulary=vocabulary, idf=idf, doc_vectors=doc_vectors)


def retrieve(index: TfIdfIndex, action_text: str, m: int = DEFAULT_TOP_M) -> list[RetrievalHit]:
    """Top-m passes by cosine similarity to *action_text*."""
    if m < 1:
        raise ValueError("m must be >= 1")
    query = index.vectorize(action_text)
    if not query:
        logger.info("query has no in-vocabulary terms: %r", action_text[:80])
        return []
    scored = []
    for pass_id, doc in index.doc_vectors.items():
        if len(query) < len(doc):
            small, big = query, doc
        else:
            small, big = doc, query
        score = sum(w * big.get(dim, 0.0) for dim, w in small.items())
        scored.append((pass_id, score))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return [
        RetrievalHit(pass_id=pass_id, score=score, rank=rank)
        for rank, (pass_id, score) in enumerate(scored[:m], start=1)
    ]


def resolve_analysis_set(
    actions: list[str],
    index: TfIdfIndex,
    kb: KnowledgeBase,
    m: int = DEFAULT_TOP_M,
) -> list[str]:
    """Union of analysis deps over the top-m passes of every action.

    Returned sorted so downstream invocation order is deterministic.
    """
    analyses: set[str] = set()
    for action in actions:
        for hit in retrieve(index, action, m):
            entry = kb.entries.get(hit.pass_id)
            if entry is not None:
                analyses.update(entry.deps)
    return sorted(analyses)

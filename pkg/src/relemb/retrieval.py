"""Query-likelihood and KL-divergence retrieval over a corpus index.

Both scorers share one weighted-sum core: a document scores
``sum_w weight(w) * log p_mu(w|d)`` over the query model's support, with
Dirichlet-smoothed document probabilities. Query likelihood weights terms
by their query counts, KL ranking by query-model probabilities, so the two
are rank-equivalent for maximum-likelihood query models.

Only documents containing at least one support term are candidates; ties
break by ascending document id for determinism.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .corpus import CorpusIndex
from .errors import OutOfVocabularyQueryError


@dataclass
class QueryLanguageModel:
    """Sparse term-id -> probability model for a single query."""

    probs: dict[int, float]

    def validate(self) -> None:
        if not self.probs:
            raise ValueError("empty query language model")
        if any(p <= 0 for p in self.probs.values()):
            raise ValueError("query model probabilities must be positive")
        total = sum(self.probs.values())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"query model sums to {total!r}, not 1")

    @classmethod
    def from_tokens(cls, index: CorpusIndex, tokens: Sequence[str]) -> "QueryLanguageModel":
        """Maximum-likelihood model over the query's in-vocabulary tokens."""
        tids = index.query_term_ids(tokens)
        if not tids:
            raise OutOfVocabularyQueryError(f"no vocabulary terms in query {list(tokens)!r}")
        counts = Counter(tids)
        n = len(tids)
        return cls({tid: c / n for tid, c in counts.items()})


@dataclass
class RankedList:
    """Retrieval output: (doc id, score) entries in descending score order."""

    query_id: str
    entries: list[tuple[str, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.entries]

    def validate(self) -> None:
        ids = self.doc_ids()
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate document ids in ranked list")
        scores = [s for _, s in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("scores are not non-increasing")


def dirichlet_prob(index: CorpusIndex, term_id: int, doc_id: str, mu: float) -> float:
    """Smoothed p(term | doc) = (count + mu * p(term|C)) / (length + mu)."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    pos = index.doc_position(doc_id)
    count = index.term_count(term_id, doc_id)
    p_c = float(index.collection_prob[term_id]) if 0 <= term_id < index.num_terms else 0.0
    return (count + mu * p_c) / (int(index.doc_lengths[pos]) + mu)


def ql_retrieve(
    index: CorpusIndex,
    query_tokens: Sequence[str],
    k: int,
    mu: float = 1500.0,
    query_id: str = "",
) -> RankedList:
    """Rank documents by query log-likelihood under Dirichlet smoothing."""
    if k < 1:
        raise ValueError("k must be >= 1")
    tids = index.query_term_ids(query_tokens)
    if not tids:
        raise OutOfVocabularyQueryError(f"no vocabulary terms in query {list(query_tokens)!r}")
    weights = {tid: float(c) for tid, c in Counter(tids).items()}
    return _retrieve_weighted(index, weights, k, mu, query_id)


def kl_retrieve(
    index: CorpusIndex,
    qlm: QueryLanguageModel,
    k: int,
    mu: float = 1500.0,
    query_id: str = "",
) -> RankedList:
    """Rank documents by the query-model-weighted document log-likelihood.

    Equivalent to ranking by negative KL divergence between the query model
    and the smoothed document model (the query entropy term is constant).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    weights = {tid: p for tid, p in qlm.probs.items() if 0 <= tid < index.num_terms}
    if not weights:
        raise OutOfVocabularyQueryError("query model support is entirely out of vocabulary")
    return _retrieve_weighted(index, weights, k, mu, query_id)


def _retrieve_weighted(
    index: CorpusIndex, weights: dict[int, float], k: int, mu: float, query_id: str
) -> RankedList:
    """Score candidates by ``sum_w weight * log((c(w,d) + mu p(w|C)) / (|d| + mu))``.

    Decomposed for vectorization: the in-document corrections are scattered
    over each term's postings, everything else is a per-document constant.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    num_docs = index.num_docs
    adjust = np.zeros(num_docs, dtype=np.float64)
    matched = np.zeros(num_docs, dtype=bool)
    base = 0.0
    total_weight = 0.0
    for tid, w in weights.items():
        p_c = float(index.collection_prob[tid])
        bg = mu * p_c
        base += w * np.log(bg)
        total_weight += w
        docs, freqs = index.postings.get(tid, (None, None))
        if docs is None:
            continue
        adjust[docs] += w * (np.log(freqs + bg) - np.log(bg))
        matched[docs] = True
    scores = base + adjust - total_weight * np.log(index.doc_lengths + mu)
    candidates = np.flatnonzero(matched)
    ranked = sorted(
        ((float(scores[pos]), index.doc_ids[pos]) for pos in candidates),
        key=lambda e: (-e[0], e[1]),
    )
    return RankedList(query_id, [(doc_id, score) for score, doc_id in ranked[:k]])


def write_trec_run(runs: Sequence[RankedList], path: str, tag: str = "relemb") -> None:
    """Write ranked lists in TREC format: ``qid Q0 docid rank score tag``."""
    with open(path, "w", encoding="utf-8") as f:
        for run in runs:
            for rank, (doc_id, score) in enumerate(run.entries, 1):
                f.write(f"{run.query_id} Q0 {doc_id} {rank} {score:.6f} {tag}\n")


def read_queries(path: str) -> Iterator[tuple[str, str]]:
    """Yield (query id, query text) pairs from a ``qid<TAB>text`` file."""
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{line_no}: expected 'qid<TAB>query text'")
            qid, text = line.split("\t", 1)
            yield qid, text

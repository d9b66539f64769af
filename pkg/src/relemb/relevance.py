"""Per-query relevance distributions estimated from feedback documents.

For a query q with feedback set F, each term w appearing in F scores

    score(w) = sum_{d in F} p_ml(w|d) * prod_{w' in q} p_mu(w'|d)

and the scores are normalized into a distribution. Terms outside the
feedback documents have probability exactly zero. The per-document query
factor uses Dirichlet smoothing so that documents missing a query term
still contribute; the generation factor is maximum likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import CorpusIndex
from .errors import EmptyFeedbackError, OutOfVocabularyQueryError
from .retrieval import RankedList


@dataclass
class RelevanceDistribution:
    """Sparse term-id -> probability target for one training query."""

    query_id: str
    probs: dict[int, float]
    feedback_size: int

    def __len__(self) -> int:
        return len(self.probs)

    def validate(self) -> None:
        if not self.probs:
            raise ValueError("empty relevance distribution")
        total = sum(self.probs.values())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"relevance distribution sums to {total!r}, not 1")

    def top_terms(self, m: int) -> list[tuple[int, float]]:
        """The ``m`` highest-probability terms, ties broken by term id."""
        ranked = sorted(self.probs.items(), key=lambda e: (-e[1], e[0]))
        return ranked[:m]


def estimate_relevance_model(
    index: CorpusIndex,
    query_tokens: Sequence[str],
    topk: RankedList,
    mu: float = 1500.0,
    max_terms: int | None = None,
) -> RelevanceDistribution:
    """Estimate p(w | relevant) from the top retrieved documents.

    ``max_terms`` optionally truncates the support to the highest-probability
    terms (renormalized); by default the full feedback vocabulary is kept.
    """
    if len(topk) == 0:
        raise EmptyFeedbackError(f"no feedback documents for query {topk.query_id!r}")
    query_tids = index.query_term_ids(query_tokens)
    if not query_tids:
        raise OutOfVocabularyQueryError(f"no vocabulary terms in query {list(query_tokens)!r}")

    scores: dict[int, float] = {}
    mu = float(mu)
    for doc_id, _ in topk.entries:
        pos = index.doc_position(doc_id)
        length = int(index.doc_lengths[pos])
        if length == 0:
            continue
        query_factor = 1.0
        for tid in query_tids:
            count = index.term_count(tid, doc_id)
            query_factor *= (count + mu * float(index.collection_prob[tid])) / (length + mu)
        tids = index.doc_terms[pos]
        gen = index.doc_counts[pos] / length
        contrib = gen * query_factor
        for tid, val in zip(tids.tolist(), contrib.tolist()):
            scores[tid] = scores.get(tid, 0.0) + val

    if not scores:
        raise EmptyFeedbackError(f"feedback documents for query {topk.query_id!r} are all empty")

    if max_terms is not None and max_terms < len(scores):
        kept = sorted(scores.items(), key=lambda e: (-e[1], e[0]))[:max_terms]
        scores = dict(kept)
    total = sum(scores.values())
    probs = {tid: s / total for tid, s in scores.items()}
    return RelevanceDistribution(query_id=topk.query_id, probs=probs, feedback_size=len(topk))

"""Offline manufacture of training data from a corpus and a query log.

Raw queries are cleaned and deduplicated, retrieval plus relevance-model
estimation runs in bulk, and the result is a training set of (query,
relevance distribution) pairs together with the unigram table feeding the
noise distribution for negative sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .corpus import CorpusIndex
from .errors import EmptyFeedbackError, OutOfVocabularyQueryError
from .relevance import RelevanceDistribution, estimate_relevance_model
from .retrieval import ql_retrieve
from .tokenization import tokenize

URL_MARKERS = ("http", "www.", ".com", ".net", ".org", ".edu")


@dataclass
class TrainingSet:
    """Ordered (query, relevance distribution) pairs plus sampling stats.

    ``term_counts`` is the unigram table U over the vocabulary, counting raw
    token occurrences across all feedback documents (with multiplicity when
    a document is retrieved by several queries). It is None for training
    sets reloaded from disk, where only the distributions survive.
    """

    num_terms: int
    query_ids: list[str] = field(default_factory=list)
    query_texts: list[str] = field(default_factory=list)
    queries: list[np.ndarray] = field(default_factory=list)
    targets: list[RelevanceDistribution] = field(default_factory=list)
    term_counts: np.ndarray | None = None
    skipped: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.queries)

    def validate(self) -> None:
        if len(self.queries) != len(self.targets) or len(self.queries) != len(self.query_ids):
            raise ValueError("query/target arrays disagree on size")
        for qids in self.queries:
            if len(qids) == 0:
                raise ValueError("training query with no vocabulary terms")
        for target in self.targets:
            target.validate()
        if self.term_counts is not None:
            for target in self.targets:
                support = np.fromiter(target.probs, dtype=np.int64, count=len(target.probs))
                if np.any(self.term_counts[support] < 1):
                    raise ValueError("unigram table misses a distribution support term")

    def relevance_mass(self) -> np.ndarray:
        """Aggregate relevance probability per term across all queries."""
        mass = np.zeros(self.num_terms, dtype=np.float64)
        for target in self.targets:
            for tid, p in target.probs.items():
                mass[tid] += p
        return mass


def clean_queries(raw: Iterable[str], counts: dict[str, int] | None = None) -> Iterator[str]:
    """Clean and deduplicate a raw query stream.

    Queries containing URL substrings are dropped as navigational; the rest
    are lowercased with non-alphanumerics stripped. Exact duplicates after
    cleaning are emitted once. ``counts`` (if given) collects bookkeeping
    under the keys total/navigational/empty/duplicate/kept.
    """
    if counts is None:
        counts = {}
    for key in ("total", "navigational", "empty", "duplicate", "kept"):
        counts.setdefault(key, 0)
    seen: set[str] = set()
    for query in raw:
        counts["total"] += 1
        lowered = query.lower()
        if any(marker in lowered for marker in URL_MARKERS):
            counts["navigational"] += 1
            continue
        cleaned = " ".join(tokenize(query))
        if not cleaned:
            counts["empty"] += 1
            continue
        if cleaned in seen:
            counts["duplicate"] += 1
            continue
        seen.add(cleaned)
        counts["kept"] += 1
        yield cleaned


def generate_training_set(
    index: CorpusIndex,
    queries: Iterable[str],
    k: int = 10,
    mu: float = 1500.0,
    stopwords: frozenset[str] | set[str] = frozenset(),
    max_terms: int | None = None,
    qid_prefix: str = "t",
) -> TrainingSet:
    """Retrieve feedback documents and estimate a target per usable query.

    Queries whose terms are all out of vocabulary (or that retrieve
    nothing) are skipped and counted, never silently lost.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    training = TrainingSet(num_terms=index.num_terms)
    term_counts = np.zeros(index.num_terms, dtype=np.int64)
    skipped = {"out_of_vocabulary": 0, "no_results": 0}
    seq = 0
    for text in queries:
        tokens = tokenize(text, stopwords)
        tids = index.query_term_ids(tokens)
        if not tids:
            skipped["out_of_vocabulary"] += 1
            continue
        try:
            topk = ql_retrieve(index, tokens, k=k, mu=mu)
            target = estimate_relevance_model(index, tokens, topk, mu=mu, max_terms=max_terms)
        except (OutOfVocabularyQueryError, EmptyFeedbackError):
            skipped["no_results"] += 1
            continue
        seq += 1
        qid = f"{qid_prefix}{seq:06d}"
        topk.query_id = qid
        target.query_id = qid
        for doc_id, _ in topk.entries:
            pos = index.doc_position(doc_id)
            term_counts[index.doc_terms[pos]] += index.doc_counts[pos]
        training.query_ids.append(qid)
        training.query_texts.append(text)
        training.queries.append(np.array(tids, dtype=np.int64))
        training.targets.append(target)
    if not training.queries:
        raise ValueError("no usable training queries")
    training.term_counts = term_counts
    training.skipped = skipped
    return training


def noise_distribution(training: TrainingSet, exponent: float = 0.75) -> np.ndarray:
    """Normalized power-smoothed unigram table for negative sampling."""
    if exponent <= 0:
        raise ValueError("exponent must be positive")
    if training.term_counts is None:
        raise ValueError("training set has no unigram table (reloaded from disk?)")
    counts = training.term_counts.astype(np.float64)
    if not np.any(counts > 0):
        raise ValueError("unigram table is all zero")
    powered = np.where(counts > 0, counts**exponent, 0.0)
    return powered / powered.sum()


# -- file formats -----------------------------------------------------------


def write_training_file(training: TrainingSet, index: CorpusIndex, path: str) -> None:
    """One line per query: ``qid<TAB>query text<TAB>term:prob term:prob ...``."""
    terms = index.vocabulary.terms
    with open(path, "w", encoding="utf-8") as f:
        for qid, text, target in zip(training.query_ids, training.query_texts, training.targets):
            pairs = " ".join(
                f"{terms[tid]}:{prob:.12g}"
                for tid, prob in sorted(target.probs.items())
            )
            f.write(f"{qid}\t{text}\t{pairs}\n")


def read_training_file(
    path: str,
    index: CorpusIndex,
    stopwords: frozenset[str] | set[str] = frozenset(),
) -> TrainingSet:
    """Rebuild a training set from its serialized pair file.

    Pass the stopword set used at generation time so query tokenization
    matches. The unigram table is not recoverable from the pairs; pass the
    noise table separately when training the posterior model from files.
    """
    training = TrainingSet(num_terms=index.num_terms)
    ids = index.vocabulary.ids
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{line_no}: expected 3 tab-separated fields")
            qid, text, pair_field = parts
            probs: dict[int, float] = {}
            for pair in pair_field.split():
                term, _, prob = pair.rpartition(":")
                if term not in ids:
                    raise ValueError(f"{path}:{line_no}: unknown term {term!r}")
                probs[ids[term]] = float(prob)
            tids = index.query_term_ids(tokenize(text, stopwords))
            if not tids:
                raise ValueError(f"{path}:{line_no}: query has no vocabulary terms")
            training.query_ids.append(qid)
            training.query_texts.append(text)
            training.queries.append(np.array(tids, dtype=np.int64))
            training.targets.append(
                RelevanceDistribution(query_id=qid, probs=probs, feedback_size=0)
            )
    if not training.queries:
        raise ValueError(f"{path}: no training pairs")
    return training


def write_noise_table(probs: np.ndarray, index: CorpusIndex, path: str) -> None:
    """Write the noise distribution as ``term<TAB>prob`` lines."""
    with open(path, "w", encoding="utf-8") as f:
        for tid, term in enumerate(index.vocabulary.terms):
            f.write(f"{term}\t{probs[tid]:.12g}\n")


def read_noise_table(path: str, index: CorpusIndex) -> np.ndarray:
    probs = np.zeros(index.num_terms, dtype=np.float64)
    ids = index.vocabulary.ids
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            term, _, prob = line.partition("\t")
            if term not in ids:
                raise ValueError(f"{path}:{line_no}: unknown term {term!r}")
            probs[ids[term]] = float(prob)
    return probs

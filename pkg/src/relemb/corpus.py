"""Corpus ingestion: vocabulary, inverted index and collection statistics.

The index is immutable once built. The forward store (per-document term
counts) is the serialized source of truth; postings are derived from it,
so a reloaded index is statistically identical by construction.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import DuplicateDocumentError, UnknownDocumentError
from .tokenization import tokenize

_FORMAT_VERSION = 1


@dataclass
class Vocabulary:
    """Dense term ids plus per-term document and collection frequencies."""

    terms: list[str]
    ids: dict[str, int]
    df: np.ndarray
    cf: np.ndarray
    total_tokens: int

    def __len__(self) -> int:
        return len(self.terms)

    def term_id(self, term: str) -> int | None:
        return self.ids.get(term)

    def validate(self) -> None:
        n = len(self.terms)
        if len(self.ids) != n or len(self.df) != n or len(self.cf) != n:
            raise ValueError("vocabulary arrays disagree on size")
        if any(self.ids[t] != i for i, t in enumerate(self.terms)):
            raise ValueError("term ids are not dense 0..N-1")
        if n and (np.any(self.df < 1) or np.any(self.cf < self.df)):
            raise ValueError("need cf >= df >= 1 for every term")
        if int(self.cf.sum()) != self.total_tokens:
            raise ValueError("collection frequencies do not sum to total tokens")


@dataclass
class CorpusIndex:
    """Postings, document lengths and the collection language model."""

    vocabulary: Vocabulary
    doc_ids: list[str]
    doc_lengths: np.ndarray
    # Forward store: per-doc parallel arrays of (term id, in-doc frequency).
    doc_terms: list[np.ndarray]
    doc_counts: list[np.ndarray]
    postings: dict[int, tuple[np.ndarray, np.ndarray]] = field(repr=False)
    collection_prob: np.ndarray = field(repr=False)
    _doc_pos: dict[str, int] = field(repr=False)

    @property
    def num_docs(self) -> int:
        return len(self.doc_ids)

    @property
    def num_terms(self) -> int:
        return len(self.vocabulary)

    def doc_position(self, doc_id: str) -> int:
        try:
            return self._doc_pos[doc_id]
        except KeyError:
            raise UnknownDocumentError(f"unknown document id: {doc_id!r}") from None

    def doc_length(self, doc_id: str) -> int:
        return int(self.doc_lengths[self.doc_position(doc_id)])

    def term_count(self, term_id: int, doc_id: str) -> int:
        """In-document frequency of ``term_id``, 0 when absent."""
        pos = self.doc_position(doc_id)
        tids = self.doc_terms[pos]
        i = int(np.searchsorted(tids, term_id))
        if i < len(tids) and tids[i] == term_id:
            return int(self.doc_counts[pos][i])
        return 0

    def query_term_ids(self, tokens: Iterable[str]) -> list[int]:
        """Map tokens to term ids, silently dropping out-of-vocabulary ones."""
        ids = self.vocabulary.ids
        return [ids[t] for t in tokens if t in ids]

    def validate(self) -> None:
        self.vocabulary.validate()
        for pos in range(self.num_docs):
            if int(self.doc_counts[pos].sum()) != int(self.doc_lengths[pos]):
                raise ValueError(f"doc {self.doc_ids[pos]!r}: postings mass != length")
        total = float(self.collection_prob.sum())
        if self.num_terms and abs(total - 1.0) > 1e-9:
            raise ValueError(f"collection model sums to {total!r}, not 1")

    # -- persistence -------------------------------------------------------

    def save(self, path: str) -> None:
        """Write the index to a single versioned binary file."""
        offsets = np.zeros(self.num_docs + 1, dtype=np.int64)
        for pos, tids in enumerate(self.doc_terms):
            offsets[pos + 1] = offsets[pos] + len(tids)
        flat_terms = (
            np.concatenate(self.doc_terms) if self.num_docs else np.zeros(0, dtype=np.int64)
        )
        flat_counts = (
            np.concatenate(self.doc_counts) if self.num_docs else np.zeros(0, dtype=np.int64)
        )
        np.savez_compressed(
            path,
            format_version=np.int64(_FORMAT_VERSION),
            terms=np.array(self.vocabulary.terms, dtype=np.str_),
            df=self.vocabulary.df,
            cf=self.vocabulary.cf,
            total_tokens=np.int64(self.vocabulary.total_tokens),
            doc_ids=np.array(self.doc_ids, dtype=np.str_),
            doc_lengths=self.doc_lengths,
            doc_offsets=offsets,
            doc_flat_terms=flat_terms,
            doc_flat_counts=flat_counts,
        )

    @classmethod
    def load(cls, path: str) -> "CorpusIndex":
        with np.load(path, allow_pickle=False) as data:
            version = int(data["format_version"])
            if version != _FORMAT_VERSION:
                raise ValueError(f"unsupported index format version {version}")
            terms = [str(t) for t in data["terms"]]
            vocab = Vocabulary(
                terms=terms,
                ids={t: i for i, t in enumerate(terms)},
                df=data["df"].astype(np.int64),
                cf=data["cf"].astype(np.int64),
                total_tokens=int(data["total_tokens"]),
            )
            doc_ids = [str(d) for d in data["doc_ids"]]
            offsets = data["doc_offsets"]
            flat_terms = data["doc_flat_terms"]
            flat_counts = data["doc_flat_counts"]
            doc_terms = [
                flat_terms[offsets[i] : offsets[i + 1]].astype(np.int64)
                for i in range(len(doc_ids))
            ]
            doc_counts = [
                flat_counts[offsets[i] : offsets[i + 1]].astype(np.int64)
                for i in range(len(doc_ids))
            ]
            return _assemble(vocab, doc_ids, data["doc_lengths"].astype(np.int64), doc_terms, doc_counts)

    def write_vocab_dump(self, path: str) -> None:
        """Write the human-readable ``term<TAB>id<TAB>df<TAB>cf`` listing."""
        vocab = self.vocabulary
        with open(path, "w", encoding="utf-8") as f:
            for i, term in enumerate(vocab.terms):
                f.write(f"{term}\t{i}\t{int(vocab.df[i])}\t{int(vocab.cf[i])}\n")


def mle_prob(index: CorpusIndex, term_id: int, doc_id: str) -> float:
    """Maximum-likelihood p(term | doc) = count / length; 0 when absent."""
    pos = index.doc_position(doc_id)
    length = int(index.doc_lengths[pos])
    if length == 0:
        raise ValueError(f"document {doc_id!r} is empty")
    return index.term_count(term_id, doc_id) / length


def build_index(
    documents: Iterable[tuple[str, str]],
    stopwords: frozenset[str] | set[str] = frozenset(),
    min_cf: int = 1,
    workers: int = 1,
) -> CorpusIndex:
    """Tokenize a document stream and build the full index.

    Term ids are assigned in sorted term order, so the result does not
    depend on how documents are partitioned across workers. ``min_cf``
    drops terms whose collection frequency is below the threshold; their
    occurrences then count neither toward postings nor document lengths.
    """
    doc_ids: list[str] = []
    seen: set[str] = set()
    tokenized: list[list[str]] = []
    for doc_id, text in documents:
        if doc_id in seen:
            raise DuplicateDocumentError(f"duplicate document id: {doc_id!r}")
        seen.add(doc_id)
        doc_ids.append(doc_id)
        tokenized.append(tokenize(text, stopwords))

    cf_counter = _count_terms(tokenized, workers)
    kept = sorted(t for t, c in cf_counter.items() if c >= min_cf)
    ids = {t: i for i, t in enumerate(kept)}

    n = len(kept)
    df = np.zeros(n, dtype=np.int64)
    cf = np.zeros(n, dtype=np.int64)
    doc_terms: list[np.ndarray] = []
    doc_counts: list[np.ndarray] = []
    doc_lengths = np.zeros(len(doc_ids), dtype=np.int64)
    for pos, tokens in enumerate(tokenized):
        counts = Counter(ids[t] for t in tokens if t in ids)
        tids = np.array(sorted(counts), dtype=np.int64)
        freqs = np.array([counts[t] for t in tids], dtype=np.int64)
        doc_terms.append(tids)
        doc_counts.append(freqs)
        doc_lengths[pos] = int(freqs.sum())
        df[tids] += 1
        cf[tids] += freqs

    vocab = Vocabulary(terms=kept, ids=ids, df=df, cf=cf, total_tokens=int(cf.sum()))
    return _assemble(vocab, doc_ids, doc_lengths, doc_terms, doc_counts)


def read_corpus_file(path: str) -> Iterator[tuple[str, str]]:
    """Yield (doc id, text) pairs from a ``docid<TAB>text`` file."""
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{line_no}: expected 'docid<TAB>text'")
            doc_id, text = line.split("\t", 1)
            yield doc_id, text


def _count_terms(tokenized: list[list[str]], workers: int) -> Counter:
    if workers <= 1 or len(tokenized) < 2 * workers:
        return _count_partition(tokenized)
    chunks = np.array_split(np.arange(len(tokenized)), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_count_partition, ([tokenized[i] for i in c] for c in chunks))
    merged: Counter = Counter()
    for part in parts:
        merged.update(part)
    return merged


def _count_partition(docs: list[list[str]]) -> Counter:
    counts: Counter = Counter()
    for tokens in docs:
        counts.update(tokens)
    return counts


def _assemble(
    vocab: Vocabulary,
    doc_ids: list[str],
    doc_lengths: np.ndarray,
    doc_terms: list[np.ndarray],
    doc_counts: list[np.ndarray],
) -> CorpusIndex:
    by_term_docs: dict[int, list[int]] = {}
    by_term_freqs: dict[int, list[int]] = {}
    for pos, (tids, freqs) in enumerate(zip(doc_terms, doc_counts)):
        for tid, freq in zip(tids.tolist(), freqs.tolist()):
            by_term_docs.setdefault(tid, []).append(pos)
            by_term_freqs.setdefault(tid, []).append(freq)
    postings = {
        tid: (np.array(by_term_docs[tid], dtype=np.int64), np.array(by_term_freqs[tid], dtype=np.int64))
        for tid in by_term_docs
    }
    total = vocab.total_tokens
    collection_prob = vocab.cf / total if total else np.zeros(len(vocab), dtype=np.float64)
    return CorpusIndex(
        vocabulary=vocab,
        doc_ids=doc_ids,
        doc_lengths=doc_lengths,
        doc_terms=doc_terms,
        doc_counts=doc_counts,
        postings=postings,
        collection_prob=collection_prob,
        _doc_pos={d: i for i, d in enumerate(doc_ids)},
    )

"""Synthetic topic-structured collections for smoke tests and experiments.

Documents mix a per-topic vocabulary (frequency-skewed) with shared
background terms; queries sample topic terms, and every same-topic
document counts as relevant. Topic vocabularies are disjoint, so a
centroid classifier over ideal topic-indicator embeddings separates the
classes perfectly; learned embeddings are measured against that ceiling.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import numpy as np

from .classification import LabeledQuery
from .corpus import CorpusIndex, build_index
from .metrics import Qrels
from .pipeline import TrainingSet, generate_training_set
from .relevance import RelevanceDistribution


@dataclass
class SyntheticCollection:
    docs: list[tuple[str, str]]
    doc_topics: dict[str, int]
    topic_terms: list[list[str]]
    background_terms: list[str]
    eval_queries: dict[str, tuple[str, int]]
    train_queries: list[str]
    train_query_topics: list[int]
    qrels: Qrels = field(default_factory=dict)


def _zipf(n: int) -> np.ndarray:
    p = 1.0 / np.arange(1, n + 1)
    return p / p.sum()


def make_collection(
    num_topics: int = 2,
    docs_per_topic: int = 100,
    terms_per_topic: int = 30,
    background_terms: int = 20,
    doc_len: int = 60,
    topical_fraction: float = 0.75,
    eval_queries_per_topic: int = 20,
    train_queries_per_topic: int = 60,
    query_len: int = 2,
    seed: int = 7,
) -> SyntheticCollection:
    rng = np.random.default_rng(seed)
    topic_terms = [
        [f"t{t}w{i:02d}" for i in range(terms_per_topic)] for t in range(num_topics)
    ]
    background = [f"bg{i:02d}" for i in range(background_terms)]
    topic_p = _zipf(terms_per_topic)
    bg_p = _zipf(background_terms)

    docs: list[tuple[str, str]] = []
    doc_topics: dict[str, int] = {}
    for topic in range(num_topics):
        for d in range(docs_per_topic):
            doc_id = f"d{topic * docs_per_topic + d:04d}"
            tokens = []
            for _ in range(doc_len):
                if rng.random() < topical_fraction:
                    tokens.append(topic_terms[topic][rng.choice(terms_per_topic, p=topic_p)])
                else:
                    tokens.append(background[rng.choice(background_terms, p=bg_p)])
            docs.append((doc_id, " ".join(tokens)))
            doc_topics[doc_id] = topic

    def sample_query(topic: int) -> str:
        size = min(query_len, terms_per_topic)
        picks = rng.choice(terms_per_topic, size=size, replace=False, p=topic_p)
        return " ".join(topic_terms[topic][i] for i in picks)

    eval_queries: dict[str, tuple[str, int]] = {}
    for i in range(eval_queries_per_topic * num_topics):
        topic = i % num_topics
        eval_queries[f"e{i:03d}"] = (sample_query(topic), topic)

    train_queries: list[str] = []
    train_query_topics: list[int] = []
    for i in range(train_queries_per_topic * num_topics):
        topic = i % num_topics
        train_queries.append(sample_query(topic))
        train_query_topics.append(topic)

    qrels: Qrels = {
        qid: {doc_id: 1 for doc_id, t in doc_topics.items() if t == topic}
        for qid, (_, topic) in eval_queries.items()
    }
    return SyntheticCollection(
        docs=docs,
        doc_topics=doc_topics,
        topic_terms=topic_terms,
        background_terms=background,
        eval_queries=eval_queries,
        train_queries=train_queries,
        train_query_topics=train_query_topics,
        qrels=qrels,
    )


def make_recoverability_data(
    seed: int = 11,
    num_queries: int = 100,
) -> tuple[CorpusIndex, TrainingSet, list[dict[int, float]]]:
    """Two-topic corpus with planted relevance distributions per query.

    Every query of a topic shares that topic's planted distribution, so a
    well-trained model's per-query term distribution should approach it.
    Returns the index, the training set and the planted target per query.
    """
    coll = make_collection(
        num_topics=2,
        docs_per_topic=100,
        terms_per_topic=24,
        background_terms=12,
        doc_len=60,
        train_queries_per_topic=(num_queries + 1) // 2,
        eval_queries_per_topic=0,
        seed=seed,
    )
    index = build_index(coll.docs)
    vocab_ids = index.vocabulary.ids

    planted: list[dict[int, float]] = []
    for terms in coll.topic_terms:
        present = [vocab_ids[t] for t in terms if t in vocab_ids]
        weights = _zipf(len(present))
        planted.append({tid: float(w) for tid, w in zip(present, weights)})

    training = TrainingSet(num_terms=index.num_terms)
    targets_per_query: list[dict[int, float]] = []
    for i, (text, topic) in enumerate(
        zip(coll.train_queries[:num_queries], coll.train_query_topics[:num_queries])
    ):
        tids = index.query_term_ids(text.split())
        if not tids:
            continue
        qid = f"p{i:04d}"
        training.query_ids.append(qid)
        training.query_texts.append(text)
        training.queries.append(np.array(tids, dtype=np.int64))
        training.targets.append(
            RelevanceDistribution(query_id=qid, probs=dict(planted[topic]), feedback_size=0)
        )
        targets_per_query.append(planted[topic])
    return index, training, targets_per_query


def make_classification_data(
    seed: int = 13,
) -> tuple[CorpusIndex, TrainingSet, list[LabeledQuery]]:
    """Six separated topics: a corpus, pipeline training data and 60 labels."""
    coll = make_collection(
        num_topics=6,
        docs_per_topic=40,
        terms_per_topic=18,
        background_terms=10,
        doc_len=50,
        eval_queries_per_topic=10,
        train_queries_per_topic=20,
        seed=seed,
    )
    index = build_index(coll.docs)
    training = generate_training_set(index, coll.train_queries, k=10, mu=1500.0)
    labeled = [
        LabeledQuery(query_id=qid, text=text, editors=[[f"class{topic}"]])
        for qid, (text, topic) in sorted(coll.eval_queries.items())
    ]
    return index, training, labeled


def write_toy_files(out_dir: str, seed: int = 7) -> dict[str, str]:
    """Write the bundled toy collection: corpus, queries, qrels, query log.

    The query log deliberately contains navigational and duplicate lines
    so the cleaning stage has something to do.
    """
    import os

    coll = make_collection(seed=seed)
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "corpus": os.path.join(out_dir, "corpus.tsv"),
        "queries": os.path.join(out_dir, "queries.tsv"),
        "qrels": os.path.join(out_dir, "qrels.txt"),
        "query_log": os.path.join(out_dir, "query_log.txt"),
    }
    with open(paths["corpus"], "w", encoding="utf-8") as f:
        for doc_id, text in coll.docs:
            f.write(f"{doc_id}\t{text}\n")
    with open(paths["queries"], "w", encoding="utf-8") as f:
        for qid, (text, _) in sorted(coll.eval_queries.items()):
            f.write(f"{qid}\t{text}\n")
    with open(paths["qrels"], "w", encoding="utf-8") as f:
        for qid in sorted(coll.qrels):
            for doc_id in sorted(coll.qrels[qid]):
                f.write(f"{qid} 0 {doc_id} {coll.qrels[qid][doc_id]}\n")
    with open(paths["query_log"], "w", encoding="utf-8") as f:
        f.write("www.example.com cheap flights\n")
        f.write("http search engine\n")
        for text in coll.train_queries:
            f.write(text + "\n")
        if coll.train_queries:
            f.write(coll.train_queries[0] + "\n")
    return paths


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "toy"
    for name, path in sorted(write_toy_files(target).items()):
        print(f"{name}: {path}")

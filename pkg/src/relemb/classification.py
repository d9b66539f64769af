"""Multi-label query classification by similarity to category centroids.

A category's centroid is the mean embedding of its training queries; test
queries get the top-t categories by cosine similarity. Evaluation follows
the multi-editor protocol: micro-averaged precision/recall per editor,
F1 from the aggregates, then the arithmetic mean over editors. A macro
variant (per-query averaging) sits behind a flag for comparison.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ProjectionError
from .inference import similarity
from .model import EmbeddingModel, project_query
from .tokenization import tokenize

logger = logging.getLogger(__name__)

MAX_LABELS_PER_EDITOR = 5


@dataclass
class LabeledQuery:
    """A query with the label lists assigned by up to three editors."""

    query_id: str
    text: str
    editors: list[list[str]]

    def all_labels(self) -> set[str]:
        return {label for labels in self.editors for label in labels}

    def validate(self, categories: set[str] | None = None) -> None:
        for labels in self.editors:
            if len(labels) > MAX_LABELS_PER_EDITOR:
                raise ValueError(
                    f"query {self.query_id!r}: more than "
                    f"{MAX_LABELS_PER_EDITOR} labels from one editor"
                )
            if categories is not None:
                unknown = set(labels) - categories
                if unknown:
                    raise ValueError(
                        f"query {self.query_id!r}: labels outside the category set: {unknown}"
                    )


@dataclass
class CentroidTable:
    """Per-category mean query vectors; label order fixes tie-breaking."""

    labels: list[str]
    vectors: np.ndarray
    member_counts: list[int]
    skipped_queries: int = 0
    excluded_labels: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.labels)

    def validate(self) -> None:
        if self.vectors.shape[0] != len(self.labels):
            raise ValueError("centroid matrix disagrees with label count")
        if any(c < 1 for c in self.member_counts):
            raise ValueError("every centroid needs at least one member")


def build_centroid_table(
    vector_label_pairs: Sequence[tuple[np.ndarray, Sequence[str]]],
    label_order: Sequence[str] | None = None,
    skipped_queries: int = 0,
) -> CentroidTable:
    """Average already-projected query vectors into per-label centroids."""
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for qvec, labels in vector_label_pairs:
        for label in sorted(set(labels)):
            if label in sums:
                sums[label] += qvec
                counts[label] += 1
            else:
                sums[label] = qvec.copy()
                counts[label] = 1
    order = list(label_order) if label_order is not None else sorted(sums)
    excluded = [label for label in order if label not in sums]
    if excluded:
        logger.warning("categories without projectable training queries: %s", excluded)
    kept = [label for label in order if label in sums]
    if not kept:
        raise ValueError("no category has a projectable training query")
    return CentroidTable(
        labels=kept,
        vectors=np.stack([sums[label] / counts[label] for label in kept]),
        member_counts=[counts[label] for label in kept],
        skipped_queries=skipped_queries,
        excluded_labels=excluded,
    )


def compute_centroids(
    model: EmbeddingModel,
    labeled: Sequence[LabeledQuery],
    stopwords: frozenset[str] | set[str] = frozenset(),
    label_order: Sequence[str] | None = None,
) -> CentroidTable:
    """Mean query vector per category over all queries carrying its label.

    A query counts toward every label any editor gave it. Queries with no
    projectable terms are skipped; categories left without members are
    excluded with a warning.
    """
    pairs = []
    skipped = 0
    for query in labeled:
        tids = model.term_ids(tokenize(query.text, stopwords))
        try:
            qvec = project_query(model, tids)
        except ProjectionError:
            skipped += 1
            continue
        pairs.append((qvec, query.all_labels()))
    return build_centroid_table(pairs, label_order=label_order, skipped_queries=skipped)


def classify(
    model: EmbeddingModel,
    centroids: CentroidTable,
    query_tokens: Sequence[str],
    t: int,
) -> list[str]:
    """Top-t category labels by cosine to the query vector.

    Ties break on label id (centroid-table order). A query that cannot be
    projected yields an empty prediction, which callers should flag.
    """
    if not 1 <= t <= MAX_LABELS_PER_EDITOR:
        raise ValueError(f"t must be in 1..{MAX_LABELS_PER_EDITOR}")
    tids = model.term_ids(query_tokens)
    try:
        qvec = project_query(model, tids)
    except ProjectionError:
        return []
    scored = []
    for idx, label in enumerate(centroids.labels):
        try:
            score = similarity(centroids.vectors[idx], qvec)
        except ValueError:
            score = 0.0
        scored.append((-score, idx, label))
    scored.sort()
    return [label for _, _, label in scored[:t]]


@dataclass
class ClassificationMetrics:
    precision: float
    recall: float
    f1: float


def evaluate_classification(
    predictions: Mapping[str, Sequence[str]],
    gold: Sequence[LabeledQuery],
    macro: bool = False,
) -> ClassificationMetrics:
    """Precision/recall/F1 against multi-editor gold labels.

    Micro (default): per editor, pool intersection/prediction/gold counts
    over queries, F1 from the pooled precision and recall, then average
    the editors. Macro: per-query precision/recall averaged first.
    """
    by_id = {q.query_id: q for q in gold}
    missing = [qid for qid in predictions if qid not in by_id]
    if missing:
        raise ValueError(f"predictions without gold labels: {missing[:5]}")
    if not any(len(p) > 0 for p in predictions.values()):
        raise ValueError("all predictions are empty")

    num_editors = max((len(q.editors) for q in gold), default=0)
    per_editor: list[ClassificationMetrics] = []
    for e in range(num_editors):
        pairs = []
        for qid, pred in predictions.items():
            query = by_id[qid]
            if e >= len(query.editors) or not query.editors[e]:
                continue
            pairs.append((set(pred), set(query.editors[e])))
        if not pairs:
            continue
        if macro:
            p = math.fsum(
                (len(pred & g) / len(pred)) if pred else 0.0 for pred, g in pairs
            ) / len(pairs)
            r = math.fsum(len(pred & g) / len(g) for pred, g in pairs) / len(pairs)
        else:
            inter = sum(len(pred & g) for pred, g in pairs)
            pred_total = sum(len(pred) for pred, _ in pairs)
            gold_total = sum(len(g) for _, g in pairs)
            p = inter / pred_total if pred_total else 0.0
            r = inter / gold_total if gold_total else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        per_editor.append(ClassificationMetrics(precision=p, recall=r, f1=f1))
    if not per_editor:
        raise ValueError("no editor has gold labels for the predicted queries")
    k = len(per_editor)
    return ClassificationMetrics(
        precision=math.fsum(m.precision for m in per_editor) / k,
        recall=math.fsum(m.recall for m in per_editor) / k,
        f1=math.fsum(m.f1 for m in per_editor) / k,
    )


@dataclass
class ClassificationReport:
    """Cross-validation outcome: mean metrics plus per-fold detail."""

    precision: float
    f1: float
    fold_metrics: list[ClassificationMetrics]
    fold_t: list[int]
    empty_predictions: int

    def format_text(self) -> str:
        lines = [f"{'fold':<6}{'t':>3}{'precision':>12}{'F1':>10}"]
        for fold, (metrics, t) in enumerate(zip(self.fold_metrics, self.fold_t)):
            lines.append(f"{fold:<6}{t:>3}{metrics.precision:>12.4f}{metrics.f1:>10.4f}")
        lines.append(f"{'mean':<6}{'':>3}{self.precision:>12.4f}{self.f1:>10.4f}")
        if self.empty_predictions:
            lines.append(f"queries with empty predictions: {self.empty_predictions}")
        return "\n".join(lines) + "\n"

    def machine_lines(self) -> list[str]:
        return [
            f"precision\tcentroid\t{self.precision:.6f}",
            f"f1\tcentroid\t{self.f1:.6f}",
        ]


def cross_validate_classification(
    model: EmbeddingModel,
    labeled: Sequence[LabeledQuery],
    folds: int = 5,
    seed: int = 42,
    t_grid: Sequence[int] = (1, 2, 3, 4, 5),
    stopwords: frozenset[str] | set[str] = frozenset(),
    macro: bool = False,
    label_order: Sequence[str] | None = None,
) -> ClassificationReport:
    """Tune t per fold on the training split, evaluate on the held fold.

    Fold assignment is a seeded permutation of the queries (sorted by id),
    cut into ``folds`` contiguous chunks, so a fixed seed reproduces the
    exact split. Ties in training F1 prefer the smaller t.
    """
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if len(labeled) < folds:
        raise ValueError(f"only {len(labeled)} labeled queries for {folds} folds")
    ordered = sorted(labeled, key=lambda q: q.query_id)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ordered))
    chunks = np.array_split(order, folds)

    fold_metrics: list[ClassificationMetrics] = []
    fold_t: list[int] = []
    empty = 0
    for chunk in chunks:
        test = [ordered[i] for i in chunk]
        test_set = {q.query_id for q in test}
        train = [q for q in ordered if q.query_id not in test_set]
        centroids = compute_centroids(model, train, stopwords, label_order=label_order)

        best_t, best_f1 = None, -1.0
        for t in t_grid:
            preds = {
                q.query_id: classify(model, centroids, tokenize(q.text, stopwords), t)
                for q in train
            }
            f1 = evaluate_classification(preds, train, macro=macro).f1
            if f1 > best_f1:
                best_t, best_f1 = t, f1
        fold_t.append(best_t)

        preds = {
            q.query_id: classify(model, centroids, tokenize(q.text, stopwords), best_t)
            for q in test
        }
        empty += sum(1 for p in preds.values() if not p)
        fold_metrics.append(evaluate_classification(preds, test, macro=macro))

    k = len(fold_metrics)
    return ClassificationReport(
        precision=math.fsum(m.precision for m in fold_metrics) / k,
        f1=math.fsum(m.f1 for m in fold_metrics) / k,
        fold_metrics=fold_metrics,
        fold_t=fold_t,
        empty_predictions=empty,
    )


# -- file formats -------------------------------------------------------------


def read_labeled_queries(path: str) -> list[LabeledQuery]:
    """Parse ``qid<TAB>query<TAB>editor1:lbl,lbl;editor2:lbl,...`` lines."""
    out: list[LabeledQuery] = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{line_no}: expected 3 tab-separated fields")
            qid, text, label_field = parts
            editors = []
            for segment in label_field.split(";"):
                segment = segment.strip()
                if not segment:
                    continue
                _, _, labels = segment.partition(":")
                editors.append([lbl for lbl in labels.split(",") if lbl])
            query = LabeledQuery(query_id=qid, text=text, editors=editors)
            query.validate()
            out.append(query)
    return out


def write_predictions(predictions: Mapping[str, Sequence[str]], path: str) -> None:
    """Write ``qid<TAB>lbl,lbl,...`` lines in sorted query order."""
    with open(path, "w", encoding="utf-8") as f:
        for qid in sorted(predictions):
            f.write(f"{qid}\t{','.join(predictions[qid])}\n")


def read_category_list(path: str) -> list[str]:
    """One label per line; ids follow line order."""
    with open(path, encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]

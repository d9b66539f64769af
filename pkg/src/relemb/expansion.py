"""Embedding-based query expansion and its cross-validated evaluation.

The expanded query model interpolates the query's maximum-likelihood model
with the renormalized top-m terms of the embedding's term distribution:
``alpha * p_ml + (1 - alpha) * p_emb``. Terms appearing in both sources
add their masses, so the output always sums to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .corpus import CorpusIndex
from .errors import OutOfVocabularyQueryError, ProjectionError
from .inference import term_distribution
from .metrics import (
    Qrels,
    TTestResult,
    average_precision,
    ndcg_at_k,
    paired_ttest,
    precision_at_k,
)
from .model import EmbeddingModel
from .retrieval import QueryLanguageModel, RankedList, kl_retrieve, ql_retrieve

METRICS = ("map", "p20", "ndcg20")


@dataclass
class ExpansionConfig:
    alpha: float = 0.5
    num_terms: int = 10
    mu: float = 1500.0

    def validate(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.num_terms < 1:
            raise ValueError("num_terms must be >= 1")
        if self.mu <= 0:
            raise ValueError("mu must be positive")


@dataclass
class ExpandedQuery:
    model: QueryLanguageModel
    used_embedding: bool


def expand_query(
    model: EmbeddingModel,
    index: CorpusIndex,
    query_tokens: Sequence[str],
    cfg: ExpansionConfig,
) -> ExpandedQuery:
    """Interpolate the query MLE model with the embedding term distribution.

    Falls back to the pure MLE model (flagged) when the query cannot be
    projected or none of the scored terms exist in the index vocabulary.
    """
    cfg.validate()
    mle = QueryLanguageModel.from_tokens(index, query_tokens)
    raw = _embedding_raw_scores(model, index, query_tokens, cfg.num_terms)
    emb = _renormalize_prefix(raw, cfg.num_terms)
    if emb is None:
        return ExpandedQuery(model=mle, used_embedding=False)
    return ExpandedQuery(model=_interpolate(mle, emb, cfg.alpha), used_embedding=True)


# -- cross-validated experiment ----------------------------------------------


@dataclass
class ExpansionReport:
    """Pooled held-out metrics plus the per-fold tuned parameters."""

    expanded: dict[str, float]
    baseline: dict[str, float]
    fold_choices: list[tuple[float, int]]
    fold_train_map: list[float]
    ttest: TTestResult | None
    num_queries: int
    excluded: dict[str, list[str]]
    per_query_expanded_ap: dict[str, float] = field(default_factory=dict)
    per_query_baseline_ap: dict[str, float] = field(default_factory=dict)
    grid_train_map: list[dict[tuple[float, int], float]] = field(default_factory=list)

    def format_text(self) -> str:
        lines = [
            f"{'system':<12}{'MAP':>10}{'P@20':>10}{'nDCG@20':>10}",
            f"{'baseline':<12}{self.baseline['map']:>10.4f}"
            f"{self.baseline['p20']:>10.4f}{self.baseline['ndcg20']:>10.4f}",
            f"{'expanded':<12}{self.expanded['map']:>10.4f}"
            f"{self.expanded['p20']:>10.4f}{self.expanded['ndcg20']:>10.4f}",
        ]
        for fold, ((alpha, m), train_map) in enumerate(
            zip(self.fold_choices, self.fold_train_map)
        ):
            lines.append(
                f"fold {fold}: alpha={alpha:g} terms={m} (train MAP {train_map:.4f})"
            )
        if self.ttest is not None:
            flag = "significant" if self.ttest.significant else "not significant"
            if self.ttest.degenerate:
                flag += " (degenerate: zero-variance differences)"
            lines.append(f"paired t-test on AP: p={self.ttest.pvalue:.4f} ({flag})")
        lines.append(f"queries evaluated: {self.num_queries}")
        for reason, qids in sorted(self.excluded.items()):
            if qids:
                lines.append(f"excluded ({reason}): {' '.join(qids)}")
        return "\n".join(lines) + "\n"

    def machine_lines(self) -> list[str]:
        rows = []
        for metric in METRICS:
            rows.append(f"{metric}\tbaseline\t{self.baseline[metric]:.6f}")
            rows.append(f"{metric}\texpanded\t{self.expanded[metric]:.6f}")
        if self.ttest is not None:
            rows.append(f"pvalue_map\texpanded\t{self.ttest.pvalue:.6g}")
        return rows


def _query_metrics(run: RankedList, qrels: Qrels, cutoff: int) -> dict[str, float]:
    return {
        "map": average_precision(run, qrels, cutoff=cutoff),
        "p20": precision_at_k(run, qrels, k=20),
        "ndcg20": ndcg_at_k(run, qrels, k=20),
    }


def cross_validate_expansion(
    model: EmbeddingModel,
    index: CorpusIndex,
    queries: Mapping[str, Sequence[str]],
    qrels: Qrels,
    alpha_grid: Sequence[float] = tuple(round(0.1 * i, 1) for i in range(1, 10)),
    m_grid: Sequence[int] = tuple(range(10, 101, 10)),
    folds: int = 2,
    k: int = 1000,
    mu: float = 1500.0,
    dump_dir: str | None = None,
) -> ExpansionReport:
    """Tune (alpha, m) per fold on training MAP, evaluate on the held fold.

    The fold split is deterministic: queries sorted by id, assigned round
    robin by position. Ties in training MAP prefer the larger alpha, then
    the fewer expansion terms. With ``dump_dir`` set, every grid point's
    run is written there in TREC format.
    """
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if not alpha_grid or not m_grid:
        raise ValueError("parameter grids must be non-empty")

    excluded: dict[str, list[str]] = {"no_qrels": [], "out_of_vocabulary": []}
    usable: list[str] = []
    baseline_metrics: dict[str, dict[str, float]] = {}
    for qid in sorted(queries):
        judged = qrels.get(qid, {})
        if not any(g > 0 for g in judged.values()):
            excluded["no_qrels"].append(qid)
            continue
        try:
            run = ql_retrieve(index, queries[qid], k=k, mu=mu, query_id=qid)
        except OutOfVocabularyQueryError:
            excluded["out_of_vocabulary"].append(qid)
            continue
        baseline_metrics[qid] = _query_metrics(run, qrels, cutoff=k)
        usable.append(qid)
    if len(usable) < folds:
        raise ValueError(f"only {len(usable)} usable queries for {folds} folds")

    max_m = max(m_grid)
    grid_metrics: dict[tuple[float, int], dict[str, dict[str, float]]] = {}
    grid_runs: dict[tuple[float, int], list[RankedList]] = {}
    for qid in usable:
        tokens = queries[qid]
        raw = _embedding_raw_scores(model, index, tokens, max_m)
        mle = QueryLanguageModel.from_tokens(index, tokens)
        for m in m_grid:
            emb = _renormalize_prefix(raw, m)
            for alpha in alpha_grid:
                qlm = _interpolate(mle, emb, alpha)
                run = kl_retrieve(index, qlm, k=k, mu=mu, query_id=qid)
                grid_metrics.setdefault((alpha, m), {})[qid] = _query_metrics(
                    run, qrels, cutoff=k
                )
                if dump_dir is not None:
                    grid_runs.setdefault((alpha, m), []).append(run)
    if dump_dir is not None:
        _dump_grid_runs(grid_runs, dump_dir)

    fold_of = {qid: pos % folds for pos, qid in enumerate(usable)}
    fold_choices: list[tuple[float, int]] = []
    fold_train_map: list[float] = []
    grid_train_map: list[dict[tuple[float, int], float]] = []
    expanded_per_query: dict[str, dict[str, float]] = {}
    for fold in range(folds):
        train_qids = [q for q in usable if fold_of[q] != fold]
        test_qids = [q for q in usable if fold_of[q] == fold]
        train_maps = {
            point: math.fsum(grid_metrics[point][q]["map"] for q in train_qids)
            / len(train_qids)
            for point in grid_metrics
        }
        best = max(train_maps, key=lambda p: (train_maps[p], p[0], -p[1]))
        fold_choices.append(best)
        fold_train_map.append(train_maps[best])
        grid_train_map.append(train_maps)
        for qid in test_qids:
            expanded_per_query[qid] = grid_metrics[best][qid]

    expanded = {
        metric: math.fsum(expanded_per_query[q][metric] for q in usable) / len(usable)
        for metric in METRICS
    }
    baseline = {
        metric: math.fsum(baseline_metrics[q][metric] for q in usable) / len(usable)
        for metric in METRICS
    }
    ttest = paired_ttest(
        [expanded_per_query[q]["map"] for q in usable],
        [baseline_metrics[q]["map"] for q in usable],
    )
    return ExpansionReport(
        expanded=expanded,
        baseline=baseline,
        fold_choices=fold_choices,
        fold_train_map=fold_train_map,
        ttest=ttest,
        num_queries=len(usable),
        excluded=excluded,
        per_query_expanded_ap={q: expanded_per_query[q]["map"] for q in usable},
        per_query_baseline_ap={q: baseline_metrics[q]["map"] for q in usable},
        grid_train_map=grid_train_map,
    )


def _dump_grid_runs(
    grid_runs: Mapping[tuple[float, int], Sequence[RankedList]], dump_dir: str
) -> None:
    import os

    from .retrieval import write_trec_run

    os.makedirs(dump_dir, exist_ok=True)
    for (alpha, m), runs in sorted(grid_runs.items()):
        path = os.path.join(dump_dir, f"run_alpha{alpha:g}_m{m}.trec")
        write_trec_run(runs, path, tag=f"expand_a{alpha:g}_m{m}")


def _embedding_raw_scores(
    model: EmbeddingModel, index: CorpusIndex, tokens: Sequence[str], max_m: int
) -> list[tuple[int, float]]:
    """Top-``max_m`` embedding scores in index-term space, unnormalized."""
    model_tids = model.term_ids(tokens)
    try:
        scores = term_distribution(model, model_tids, max_m, renormalize=False)
    except ProjectionError:
        return []
    vocab_ids = index.vocabulary.ids
    mapped = []
    for tid, score in scores.entries:
        index_tid = vocab_ids.get(model.terms[tid])
        if index_tid is not None:
            mapped.append((index_tid, score))
    return mapped


def _renormalize_prefix(raw: list[tuple[int, float]], m: int) -> dict[int, float] | None:
    prefix = raw[:m]
    total = sum(s for _, s in prefix)
    if total <= 0.0:
        return None
    return {tid: s / total for tid, s in prefix}


def _interpolate(
    mle: QueryLanguageModel, emb: dict[int, float] | None, alpha: float
) -> QueryLanguageModel:
    if emb is None:
        return mle
    combined = {tid: alpha * p for tid, p in mle.probs.items()}
    if alpha == 1.0:
        return QueryLanguageModel(combined)
    for tid, p in emb.items():
        combined[tid] = combined.get(tid, 0.0) + (1.0 - alpha) * p
    if alpha == 0.0:
        combined = {tid: p for tid, p in combined.items() if p > 0.0}
    return QueryLanguageModel(combined)

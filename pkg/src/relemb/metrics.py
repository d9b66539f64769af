"""Ranked-retrieval metrics and paired significance testing.

Metrics depend only on the ordering of a run, never on score magnitudes.
Unjudged documents count as non-relevant. nDCG uses exponential gains
(2^grade - 1) with a log2(rank + 1) discount, the common trec-eval
variant; this is the main comparability caveat when matching numbers
produced by other toolkits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .retrieval import RankedList

Qrels = dict[str, dict[str, int]]


def read_qrels(path: str) -> Qrels:
    """Read TREC qrels: ``qid 0 docid rel`` per line."""
    qrels: Qrels = {}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ValueError(f"{path}:{line_no}: expected 'qid 0 docid rel'")
            qid, _, doc_id, rel = parts
            grade = int(rel)
            if grade < 0:
                raise ValueError(f"{path}:{line_no}: negative relevance grade")
            qrels.setdefault(qid, {})[doc_id] = grade
    return qrels


def read_trec_run(path: str) -> list[RankedList]:
    """Read a TREC run file back into ranked lists (per-query input order)."""
    by_query: dict[str, RankedList] = {}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise ValueError(f"{path}:{line_no}: expected 6 TREC run fields")
            qid, _, doc_id, _, score, _ = parts
            by_query.setdefault(qid, RankedList(qid)).entries.append((doc_id, float(score)))
    return list(by_query.values())


def _grades(run: RankedList, qrels: Qrels) -> list[int]:
    judged = qrels.get(run.query_id, {})
    return [judged.get(doc_id, 0) for doc_id, _ in run.entries]


def average_precision(run: RankedList, qrels: Qrels, cutoff: int = 1000) -> float:
    """Mean of precision at each relevant rank within the cutoff."""
    judged = qrels.get(run.query_id, {})
    total_relevant = sum(1 for g in judged.values() if g > 0)
    if total_relevant == 0:
        raise ValueError(f"query {run.query_id!r} has no relevant documents")
    hits = 0
    total = 0.0
    for rank, grade in enumerate(_grades(run, qrels)[:cutoff], 1):
        if grade > 0:
            hits += 1
            total += hits / rank
    return total / total_relevant


def precision_at_k(run: RankedList, qrels: Qrels, k: int = 20) -> float:
    """Relevant among the top k, over a fixed denominator of k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return sum(1 for g in _grades(run, qrels)[:k] if g > 0) / k


def ndcg_at_k(run: RankedList, qrels: Qrels, k: int = 20) -> float:
    """Discounted cumulative gain at k over the ideal ordering's."""
    if k < 1:
        raise ValueError("k must be >= 1")
    judged = qrels.get(run.query_id, {})
    ideal = sorted((g for g in judged.values() if g > 0), reverse=True)
    if not ideal:
        raise ValueError(f"query {run.query_id!r} has no positive grades")
    dcg = sum(
        (2.0**g - 1.0) / math.log2(rank + 1)
        for rank, g in enumerate(_grades(run, qrels)[:k], 1)
    )
    idcg = sum((2.0**g - 1.0) / math.log2(rank + 1) for rank, g in enumerate(ideal[:k], 1))
    return dcg / idcg


@dataclass
class TTestResult:
    statistic: float
    pvalue: float
    significant: bool
    degenerate: bool = False


def paired_ttest(a: Sequence[float], b: Sequence[float], alpha: float = 0.05) -> TTestResult:
    """Two-tailed paired t-test on per-query metric values.

    All-zero differences give p = 1. Constant non-zero differences have no
    variance to test against; the result is flagged degenerate with p = 0.
    Variance below float noise around the mean difference counts as zero.
    """
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    n = len(a)
    if n < 2:
        raise ValueError("need at least 2 paired samples")
    diffs = [x - y for x, y in zip(a, b)]
    mean = math.fsum(diffs) / n
    var = math.fsum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var <= (1e-12 * abs(mean)) ** 2:
        if mean == 0.0 and var == 0.0:
            return TTestResult(statistic=0.0, pvalue=1.0, significant=False)
        return TTestResult(
            statistic=math.copysign(math.inf, mean), pvalue=0.0, significant=True, degenerate=True
        )
    t = mean / math.sqrt(var / n)
    p = student_t_two_tailed(t, n - 1)
    return TTestResult(statistic=t, pvalue=p, significant=p < alpha)


def student_t_two_tailed(t: float, df: int) -> float:
    """P(|T| >= t) for Student's t with ``df`` degrees of freedom.

    Uses the identity P(|T| >= t) = I_x(df/2, 1/2) with x = df/(df + t^2),
    where I is the regularized incomplete beta function.
    """
    if df < 1:
        raise ValueError("degrees of freedom must be >= 1")
    x = df / (df + t * t)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by the standard continued-fraction expansion."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # The expansion converges fastest for x below the split point.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def _beta_continued_fraction(a: float, b: float, x: float, max_iter: int = 300) -> float:
    """Modified Lentz evaluation of the incomplete-beta continued fraction."""
    tiny = 1e-300
    eps = 1e-15
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        coef = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + coef * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + coef / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        coef = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + coef * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + coef / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def write_metric_file(
    path: str, per_query: Mapping[str, Mapping[str, float]], metrics: Iterable[str]
) -> None:
    """Write ``metric<TAB>qid<TAB>value`` lines plus an ``all`` mean row."""
    qids = sorted(per_query)
    with open(path, "w", encoding="utf-8") as f:
        for metric in metrics:
            values = []
            for qid in qids:
                value = per_query[qid][metric]
                values.append(value)
                f.write(f"{metric}\t{qid}\t{value:.6f}\n")
            mean = math.fsum(values) / len(values) if values else 0.0
            f.write(f"{metric}\tall\t{mean:.6f}\n")

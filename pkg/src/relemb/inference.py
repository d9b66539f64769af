"""Read-only scoring over a trained model.

Likelihood models yield a proper distribution over the vocabulary through
the coding tree; posterior models yield per-term relevance scores (the
logistic output), which rank terms correctly under a uniform prior even
though they are not a generative distribution. Both are cut to the top m
terms and renormalized, which preserves the ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CheckpointError
from .huffman import HuffmanTree
from .model import (
    KIND_LIKELIHOOD,
    KIND_POSTERIOR,
    EmbeddingModel,
    hs_all_probs,
    project_query,
    sigmoid,
)

SCORE_PROBABILITY = "probability"
SCORE_POSTERIOR = "posterior"


@dataclass
class TermScoreList:
    """Top-scoring terms for one query, highest first."""

    query_id: str
    entries: list[tuple[int, float]]
    semantics: str

    def __len__(self) -> int:
        return len(self.entries)

    def as_dict(self) -> dict[int, float]:
        return dict(self.entries)

    def validate(self) -> None:
        scores = [s for _, s in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("scores are not non-increasing")
        if self.semantics == SCORE_PROBABILITY and self.entries:
            total = sum(scores)
            if abs(total - 1.0) > 1e-6:
                raise ValueError(f"renormalized scores sum to {total!r}, not 1")


def term_distribution(
    model: EmbeddingModel,
    query_tids: Sequence[int],
    m: int,
    query_id: str = "",
    renormalize: bool = True,
) -> TermScoreList:
    """Top-m term scores for a query, renormalized over the returned terms.

    Ties break on the lower term id so the cut is deterministic.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    qvec = project_query(model, query_tids)
    if model.kind == KIND_LIKELIHOOD:
        scores = hs_all_probs(model, qvec)
        semantics = SCORE_PROBABILITY
    else:
        scores = sigmoid(model.term_vecs @ qvec)
        semantics = SCORE_POSTERIOR
    m = min(m, model.num_terms)
    # argsort on (-score, id): stable sort over ids already in ascending order.
    top = np.argsort(-scores, kind="stable")[:m]
    picked = [(int(t), float(scores[t])) for t in top]
    if renormalize:
        total = sum(s for _, s in picked)
        picked = [(t, s / total) for t, s in picked]
        semantics = SCORE_PROBABILITY
    return TermScoreList(query_id=query_id, entries=picked, semantics=semantics)


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; rejects zero vectors."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity is undefined for zero vectors")
    return float(np.dot(a, b) / (na * nb))


def write_term_scores(lists: Sequence[TermScoreList], model: EmbeddingModel, path: str) -> None:
    """Emit term lists as ``qid<TAB>term<TAB>score`` lines."""
    with open(path, "w", encoding="utf-8") as f:
        for scores in lists:
            for tid, score in scores.entries:
                f.write(f"{scores.query_id}\t{model.terms[tid]}\t{score:.12g}\n")


# -- checkpoint loading ------------------------------------------------------


def load_model(prefix: str) -> EmbeddingModel:
    """Load a checkpoint written by ``model.save_checkpoint``.

    Every parameter round-trips at full printed precision; inconsistent
    headers or malformed lines are rejected with the offending location.
    """
    manifest = _read_manifest(f"{prefix}.manifest")
    kind = manifest.get("kind", "")
    if kind not in (KIND_LIKELIHOOD, KIND_POSTERIOR):
        raise CheckpointError(f"{prefix}.manifest: unknown kind {kind!r}")
    dim = int(manifest["dim"])
    num_terms = int(manifest["num_terms"])

    terms, query_vecs = _read_vectors(f"{prefix}.query.vec")
    term_names, term_vecs = _read_vectors(f"{prefix}.term.vec")
    if terms != term_names:
        raise CheckpointError(f"{prefix}: query.vec and term.vec disagree on terms")
    for name, matrix in (("query.vec", query_vecs), ("term.vec", term_vecs)):
        if matrix.shape != (num_terms, dim):
            raise CheckpointError(
                f"{prefix}.{name}: shape {matrix.shape} does not match manifest "
                f"({num_terms}, {dim})"
            )

    bias = None
    if manifest.get("bias") == "True":
        bias = _read_bias(f"{prefix}.bias", terms)

    tree = None
    node_vecs = None
    if manifest.get("tree") == "True":
        tree = _read_tree(f"{prefix}.tree", terms)
        node_names, node_vecs = _read_vectors(f"{prefix}.nodes.vec")
        if node_names != [str(i) for i in range(tree.num_internal)]:
            raise CheckpointError(f"{prefix}.nodes.vec: node ids disagree with tree")
        if node_vecs.shape != (tree.num_internal, dim):
            raise CheckpointError(f"{prefix}.nodes.vec: dimensionality mismatch")

    seed_text = manifest.get("seed", "")
    model = EmbeddingModel(
        kind=kind,
        dim=dim,
        terms=terms,
        query_vecs=query_vecs,
        term_vecs=term_vecs,
        bias=bias,
        tree=tree,
        node_vecs=node_vecs,
        seed=int(seed_text) if seed_text else None,
        config_echo={
            k.removeprefix("config."): v for k, v in manifest.items() if k.startswith("config.")
        },
    )
    model.validate()
    return model


def _read_manifest(path: str) -> dict[str, str]:
    manifest: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CheckpointError(f"{path}:{line_no}: expected 'key = value'")
            key, _, value = line.partition("=")
            manifest[key.strip()] = value.strip()
    return manifest


def _read_vectors(path: str) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise CheckpointError(f"{path}:1: expected 'count dim' header")
        count, dim = int(header[0]), int(header[1])
        names: list[str] = []
        matrix = np.empty((count, dim), dtype=np.float64)
        for row in range(count):
            line = f.readline()
            if not line:
                raise CheckpointError(f"{path}: truncated at row {row + 1} of {count}")
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise CheckpointError(
                    f"{path}:{row + 2}: expected name plus {dim} values, got {len(parts) - 1}"
                )
            names.append(parts[0])
            matrix[row] = [float(v) for v in parts[1:]]
        if f.readline():
            raise CheckpointError(f"{path}: trailing lines after {count} rows")
    return names, matrix


def _read_bias(path: str, terms: list[str]) -> np.ndarray:
    ids = {t: i for i, t in enumerate(terms)}
    bias = np.zeros(len(terms), dtype=np.float64)
    seen = 0
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            term, _, value = line.partition("\t")
            if term not in ids:
                raise CheckpointError(f"{path}:{line_no}: unknown term {term!r}")
            bias[ids[term]] = float(value)
            seen += 1
    if seen != len(terms):
        raise CheckpointError(f"{path}: {seen} bias entries for {len(terms)} terms")
    return bias


def _read_tree(path: str, terms: list[str]) -> HuffmanTree:
    ids = {t: i for i, t in enumerate(terms)}
    paths: list[np.ndarray | None] = [None] * len(terms)
    signs: list[np.ndarray | None] = [None] * len(terms)
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            term, _, steps = line.partition("\t")
            if term not in ids:
                raise CheckpointError(f"{path}:{line_no}: unknown term {term!r}")
            node_list: list[int] = []
            sign_list: list[int] = []
            for step in steps.split():
                if step[-1] not in "+-":
                    raise CheckpointError(f"{path}:{line_no}: bad path step {step!r}")
                node_list.append(int(step[:-1]))
                sign_list.append(1 if step[-1] == "+" else -1)
            tid = ids[term]
            paths[tid] = np.array(node_list, dtype=np.int64)
            signs[tid] = np.array(sign_list, dtype=np.int64)
    missing = [terms[i] for i, p in enumerate(paths) if p is None]
    if missing:
        raise CheckpointError(f"{path}: missing path for terms {missing[:3]}...")
    tree = HuffmanTree(len(terms), paths, signs)
    tree.validate()
    return tree

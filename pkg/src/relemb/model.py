"""Embedding model: parameters, query projection and the two objectives.

The likelihood objective fits a distribution over the vocabulary per query
through a Huffman-coded hierarchical softmax, weighting each term's
log-probability by its relevance-model mass. The posterior objective fits
a per-term logistic classifier (relevant vs. not) trained by contrasting
samples from the relevance distribution against samples from a smoothed
unigram noise distribution.

Both objectives are maximized by stochastic gradient ascent; the reported
loss is the negated objective, so smaller is better. Inside training steps
logits are clamped to +-30 before the nonlinearity as an overflow guard;
evaluation paths (``hs_prob``, ``softmax_prob``) are unclamped.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import CorpusIndex
from .errors import ProjectionError, TrainingDivergedError
from .huffman import HuffmanTree, build_huffman_tree
from .pipeline import TrainingSet, noise_distribution
from .relevance import RelevanceDistribution
from .sampling import AliasSampler

logger = logging.getLogger(__name__)

KIND_LIKELIHOOD = "likelihood"
KIND_POSTERIOR = "posterior"

_CLAMP = 30.0


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_sigmoid(x: np.ndarray) -> np.ndarray:
    """log(sigmoid(x)) without overflow for large negative x."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = -np.log1p(np.exp(-x[pos]))
    out[~pos] = x[~pos] - np.log1p(np.exp(x[~pos]))
    return out


@dataclass
class TrainConfig:
    """Optimizer settings shared by both objectives."""

    learning_rate: float = 0.1
    batch_size: int = 64
    epochs: int = 5
    eta_pos: int = 20
    eta_neg_mult: float = 10.0
    seed: int = 42
    workers: int = 1
    use_bias: bool = False
    lr_decay: bool = False
    target_samples: int = 0

    @property
    def eta_neg(self) -> int:
        """Negative samples per query, expressed as a multiple of eta_pos."""
        return int(round(self.eta_pos * self.eta_neg_mult))

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1 or self.epochs < 1 or self.workers < 1:
            raise ValueError("batch size, epochs and workers must be >= 1")
        if self.eta_pos < 1 or self.eta_neg_mult <= 0:
            raise ValueError("eta_pos must be >= 1 and eta_neg_mult positive")
        if self.target_samples < 0:
            raise ValueError("target_samples must be >= 0")

    def as_dict(self) -> dict[str, str]:
        return {
            "learning_rate": repr(self.learning_rate),
            "batch_size": str(self.batch_size),
            "epochs": str(self.epochs),
            "eta_pos": str(self.eta_pos),
            "eta_neg_mult": repr(self.eta_neg_mult),
            "seed": str(self.seed),
            "workers": str(self.workers),
            "use_bias": str(self.use_bias),
            "lr_decay": str(self.lr_decay),
            "target_samples": str(self.target_samples),
        }


@dataclass
class EmbeddingModel:
    """Trained parameters plus the coding tree for the likelihood kind."""

    kind: str
    dim: int
    terms: list[str]
    query_vecs: np.ndarray
    term_vecs: np.ndarray
    bias: np.ndarray | None = None
    tree: HuffmanTree | None = None
    node_vecs: np.ndarray | None = None
    seed: int | None = None
    config_echo: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._ids = {t: i for i, t in enumerate(self.terms)}

    @property
    def num_terms(self) -> int:
        return len(self.terms)

    def term_ids(self, tokens: Sequence[str]) -> list[int]:
        """Map tokens to term ids, dropping ones without an embedding."""
        return [self._ids[t] for t in tokens if t in self._ids]

    def validate(self) -> None:
        n, d = self.num_terms, self.dim
        if self.kind not in (KIND_LIKELIHOOD, KIND_POSTERIOR):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.query_vecs.shape != (n, d) or self.term_vecs.shape != (n, d):
            raise ValueError("embedding matrices disagree with (num_terms, dim)")
        if not np.isfinite(self.query_vecs).all() or not np.isfinite(self.term_vecs).all():
            raise ValueError("non-finite embedding entries")
        if self.bias is not None and self.bias.shape != (n,):
            raise ValueError("bias length disagrees with vocabulary size")
        if self.kind == KIND_LIKELIHOOD:
            if self.tree is None or self.node_vecs is None:
                raise ValueError("likelihood model needs a coding tree")
            self.tree.validate()
            if self.node_vecs.shape != (max(n - 1, 0), d):
                raise ValueError("node vector matrix disagrees with tree size")
            if not np.isfinite(self.node_vecs).all():
                raise ValueError("non-finite node vector entries")


def project_query(model: EmbeddingModel, term_ids: Sequence[int]) -> np.ndarray:
    """Mean of the query-side embedding rows over the token occurrences."""
    if len(term_ids) == 0:
        raise ProjectionError("query has no terms with embeddings")
    return model.query_vecs[np.asarray(term_ids, dtype=np.int64)].mean(axis=0)


def hs_prob(model: EmbeddingModel, term_id: int, qvec: np.ndarray) -> float:
    """Probability of one term under the hierarchical softmax."""
    tree = _require_tree(model)
    if not 0 <= term_id < model.num_terms:
        raise IndexError(f"term id {term_id} out of range")
    path = tree.paths[term_id]
    if len(path) == 0:
        return 1.0
    x = tree.signs[term_id] * (model.node_vecs[path] @ qvec)
    return float(np.prod(sigmoid(x)))


def hs_all_probs(model: EmbeddingModel, qvec: np.ndarray) -> np.ndarray:
    """Hierarchical-softmax probabilities for every vocabulary term.

    One pass over the flattened paths; sums to 1 by the tree identity.
    """
    tree = _require_tree(model)
    if model.num_terms == 1:
        return np.ones(1, dtype=np.float64)
    nodes, signs, offsets = tree.flattened()
    x = signs * (model.node_vecs @ qvec)[nodes]
    log_probs = np.add.reduceat(log_sigmoid(x), offsets[:-1])
    return np.exp(log_probs)


def softmax_prob(model: EmbeddingModel, term_id: int, qvec: np.ndarray) -> float:
    """Exact softmax probability of one term; O(N), for small N or tests."""
    return float(softmax_all_probs(model, qvec)[term_id])


def softmax_all_probs(model: EmbeddingModel, qvec: np.ndarray) -> np.ndarray:
    """Exact softmax over the output embeddings (bias included if present)."""
    logits = model.term_vecs @ qvec
    if model.bias is not None:
        logits = logits + model.bias
    logits = logits - logits.max()
    p = np.exp(logits)
    return p / p.sum()


# -- gradient computation ----------------------------------------------------


def _require_tree(model: EmbeddingModel) -> HuffmanTree:
    if model.kind != KIND_LIKELIHOOD or model.tree is None:
        raise ValueError("operation requires a likelihood-kind model with a tree")
    return model.tree


def _flatten_target(tree: HuffmanTree, items: Sequence[tuple[int, float]]):
    """Concatenate the tree paths of a weighted target term set."""
    nodes = [tree.paths[tid] for tid, _ in items]
    signs = [tree.signs[tid] for tid, _ in items]
    weights = [np.full(len(p), w) for p, (_, w) in zip(nodes, items)]
    if not nodes:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0, dtype=np.float64)
    return (
        np.concatenate(nodes),
        np.concatenate(signs).astype(np.float64),
        np.concatenate(weights),
    )


def _likelihood_grads(
    model: EmbeddingModel,
    query_tids: np.ndarray,
    flat_nodes: np.ndarray,
    flat_signs: np.ndarray,
    flat_weights: np.ndarray,
    qvec: np.ndarray,
):
    """Loss and ascent gradients of the weighted hierarchical log-likelihood."""
    if len(flat_nodes) == 0:
        return 0.0, []
    node_rows = model.node_vecs[flat_nodes]
    x = np.clip(flat_signs * (node_rows @ qvec), -_CLAMP, _CLAMP)
    loss = -float(np.dot(flat_weights, log_sigmoid(x)))
    coef = flat_weights * flat_signs * (1.0 - sigmoid(x))
    node_grads = coef[:, None] * qvec
    qgrad = coef @ node_rows
    updates = [
        (model.node_vecs, flat_nodes, node_grads),
        (model.query_vecs, query_tids, qgrad / len(query_tids)),
    ]
    return loss, updates


def _posterior_grads(
    model: EmbeddingModel,
    query_tids: np.ndarray,
    positives: np.ndarray,
    negatives: np.ndarray,
    qvec: np.ndarray,
):
    """Loss and ascent gradients of the sampled contrastive objective."""
    x_pos = np.clip(model.term_vecs[positives] @ qvec, -_CLAMP, _CLAMP)
    x_neg = np.clip(model.term_vecs[negatives] @ qvec, -_CLAMP, _CLAMP)
    # One fsum over every sample keeps the zero-initialization loss
    # identity (count * log 2) exact.
    loss = -math.fsum(np.concatenate([log_sigmoid(x_pos), log_sigmoid(-x_neg)]))
    coef = np.concatenate([1.0 - sigmoid(x_pos), -sigmoid(x_neg)])
    sample_ids = np.concatenate([positives, negatives])
    term_grads = coef[:, None] * qvec
    qgrad = coef @ model.term_vecs[sample_ids]
    updates = [
        (model.term_vecs, sample_ids, term_grads),
        (model.query_vecs, query_tids, qgrad / len(query_tids)),
    ]
    return loss, updates


def _apply(updates, lr: float) -> None:
    for array, ids, grads in updates:
        np.add.at(array, ids, lr * grads)


def likelihood_step(
    model: EmbeddingModel,
    query_tids: Sequence[int],
    target: RelevanceDistribution | dict[int, float],
    lr: float,
) -> float:
    """One ascent step on the weighted log-likelihood of one query.

    Returns the (negated) objective evaluated before the update.
    """
    tree = _require_tree(model)
    probs = target.probs if isinstance(target, RelevanceDistribution) else target
    if not probs:
        raise ValueError("target distribution has empty support")
    qtids = np.asarray(query_tids, dtype=np.int64)
    qvec = project_query(model, qtids)
    flat = _flatten_target(tree, sorted(probs.items()))
    loss, updates = _likelihood_grads(model, qtids, *flat, qvec)
    _apply(updates, lr)
    return loss


def posterior_step(
    model: EmbeddingModel,
    query_tids: Sequence[int],
    positives: Sequence[int],
    negatives: Sequence[int],
    lr: float,
) -> float:
    """One ascent step on the contrastive objective of one query.

    Positives are sampled from the query's relevance distribution and
    negatives from the noise distribution by the caller. Returns the loss
    evaluated before the update.
    """
    if model.kind != KIND_POSTERIOR:
        raise ValueError("operation requires a posterior-kind model")
    if len(positives) == 0 and len(negatives) == 0:
        raise ValueError("both sample sets are empty")
    qtids = np.asarray(query_tids, dtype=np.int64)
    qvec = project_query(model, qtids)
    loss, updates = _posterior_grads(
        model,
        qtids,
        np.asarray(positives, dtype=np.int64),
        np.asarray(negatives, dtype=np.int64),
        qvec,
    )
    _apply(updates, lr)
    return loss


# -- training loop -----------------------------------------------------------


def train(
    index: CorpusIndex,
    training: TrainingSet,
    kind: str,
    config: TrainConfig | None = None,
    dim: int = 300,
    noise_probs: np.ndarray | None = None,
    loss_history: list | None = None,
) -> EmbeddingModel:
    """Run seeded stochastic gradient ascent over the training set.

    Queries are shuffled each epoch; a batch of ``batch_size`` queries has
    its gradients computed against the parameters at batch start, averaged,
    then applied together, so the step scale does not depend on the batch
    size. With ``workers == 1`` the result is bit-reproducible for a fixed
    seed. With more workers, disjoint query chunks update the shared
    parameters concurrently without locking, trading reproducibility for
    throughput.
    """
    config = config or TrainConfig()
    config.validate()
    if len(training) == 0:
        raise ValueError("empty training set")
    if kind not in (KIND_LIKELIHOOD, KIND_POSTERIOR):
        raise ValueError(f"unknown objective kind {kind!r}")
    if dim < 1:
        raise ValueError("embedding dimensionality must be >= 1")

    n = index.num_terms
    rng = np.random.default_rng(config.seed)
    model = EmbeddingModel(
        kind=kind,
        dim=dim,
        terms=list(index.vocabulary.terms),
        query_vecs=rng.uniform(-0.5 / dim, 0.5 / dim, size=(n, dim)),
        term_vecs=np.zeros((n, dim), dtype=np.float64),
        bias=np.zeros(n, dtype=np.float64) if config.use_bias else None,
        seed=config.seed,
        config_echo={"kind": kind, "dim": str(dim), **config.as_dict()},
    )

    state = _TrainState(model=model, training=training, config=config)
    if kind == KIND_LIKELIHOOD:
        mass = training.relevance_mass()
        weights = np.where(mass > 0, mass, index.vocabulary.cf.astype(np.float64))
        model.tree = build_huffman_tree(weights)
        model.node_vecs = np.zeros((max(n - 1, 0), dim), dtype=np.float64)
        if config.target_samples == 0:
            state.flat_targets = [
                _flatten_target(model.tree, sorted(t.probs.items())) for t in training.targets
            ]
        else:
            state.target_samplers = _target_samplers(training)
    else:
        if noise_probs is None:
            noise_probs = noise_distribution(training)
        state.noise_sampler = AliasSampler(noise_probs)
        state.target_samplers = _target_samplers(training)

    m = len(training)
    batches_per_epoch = max(1, math.ceil(m / config.batch_size))
    state.total_batches = config.epochs * batches_per_epoch

    for epoch in range(config.epochs):
        order = rng.permutation(m)
        if config.workers == 1:
            losses = _run_chunk(state, order, rng)
        else:
            losses = _run_threaded(state, order, epoch)
        mean_loss = float(np.mean(losses))
        if not np.isfinite(mean_loss):
            raise TrainingDivergedError(
                f"non-finite loss at epoch {epoch} "
                f"(lr={config.learning_rate}, batch_size={config.batch_size})"
            )
        logger.info("epoch %d: mean loss %.6f over %d queries", epoch, mean_loss, m)
        if loss_history is not None:
            loss_history.append(mean_loss)
    return model


@dataclass
class _TrainState:
    model: EmbeddingModel
    training: TrainingSet
    config: TrainConfig
    flat_targets: list | None = None
    target_samplers: list | None = None
    noise_sampler: AliasSampler | None = None
    total_batches: int = 0
    batches_done: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)


def _target_samplers(training: TrainingSet) -> list[tuple[np.ndarray, AliasSampler]]:
    samplers = []
    for target in training.targets:
        items = sorted(target.probs.items())
        support = np.array([tid for tid, _ in items], dtype=np.int64)
        probs = np.array([p for _, p in items], dtype=np.float64)
        samplers.append((support, AliasSampler(probs)))
    return samplers


def _run_chunk(state: _TrainState, order: np.ndarray, rng: np.random.Generator) -> list[float]:
    config = state.config
    model = state.model
    training = state.training
    losses: list[float] = []
    for start in range(0, len(order), config.batch_size):
        batch = order[start : start + config.batch_size]
        parts = []
        for qi in batch:
            qtids = training.queries[qi]
            qvec = project_query(model, qtids)
            if model.kind == KIND_LIKELIHOOD:
                if config.target_samples == 0:
                    flat = state.flat_targets[qi]
                else:
                    support, sampler = state.target_samplers[qi]
                    drawn = support[sampler.draw(rng, config.target_samples)]
                    weight = 1.0 / config.target_samples
                    flat = _flatten_target(model.tree, [(int(t), weight) for t in drawn])
                loss, updates = _likelihood_grads(model, qtids, *flat, qvec)
            else:
                support, sampler = state.target_samplers[qi]
                positives = support[sampler.draw(rng, config.eta_pos)]
                negatives = state.noise_sampler.draw(rng, config.eta_neg)
                loss, updates = _posterior_grads(model, qtids, positives, negatives, qvec)
            losses.append(loss)
            parts.extend(updates)
        lr = _effective_lr(state) / len(batch)
        _apply(parts, lr)
        with state.lock:
            state.batches_done += 1
    return losses


def _effective_lr(state: _TrainState) -> float:
    config = state.config
    if not config.lr_decay:
        return config.learning_rate
    frac = 1.0 - state.batches_done / max(1, state.total_batches)
    return config.learning_rate * max(1e-4, frac)


def _run_threaded(state: _TrainState, order: np.ndarray, epoch: int) -> list[float]:
    """Benign-race parallel epoch: workers share parameters without locks."""
    config = state.config
    chunks = np.array_split(order, config.workers)
    results: list[list[float]] = [[] for _ in chunks]
    seeds = np.random.SeedSequence((config.seed, epoch)).spawn(len(chunks))

    def run(i: int) -> None:
        results[i] = _run_chunk(state, chunks[i], np.random.default_rng(seeds[i]))

    threads = [threading.Thread(target=run, args=(i,)) for i in range(len(chunks))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return [loss for part in results for loss in part]


# -- checkpoints -------------------------------------------------------------


def save_checkpoint(model: EmbeddingModel, prefix: str) -> list[str]:
    """Write the checkpoint file family and return the paths written.

    Layout: ``<prefix>.manifest`` (flat key = value), ``<prefix>.query.vec``
    and ``<prefix>.term.vec`` in word2vec text format, plus ``.bias``,
    ``.tree`` (per-term path strings) and ``.nodes.vec`` when present.
    Vector entries are printed with full round-trip precision.
    """
    paths = []
    manifest = {
        "kind": model.kind,
        "dim": str(model.dim),
        "num_terms": str(model.num_terms),
        "seed": "" if model.seed is None else str(model.seed),
        "bias": str(model.bias is not None),
        "tree": str(model.tree is not None),
    }
    for key, value in sorted(model.config_echo.items()):
        manifest.setdefault(f"config.{key}", value)
    path = f"{prefix}.manifest"
    with open(path, "w", encoding="utf-8") as f:
        for key in sorted(manifest):
            f.write(f"{key} = {manifest[key]}\n")
    paths.append(path)

    paths.append(_write_vectors(f"{prefix}.query.vec", model.terms, model.query_vecs))
    paths.append(_write_vectors(f"{prefix}.term.vec", model.terms, model.term_vecs))
    if model.bias is not None:
        path = f"{prefix}.bias"
        with open(path, "w", encoding="utf-8") as f:
            for term, value in zip(model.terms, model.bias):
                f.write(f"{term}\t{float(value)!r}\n")
        paths.append(path)
    if model.tree is not None:
        path = f"{prefix}.tree"
        with open(path, "w", encoding="utf-8") as f:
            for tid, term in enumerate(model.terms):
                steps = " ".join(
                    f"{node}{'+' if sign > 0 else '-'}"
                    for node, sign in zip(model.tree.paths[tid], model.tree.signs[tid])
                )
                f.write(f"{term}\t{steps}\n")
        paths.append(path)
        node_names = [str(i) for i in range(model.tree.num_internal)]
        paths.append(_write_vectors(f"{prefix}.nodes.vec", node_names, model.node_vecs))
    return paths


def _write_vectors(path: str, names: list[str], matrix: np.ndarray) -> str:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{matrix.shape[0]} {matrix.shape[1]}\n")
        for name, row in zip(names, matrix):
            f.write(name + " " + " ".join(repr(float(v)) for v in row) + "\n")
    return path

"""Estimator-style wrappers so the trainers compose with sklearn tooling.

Hyper-parameters live in ``__init__`` (visible to ``get_params`` /
``set_params``), learned state lands in trailing-underscore attributes
after ``fit``. ``transform`` maps queries to their embedding vectors, so a
fitted embedding can feed any downstream vector consumer.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .classification import build_centroid_table, classify
from .corpus import CorpusIndex
from .errors import ProjectionError
from .inference import TermScoreList, term_distribution
from .model import (
    KIND_LIKELIHOOD,
    KIND_POSTERIOR,
    EmbeddingModel,
    TrainConfig,
    project_query,
    train,
)
from .pipeline import TrainingSet, noise_distribution


def _as_token_lists(queries) -> list[list[str]]:
    if isinstance(queries, str):
        raise TypeError("expected a sequence of token lists, got a single string")
    out = []
    for i, q in enumerate(queries):
        if isinstance(q, str):
            raise TypeError(f"query {i} is a string; pass tokenized queries")
        out.append(list(q))
    return out


class _RelevanceEmbeddingBase(BaseEstimator, TransformerMixin):
    _kind = ""

    def _train_config(self) -> TrainConfig:
        raise NotImplementedError

    def _noise(self, training: TrainingSet) -> np.ndarray | None:
        return None

    def fit(self, training: TrainingSet, index: CorpusIndex):
        """Learn embeddings from (query, relevance distribution) pairs."""
        config = self._train_config()
        self.loss_curve_: list[float] = []
        self.model_: EmbeddingModel = train(
            index,
            training,
            kind=self._kind,
            config=config,
            dim=self.dim,
            noise_probs=self._noise(training),
            loss_history=self.loss_curve_,
        )
        return self

    def _check_fitted(self) -> EmbeddingModel:
        model = getattr(self, "model_", None)
        if model is None:
            raise NotFittedError(f"{type(self).__name__} is not fitted yet")
        return model

    def transform(self, queries: Sequence[Sequence[str]]) -> np.ndarray:
        """Project tokenized queries to their embedding vectors."""
        model = self._check_fitted()
        rows = []
        for i, tokens in enumerate(_as_token_lists(queries)):
            tids = model.term_ids(tokens)
            if not tids:
                raise ProjectionError(f"query {i} has no terms with embeddings: {tokens!r}")
            rows.append(project_query(model, tids))
        return np.stack(rows) if rows else np.zeros((0, model.dim))

    def term_scores(self, tokens: Sequence[str], m: int) -> TermScoreList:
        """Top-m term scores for one tokenized query."""
        model = self._check_fitted()
        return term_distribution(model, model.term_ids(tokens), m)


class RelevanceLikelihoodEmbedding(_RelevanceEmbeddingBase):
    """Fits a per-query distribution over the vocabulary (tree softmax)."""

    _kind = KIND_LIKELIHOOD

    def __init__(
        self,
        dim: int = 300,
        learning_rate: float = 0.1,
        batch_size: int = 64,
        epochs: int = 5,
        seed: int = 42,
        workers: int = 1,
        use_bias: bool = False,
        lr_decay: bool = False,
        target_samples: int = 0,
    ):
        self.dim = dim
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.workers = workers
        self.use_bias = use_bias
        self.lr_decay = lr_decay
        self.target_samples = target_samples

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            workers=self.workers,
            use_bias=self.use_bias,
            lr_decay=self.lr_decay,
            target_samples=self.target_samples,
        )


class RelevancePosteriorEmbedding(_RelevanceEmbeddingBase):
    """Fits a relevant-vs-not term classifier by contrastive sampling."""

    _kind = KIND_POSTERIOR

    def __init__(
        self,
        dim: int = 300,
        learning_rate: float = 0.1,
        batch_size: int = 64,
        epochs: int = 5,
        eta_pos: int = 20,
        eta_neg_mult: float = 10.0,
        noise_exponent: float = 0.75,
        seed: int = 42,
        workers: int = 1,
        use_bias: bool = False,
        lr_decay: bool = False,
    ):
        self.dim = dim
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.eta_pos = eta_pos
        self.eta_neg_mult = eta_neg_mult
        self.noise_exponent = noise_exponent
        self.seed = seed
        self.workers = workers
        self.use_bias = use_bias
        self.lr_decay = lr_decay

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            eta_pos=self.eta_pos,
            eta_neg_mult=self.eta_neg_mult,
            seed=self.seed,
            workers=self.workers,
            use_bias=self.use_bias,
            lr_decay=self.lr_decay,
        )

    def _noise(self, training: TrainingSet) -> np.ndarray | None:
        if training.term_counts is None:
            return None
        return noise_distribution(training, exponent=self.noise_exponent)


class CentroidQueryClassifier(BaseEstimator):
    """Multi-label classifier ranking category centroids by cosine."""

    def __init__(self, embedding: EmbeddingModel | None = None, top_t: int = 1):
        self.embedding = embedding
        self.top_t = top_t

    def fit(self, queries: Sequence[Sequence[str]], labels: Sequence[Sequence[str]]):
        """Build centroids from tokenized queries and their label lists."""
        if self.embedding is None:
            raise ValueError("pass a trained EmbeddingModel as `embedding`")
        if len(queries) != len(labels):
            raise ValueError("queries and labels disagree on length")
        model = self.embedding
        pairs = []
        skipped = 0
        for tokens, query_labels in zip(_as_token_lists(queries), labels):
            tids = model.term_ids(tokens)
            if not tids:
                skipped += 1
                continue
            pairs.append((project_query(model, tids), query_labels))
        self.centroids_ = build_centroid_table(pairs, skipped_queries=skipped)
        return self

    def predict(self, queries: Sequence[Sequence[str]]) -> list[list[str]]:
        centroids = getattr(self, "centroids_", None)
        if centroids is None:
            raise NotFittedError("CentroidQueryClassifier is not fitted yet")
        return [
            classify(self.embedding, centroids, tokens, self.top_t)
            for tokens in _as_token_lists(queries)
        ]

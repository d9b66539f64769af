"""Relevance-trained word embeddings and the IR pipeline around them.

The toolkit covers the full offline loop: index a corpus, clean a query
log, estimate per-query relevance distributions from feedback documents,
train query/term embeddings against them (two objectives), and evaluate
the result through query expansion and query classification.
"""

from .classification import (
    CentroidTable,
    LabeledQuery,
    classify,
    compute_centroids,
    cross_validate_classification,
    evaluate_classification,
)
from .corpus import CorpusIndex, Vocabulary, build_index, mle_prob
from .errors import (
    CheckpointError,
    ConfigError,
    DuplicateDocumentError,
    EmptyFeedbackError,
    OutOfVocabularyQueryError,
    ProjectionError,
    RelembError,
    TrainingDivergedError,
    UnknownDocumentError,
)
from .estimators import (
    CentroidQueryClassifier,
    RelevanceLikelihoodEmbedding,
    RelevancePosteriorEmbedding,
)
from .expansion import ExpansionConfig, cross_validate_expansion, expand_query
from .huffman import HuffmanTree, build_huffman_tree
from .inference import TermScoreList, load_model, similarity, term_distribution
from .metrics import (
    average_precision,
    ndcg_at_k,
    paired_ttest,
    precision_at_k,
    read_qrels,
)
from .model import (
    EmbeddingModel,
    TrainConfig,
    hs_prob,
    likelihood_step,
    posterior_step,
    project_query,
    save_checkpoint,
    softmax_prob,
    train,
)
from .pipeline import TrainingSet, clean_queries, generate_training_set, noise_distribution
from .relevance import RelevanceDistribution, estimate_relevance_model
from .retrieval import (
    QueryLanguageModel,
    RankedList,
    dirichlet_prob,
    kl_retrieve,
    ql_retrieve,
)
from .sampling import AliasSampler
from .tokenization import load_stopwords, tokenize

__version__ = "0.1.0"

__all__ = [
    "AliasSampler",
    "CentroidQueryClassifier",
    "CentroidTable",
    "CheckpointError",
    "ConfigError",
    "CorpusIndex",
    "DuplicateDocumentError",
    "EmbeddingModel",
    "EmptyFeedbackError",
    "ExpansionConfig",
    "HuffmanTree",
    "LabeledQuery",
    "OutOfVocabularyQueryError",
    "ProjectionError",
    "QueryLanguageModel",
    "RankedList",
    "RelembError",
    "RelevanceDistribution",
    "RelevanceLikelihoodEmbedding",
    "RelevancePosteriorEmbedding",
    "TermScoreList",
    "TrainConfig",
    "TrainingDivergedError",
    "TrainingSet",
    "UnknownDocumentError",
    "Vocabulary",
    "average_precision",
    "build_huffman_tree",
    "build_index",
    "classify",
    "clean_queries",
    "compute_centroids",
    "cross_validate_classification",
    "cross_validate_expansion",
    "dirichlet_prob",
    "estimate_relevance_model",
    "evaluate_classification",
    "expand_query",
    "generate_training_set",
    "hs_prob",
    "kl_retrieve",
    "likelihood_step",
    "load_model",
    "load_stopwords",
    "mle_prob",
    "ndcg_at_k",
    "noise_distribution",
    "paired_ttest",
    "posterior_step",
    "precision_at_k",
    "project_query",
    "ql_retrieve",
    "read_qrels",
    "save_checkpoint",
    "similarity",
    "softmax_prob",
    "term_distribution",
    "tokenize",
    "train",
]

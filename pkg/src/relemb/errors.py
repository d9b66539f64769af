"""Exception types shared across the package."""


class RelembError(Exception):
    """Base class for all package errors."""


class DuplicateDocumentError(RelembError):
    """A document id occurred more than once while building an index."""


class UnknownDocumentError(RelembError, KeyError):
    """Lookup of a document id that is not in the index."""


class OutOfVocabularyQueryError(RelembError):
    """A query has no terms left after vocabulary filtering.

    Distinct from an empty result list: the query could not be scored at
    all, so callers typically skip it rather than record zero matches.
    """


class EmptyFeedbackError(RelembError):
    """Relevance-model estimation was asked to run on no feedback documents."""


class ProjectionError(RelembError):
    """A query could not be mapped into the embedding space."""


class CheckpointError(RelembError):
    """A model checkpoint file is malformed or inconsistent."""


class TrainingDivergedError(RelembError):
    """A non-finite loss was observed during optimization."""


class ConfigError(RelembError):
    """A run configuration is missing keys, has bad values or bad paths."""

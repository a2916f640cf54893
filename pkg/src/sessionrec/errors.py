"""Exception hierarchy shared across the package."""


class SessionRecError(Exception):
    """Base class for every error raised by this package."""


class CorpusError(SessionRecError):
    """Malformed events, degenerate filters, or broken corpus files."""


class RetrievalError(SessionRecError):
    """Invalid neighbor-retrieval queries."""


class GraphError(SessionRecError):
    """Session graph construction failures."""


class ShapeError(SessionRecError):
    """Tensor operation called with incompatible shapes or indices."""


class NumericsError(SessionRecError):
    """A tensor operation produced NaN or Inf, or an update went non-finite."""


class CheckpointError(SessionRecError):
    """Unreadable or version-incompatible checkpoint blobs."""


class ConfigError(SessionRecError):
    """Invalid model or run configuration."""


class TrainingError(SessionRecError):
    """Training aborted (diverged loss, empty corpus, bad partition)."""

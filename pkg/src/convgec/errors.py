"""Exception hierarchy shared across the toolkit.

Every error carries a short machine-parseable ``category`` so the CLI can
emit one-line diagnostics with a stable vocabulary.
"""


class GecError(Exception):
    category = "error"


class ShapeError(GecError):
    """Array dimensions do not conform."""

    category = "shape"


class ConfigError(GecError):
    """Invalid configuration value."""

    category = "config"


class CorpusError(GecError):
    """Corpus ingestion failure (empty input, line-count mismatch)."""

    category = "corpus"


class ContractError(GecError):
    """Caller violated an interface contract."""

    category = "contract"


class DependencyError(GecError):
    """A required upstream artifact is missing."""

    category = "dependency"


class TrainingError(GecError):
    """Training aborted (non-finite gradients, failed dev decode)."""

    category = "training"


class ParseError(GecError):
    """Malformed input file."""

    category = "parse"


class EvaluationError(GecError):
    """A function evaluation produced unusable values."""

    category = "evaluation"

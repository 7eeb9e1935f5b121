"""Exception types shared across the pipeline.

Every error carries a short machine-readable ``category`` so the CLI and the
HTTP service can report failures uniformly.
"""

from __future__ import annotations


class RankForgeError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"


class EmptyTextError(RankForgeError):
    """Text produced zero tokens; encoders never emit silent zero vectors."""

    category = "empty-text"


class DimMismatchError(RankForgeError):
    """Operands disagree on dimensionality or vocabulary size."""

    category = "dim-mismatch"


class NoPreferenceError(RankForgeError):
    """All labels in a training sample are equal, so no loss is defined."""

    category = "no-preference"


class DivergedError(RankForgeError):
    """Training produced a non-finite loss or parameter."""

    category = "diverged"

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class DuplicateDocError(RankForgeError):
    category = "duplicate-doc"


class DuplicateQueryError(RankForgeError):
    category = "duplicate-query"


class EmptyCorpusError(RankForgeError):
    category = "empty-corpus"


class CorruptIndexError(RankForgeError):
    """Index directory failed an integrity check while loading."""

    category = "corrupt-index"


class CorruptModelError(RankForgeError):
    """Model directory failed an integrity check while loading."""

    category = "corrupt-model"


class ParseError(RankForgeError):
    """A data file violated its format. Reports the 1-based line number."""

    category = "parse"

    def __init__(self, message: str, line_no: int, path: str | None = None):
        where = f"{path}:{line_no}" if path else f"line {line_no}"
        super().__init__(f"{where}: {message}")
        self.line_no = line_no
        self.path = path


class InsufficientDocsError(RankForgeError):
    """Sampling could not produce a single training tuple."""

    category = "insufficient-docs"


class MissingTextError(RankForgeError):
    """A doc or query id referenced by a run has no known text."""

    category = "missing-text"

    def __init__(self, missing_id: str, kind: str = "doc"):
        super().__init__(f"no text available for {kind} id {missing_id!r}")
        self.missing_id = missing_id
        self.kind = kind


class ConfigConflictError(RankForgeError):
    """Two pipeline components were configured inconsistently."""

    category = "config-conflict"


class BadCutoffError(RankForgeError):
    """A metric cutoff k was not a positive integer."""

    category = "bad-cutoff"


class ConfigValidationError(RankForgeError):
    """A pipeline configuration failed validation.

    ``key_path`` points at the offending key with dotted notation.
    """

    category = "config"

    def __init__(self, message: str, key_path: str | None = None):
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)
        self.key_path = key_path

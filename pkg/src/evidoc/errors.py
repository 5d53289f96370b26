"""Exception hierarchy shared across the package."""

from __future__ import annotations


class EvidocError(Exception):
    """Base class for all package errors."""


# -- index ---------------------------------------------------------------

class EmbeddingIndexError(EvidocError):
    """Base for embedding index problems."""


class DimensionMismatchError(EmbeddingIndexError, ValueError):
    def __init__(self, query_dim: int, page_dim: int) -> None:
        super().__init__(f"dimension mismatch: query dim {query_dim} != page dim {page_dim}")
        self.query_dim = query_dim
        self.page_dim = page_dim


class IndexInvariantError(EmbeddingIndexError, ValueError):
    pass


class EmptyIndexError(EmbeddingIndexError):
    def __init__(self) -> None:
        super().__init__("empty index")


class IndexNotFoundError(EmbeddingIndexError, FileNotFoundError):
    def __init__(self, path: object) -> None:
        super().__init__(f"index not found: {path}")
        self.path = path


class IndexFormatError(EmbeddingIndexError):
    """Base for binary index decoding failures."""


class NotAnIndexFileError(IndexFormatError):
    pass


class IndexVersionError(IndexFormatError):
    pass


class CorruptHeaderError(IndexFormatError):
    pass


class TruncatedIndexError(IndexFormatError):
    pass


class CorruptPayloadError(IndexFormatError):
    pass


class ImportFormatError(EmbeddingIndexError, ValueError):
    """A JSON-lines embedding import failed validation at a specific line."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


# -- model gateway ---------------------------------------------------------

class ConfigurationError(EvidocError):
    pass


class BackendError(EvidocError):
    def __init__(self, message: str, attempts: list[str] | None = None) -> None:
        super().__init__(message)
        self.attempts = list(attempts or [])


class TransportError(BackendError):
    """Retryable failure talking to a backend."""


class ProtocolError(EvidocError):
    """Model output did not follow the expected protocol."""

    def __init__(self, message: str, raw: str) -> None:
        super().__init__(message)
        self.raw = raw


# -- pipeline --------------------------------------------------------------

class PipelineError(EvidocError):
    def __init__(self, stage: str, cause: BaseException, page: int | None = None) -> None:
        where = f"{stage}" if page is None else f"{stage} (page {page})"
        super().__init__(f"{where}: {cause}")
        self.stage = stage
        self.page = page
        self.cause = cause


class DecisionError(EvidocError):
    pass


class InvalidGoldError(EvidocError, ValueError):
    pass

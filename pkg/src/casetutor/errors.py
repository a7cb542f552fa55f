"""Exception hierarchy shared across the pipeline."""
from __future__ import annotations


class CaseTutorError(Exception):
    """Base class for all package errors."""


class BackendError(CaseTutorError):
    """A model backend failed to produce a usable response."""

    def __init__(self, message: str, *, kind: str = "", elapsed_ms: float | None = None):
        detail = message
        if kind:
            detail = f"[{kind}] {detail}"
        if elapsed_ms is not None:
            detail = f"{detail} (elapsed {elapsed_ms:.0f} ms)"
        super().__init__(detail)
        self.kind = kind
        self.elapsed_ms = elapsed_ms


class TransportError(BackendError):
    """Network-level failure talking to an HTTP backend."""


class BackendTimeout(BackendError):
    """Backend call exceeded its configured timeout."""


class ProtocolError(BackendError):
    """Backend responded, but the payload did not match the wire contract."""


class BatchItemError(BackendError):
    """One element of a batch failed; carries the failing index."""

    def __init__(self, message: str, index: int, **kw):
        super().__init__(f"batch element {index}: {message}", **kw)
        self.index = index


class ExtractionError(CaseTutorError):
    """No parsable structure found in a model completion."""

    def __init__(self, message: str, completion: str = ""):
        super().__init__(message)
        self.completion = completion


class SchemaError(CaseTutorError):
    """A parsed structure violated the expected schema."""


class IngestError(CaseTutorError):
    """A source data file could not be ingested."""


class IndexFormatError(CaseTutorError):
    """A persisted vector index file is unreadable."""


class RetrievalError(CaseTutorError):
    """All academic sources failed for a query."""


class ConfigError(CaseTutorError):
    """Run configuration is invalid; message lists every violation."""


class UndefinedStatisticError(CaseTutorError):
    """A statistic is mathematically undefined for the given data."""


class PoolShutdownError(CaseTutorError):
    """A dispatch was attempted against a stopped worker pool."""

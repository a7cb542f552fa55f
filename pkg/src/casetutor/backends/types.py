"""Shared contracts for generation, embedding, and reranking services."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

EMBED_DIM = 256
NORM_TOL = 1e-5


@dataclass(frozen=True)
class Prompt:
    """A system/user message pair sent to a generation service."""

    system: str
    user: str

    def __post_init__(self) -> None:
        if not self.user:
            raise ValueError("prompt user text must be non-empty")

    def serialized(self) -> str:
        """Canonical single-record form: system, record separator, user."""
        return self.system + "\x1e" + self.user


@dataclass(frozen=True)
class BackendConfig:
    """Deployment settings for one model service."""

    kind: str  # "http" | "mock"
    model_name: str = "mock"
    endpoint_url: str = ""
    max_batch: int = 64
    timeout_ms: int = 120_000
    max_concurrent: int = 4

    def __post_init__(self) -> None:
        if self.kind not in ("http", "mock"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.max_batch < 1 or self.max_concurrent < 1 or self.timeout_ms < 1:
            raise ValueError("max_batch, max_concurrent, and timeout_ms must be >= 1")
        if (self.kind == "http") != bool(self.endpoint_url):
            raise ValueError("endpoint_url must be present iff kind is 'http'")


@dataclass(frozen=True)
class EmbeddingVector:
    """A unit-norm (or all-zero) float32 vector."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        arr = self.as_array()
        norm = float(np.linalg.norm(arr))
        if norm != 0.0 and abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"embedding norm {norm} outside [1-{NORM_TOL}, 1+{NORM_TOL}]")

    @property
    def dim(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float32)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "EmbeddingVector":
        return cls(tuple(float(x) for x in np.asarray(arr, dtype=np.float32)))


@runtime_checkable
class GenerationBackend(Protocol):
    def generate(self, prompt: Prompt) -> str: ...

    def generate_batch(self, prompts: Sequence[Prompt]) -> list[str]: ...


@runtime_checkable
class EmbeddingBackend(Protocol):
    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


@runtime_checkable
class RerankBackend(Protocol):
    def rerank_scores(self, query: str, documents: Sequence[str]) -> list[float]: ...


@dataclass
class CallRecord:
    """One observed backend call, for instrumentation in tests and benchmarks."""

    op: str
    n_items: int
    started: float
    finished: float = 0.0
    detail: str = ""


@dataclass
class CallLog:
    """Append-only log of backend calls with an in-flight high-water mark."""

    records: list[CallRecord] = field(default_factory=list)
    in_flight: int = 0
    max_in_flight: int = 0

    def count(self, op: str) -> int:
        return sum(1 for r in self.records if r.op == op)

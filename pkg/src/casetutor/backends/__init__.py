from .types import (
    EMBED_DIM,
    BackendConfig,
    CallLog,
    CallRecord,
    EmbeddingBackend,
    EmbeddingVector,
    GenerationBackend,
    Prompt,
    RerankBackend,
)
from .mock import MockBackend, hashed_embedding, jaccard, tokenize
from .http import HttpBackend

__all__ = [
    "EMBED_DIM",
    "BackendConfig",
    "CallLog",
    "CallRecord",
    "EmbeddingBackend",
    "EmbeddingVector",
    "GenerationBackend",
    "HttpBackend",
    "MockBackend",
    "Prompt",
    "RerankBackend",
    "hashed_embedding",
    "jaccard",
    "tokenize",
]

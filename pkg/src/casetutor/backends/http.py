"""HTTP client backend for locally served models.

Generation speaks a chat-completions-style JSON protocol; embedding and
rerank use minimal JSON bodies compatible with common local servers. A
semaphore caps overlapping transport calls per backend instance.
"""
from __future__ import annotations

import threading
import time
from typing import Any, Sequence

import httpx

from ..errors import BackendTimeout, ProtocolError, TransportError
from .types import BackendConfig, EmbeddingVector, Prompt


class HttpBackend:
    """Generation, embedding, and rerank over JSON-over-HTTP.

    One instance per configured service endpoint; safe to share across
    threads. ``client`` is injectable for tests.
    """

    kind = "http"

    def __init__(self, config: BackendConfig, client: httpx.Client | None = None):
        if config.kind != "http":
            raise ValueError("HttpBackend requires an http BackendConfig")
        self.config = config
        self._client = client or httpx.Client(timeout=config.timeout_ms / 1000.0)
        self._permits = threading.Semaphore(config.max_concurrent)

    def _post(self, body: dict[str, Any]) -> dict[str, Any]:
        start = time.monotonic()
        with self._permits:
            try:
                resp = self._client.post(self.config.endpoint_url, json=body)
            except httpx.TimeoutException as exc:
                raise BackendTimeout(
                    str(exc), kind=self.kind, elapsed_ms=(time.monotonic() - start) * 1000
                ) from exc
            except httpx.HTTPError as exc:
                raise TransportError(
                    str(exc), kind=self.kind, elapsed_ms=(time.monotonic() - start) * 1000
                ) from exc
        elapsed = (time.monotonic() - start) * 1000
        if resp.status_code != 200:
            raise TransportError(
                f"HTTP {resp.status_code} from {self.config.endpoint_url}",
                kind=self.kind,
                elapsed_ms=elapsed,
            )
        try:
            return resp.json()
        except ValueError as exc:
            raise ProtocolError("response is not JSON", kind=self.kind, elapsed_ms=elapsed) from exc

    # -- generation -------------------------------------------------------

    def _chat(self, prompts: Sequence[Prompt]) -> list[str]:
        # One transport call per chunk; server is expected to return one
        # choice per submitted prompt, in order.
        body = {
            "model": self.config.model_name,
            "messages": [
                {"role": role, "content": content}
                for p in prompts
                for role, content in (("system", p.system), ("user", p.user))
            ],
            "temperature": 0.0,
            "max_tokens": 2048,
        }
        payload = self._post(body)
        try:
            choices = payload["choices"]
            texts = [c["message"]["content"] for c in choices]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed chat payload: {exc}", kind=self.kind) from exc
        if len(texts) != len(prompts):
            raise ProtocolError(
                f"expected {len(prompts)} choices, got {len(texts)}", kind=self.kind
            )
        return texts

    def generate(self, prompt: Prompt) -> str:
        return self._chat([prompt])[0]

    def generate_batch(self, prompts: Sequence[Prompt]) -> list[str]:
        if len(prompts) == 0:
            raise ValueError("generate_batch requires at least one prompt")
        out: list[str] = []
        step = self.config.max_batch
        for i in range(0, len(prompts), step):
            out.extend(self._chat(prompts[i : i + step]))
        return out

    # -- embedding ----------------------------------------------------------

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        out: list[EmbeddingVector] = []
        step = self.config.max_batch
        for i in range(0, len(texts), step):
            chunk = list(texts[i : i + step])
            payload = self._post({"model": self.config.model_name, "input": chunk})
            try:
                vectors = [d["embedding"] for d in payload["data"]]
            except (KeyError, TypeError) as exc:
                raise ProtocolError(f"malformed embedding payload: {exc}", kind=self.kind) from exc
            if len(vectors) != len(chunk):
                raise ProtocolError("embedding count mismatch", kind=self.kind)
            out.extend(EmbeddingVector(tuple(float(x) for x in v)) for v in vectors)
        return out

    # -- rerank -----------------------------------------------------------------

    def rerank_scores(self, query: str, documents: Sequence[str]) -> list[float]:
        if len(documents) == 0:
            raise ValueError("rerank_scores requires at least one document")
        payload = self._post(
            {"model": self.config.model_name, "query": query, "documents": list(documents)}
        )
        try:
            scores = [float(s) for s in payload["scores"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed rerank payload: {exc}", kind=self.kind) from exc
        if len(scores) != len(documents):
            raise ProtocolError(
                f"expected {len(documents)} scores, got {len(scores)}", kind=self.kind
            )
        return scores

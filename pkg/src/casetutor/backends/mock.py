"""Fully deterministic in-process backend used by tests and ``--mock`` runs.

Every operation is a pure function of its arguments:

* embeddings hash distinct tokens into a fixed 256-bucket vector (FNV-1a-64)
  and L2-normalize;
* rerank scores are Jaccard overlap of distinct token sets;
* generation recognizes the stage by a sentinel phrase in the prompt and
  emits a structurally valid completion for that stage.

Optional artificial latency supports the throughput benchmark; it does not
affect output bytes.
"""
from __future__ import annotations

import json
import re
import threading
import time
from importlib import resources
from typing import Sequence

import numpy as np

from ..errors import BatchItemError
from .types import (
    EMBED_DIM,
    CallLog,
    CallRecord,
    EmbeddingVector,
    Prompt,
)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_TOKEN_RE = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop empties."""
    return [t for t in _TOKEN_RE.split(text.lower()) if t]


def fnv1a64(token: str) -> int:
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def hashed_embedding(text: str, dim: int = EMBED_DIM) -> EmbeddingVector:
    """Deterministic bag-of-distinct-tokens embedding, L2-normalized."""
    vec = np.zeros(dim, dtype=np.float64)
    for token in set(tokenize(text)):
        vec[fnv1a64(token) % dim] += 1.0
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return EmbeddingVector.from_array(vec.astype(np.float32))


def jaccard(query: str, document: str) -> float:
    q, d = set(tokenize(query)), set(tokenize(document))
    if not q and not d:
        return 0.0
    union = q | d
    return len(q & d) / len(union) if union else 0.0


def load_default_gazetteer() -> list[str]:
    text = resources.files("casetutor.data").joinpath("gazetteer.txt").read_text("utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def gazetteer_scan(text: str, terms: Sequence[str]) -> list[str]:
    """Terms present in the text (word-boundary match), in first-occurrence order.

    A matched term that is a substring of another matched term is dropped, so
    "fracture" never co-occurs with "rib fracture".
    """
    found: list[tuple[int, str]] = []
    for term in terms:
        m = re.search(r"\b" + re.escape(term) + r"\b", text, re.IGNORECASE)
        if m:
            found.append((m.start(), term))
    kept = [
        (pos, term)
        for pos, term in found
        if not any(term != other and term in other for _, other in found)
    ]
    kept.sort(key=lambda pt: pt[0])
    seen: set[str] = set()
    ordered = []
    for _, term in kept:
        if term not in seen:
            seen.add(term)
            ordered.append(term)
    return ordered


_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")
_PAGE_HEADER_RE = re.compile(r"^\[Page (\d+)\]$", re.MULTILINE)


def first_sentences(text: str, n: int = 2) -> str:
    parts = [p.strip() for p in _SENTENCE_RE.split(text.strip()) if p.strip()]
    return " ".join(parts[:n])


def _extract_dash_list(user: str, header: str) -> list[str]:
    """Keywords from a '- item' block following the given header line."""
    lines = user.splitlines()
    out: list[str] = []
    active = False
    for line in lines:
        if line.strip() == header:
            active = True
            continue
        if active:
            if line.startswith("- "):
                out.append(line[2:].strip())
            elif line.strip() == "" and out:
                break
            elif not line.startswith("- ") and out:
                break
    return out


class MockBackend:
    """Deterministic generation + embedding + rerank backend.

    Thread-safe; suitable for sharing across workers. ``latency_ms`` is the
    fixed per-call cost, ``per_item_ms`` the marginal cost per batch element.
    """

    kind = "mock"

    def __init__(
        self,
        gazetteer: Sequence[str] | None = None,
        dim: int = EMBED_DIM,
        latency_ms: float = 0.0,
        per_item_ms: float = 0.0,
        judge_score: int = 4,
    ):
        self.gazetteer = list(gazetteer) if gazetteer is not None else load_default_gazetteer()
        self.dim = dim
        self.latency_ms = latency_ms
        self.per_item_ms = per_item_ms
        self.judge_score = judge_score
        self.log = CallLog()
        self._lock = threading.Lock()

    # -- instrumentation ------------------------------------------------

    def _record(self, op: str, n: int, detail: str = "") -> CallRecord:
        rec = CallRecord(op=op, n_items=n, started=time.monotonic(), detail=detail)
        with self._lock:
            self.log.records.append(rec)
            self.log.in_flight += 1
            self.log.max_in_flight = max(self.log.max_in_flight, self.log.in_flight)
        return rec

    def _finish(self, rec: CallRecord) -> None:
        rec.finished = time.monotonic()
        with self._lock:
            self.log.in_flight -= 1

    def _simulate(self, n_items: int) -> None:
        cost = (self.latency_ms + n_items * self.per_item_ms) / 1000.0
        if cost > 0:
            time.sleep(cost)

    # -- generation ------------------------------------------------------

    def generate(self, prompt: Prompt) -> str:
        rec = self._record("generate", 1)
        try:
            self._simulate(1)
            return self._complete(prompt)
        finally:
            self._finish(rec)

    def generate_batch(self, prompts: Sequence[Prompt]) -> list[str]:
        if len(prompts) == 0:
            raise ValueError("generate_batch requires at least one prompt")
        rec = self._record("generate_batch", len(prompts))
        try:
            self._simulate(len(prompts))
            out = []
            for i, p in enumerate(prompts):
                try:
                    out.append(self._complete(p))
                except Exception as exc:  # noqa: BLE001 - surfaces the failing index
                    raise BatchItemError(str(exc), index=i, kind=self.kind) from exc
            return out
        finally:
            self._finish(rec)

    def _complete(self, prompt: Prompt) -> str:
        if "extract all specific disease names" in prompt.system:
            return self._keyword_completion(prompt.user)
        if "Please summarize the following textbook pages" in prompt.user:
            return self._summary_completion(prompt.user)
        if "creating multiple-choice questions" in prompt.system:
            return self._mcq_completion(prompt.user)
        if "concise, educational feedback" in prompt.system:
            return self._feedback_completion(prompt.user)
        if "a single integer from 1 to 5" in prompt.user:
            return f"Score: {self.judge_score}"
        return "OK"

    def _keyword_completion(self, user: str) -> str:
        keywords = gazetteer_scan(user, self.gazetteer)
        return json.dumps({"keywords": keywords})

    def _summary_completion(self, user: str) -> str:
        m = re.search(r"focusing on the keyword '(.*?)'", user)
        keyword = m.group(1) if m else ""
        marker = "Textbook Pages Content:\n"
        idx = user.find(marker)
        block = user[idx + len(marker):] if idx >= 0 else user
        pages = [p.strip() for p in re.split(r"\n\n(?=\[Page \d+\])", block) if p.strip()]
        chosen = pages[0] if pages else block
        for page in pages:
            if keyword and keyword.lower() in page.lower():
                chosen = page
                break
        body = _PAGE_HEADER_RE.sub("", chosen).strip()
        return first_sentences(body, 2)

    def _mcq_completion(self, user: str) -> str:
        keywords = _extract_dash_list(user, "### Primary Diagnostic Keywords to Focus On:")
        parts = ["### Multiple Choice Questions"]
        for kw in keywords:
            parts.append(
                f"""
#### {kw}

Q1. Which imaging finding is most characteristic of {kw} in the provided context?
A. The key finding described for {kw}
B. A normal study
C. An unrelated incidental finding
D. A technically inadequate exam
Answer: A
Explanation: The context identifies the key finding described for {kw}.

Q2. Which diagnostic consideration applies to {kw} according to the context?
A. No imaging is ever indicated
B. The diagnostic consideration stated for {kw}
C. The finding excludes all other diagnoses
D. Imaging findings are always absent
Answer: B
Explanation: The context states this diagnostic consideration for {kw}."""
            )
        return "\n".join(parts)

    def _feedback_completion(self, user: str) -> str:
        keywords = _extract_dash_list(user, "### Primary Diagnostic Keywords")
        parts = []
        for kw in keywords:
            parts.append(
                f"**{kw}**\n\n"
                f"- Imaging pearls: review the characteristic findings of {kw} "
                f"described in the supporting material.\n"
                f"- Clinical teaching point: correlate {kw} with the report findings."
            )
        return "\n\n".join(parts)

    # -- embedding ---------------------------------------------------------

    def embed_batch(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        rec = self._record("embed_batch", len(texts))
        try:
            self._simulate(len(texts))
            return [hashed_embedding(t, self.dim) for t in texts]
        finally:
            self._finish(rec)

    # -- rerank --------------------------------------------------------------

    def rerank_scores(self, query: str, documents: Sequence[str]) -> list[float]:
        if len(documents) == 0:
            raise ValueError("rerank_scores requires at least one document")
        rec = self._record("rerank", len(documents))
        try:
            self._simulate(len(documents))
            return [jaccard(query, d) for d in documents]
        finally:
            self._finish(rec)

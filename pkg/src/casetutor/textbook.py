"""Local retrieval arm: page ingestion, vector index, cosine search."""
from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .backends import EmbeddingBackend, EmbeddingVector
from .errors import IndexFormatError, IngestError

MAGIC = b"MTIX"
VERSION = 1
DEFAULT_K_LOCAL = 2


@dataclass(frozen=True)
class TextbookPage:
    page_id: int
    text: str
    source: str = ""

    def __post_init__(self) -> None:
        if self.page_id < 0:
            raise ValueError("page_id must be non-negative")
        if not self.text:
            raise ValueError("page text must be non-empty")


@dataclass(frozen=True)
class TextbookHit:
    page_id: int
    score: float
    text: str


class VectorIndex:
    """Immutable exhaustive-scan cosine index over textbook pages.

    Entries are kept sorted by page_id; vectors are stored float32, scores
    computed in float64 for reproducible ordering.
    """

    def __init__(
        self,
        dim: int,
        page_ids: Sequence[int],
        matrix: np.ndarray,
        corpus_ref: str = "",
        texts: dict[int, str] | None = None,
    ):
        if matrix.shape != (len(page_ids), dim):
            raise ValueError("matrix shape does not match page_ids/dim")
        if len(set(page_ids)) != len(page_ids):
            raise ValueError("page_ids must be unique")
        order = np.argsort(np.asarray(page_ids, dtype=np.uint64), kind="stable")
        self.dim = dim
        self.page_ids = tuple(int(page_ids[i]) for i in order)
        self.matrix = np.ascontiguousarray(matrix[order], dtype=np.float32)
        self.corpus_ref = corpus_ref
        self.texts = dict(texts or {})

    def __len__(self) -> int:
        return len(self.page_ids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VectorIndex):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.page_ids == other.page_ids
            and self.corpus_ref == other.corpus_ref
            and np.array_equal(self.matrix, other.matrix)
        )


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """Cosine similarity in double precision; exactly 0 for a zero vector."""
    if u.dim != v.dim:
        raise ValueError(f"dimension mismatch: {u.dim} vs {v.dim}")
    a = u.as_array().astype(np.float64)
    b = v.as_array().astype(np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def ingest_pages(path: str | Path) -> list[TextbookPage]:
    """Read pages from JSONL: {"page_id": int, "text": str, "source": str}."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"pages file not found: {path}")
    pages: list[TextbookPage] = []
    seen: set[int] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                page = TextbookPage(
                    page_id=int(obj["page_id"]),
                    text=str(obj["text"]),
                    source=str(obj.get("source", "")),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise IngestError(f"{path} line {lineno}: {exc}") from exc
            if page.page_id in seen:
                raise IngestError(f"{path} line {lineno}: duplicate page_id {page.page_id}")
            seen.add(page.page_id)
            pages.append(page)
    if not pages:
        raise IngestError(f"{path}: no pages found")
    return pages


def build_index(
    pages: Sequence[TextbookPage],
    embedder: EmbeddingBackend,
    corpus_ref: str = "",
) -> VectorIndex:
    if not pages:
        raise ValueError("cannot build an index over zero pages")
    vectors = embedder.embed_batch([p.text for p in pages])
    dim = vectors[0].dim
    matrix = np.stack([v.as_array() for v in vectors])
    return VectorIndex(
        dim=dim,
        page_ids=[p.page_id for p in pages],
        matrix=matrix,
        corpus_ref=corpus_ref,
        texts={p.page_id: p.text for p in pages},
    )


def search(
    index: VectorIndex,
    query: str,
    k: int,
    embedder: EmbeddingBackend,
) -> list[TextbookHit]:
    """Top-k pages by cosine, ties broken by ascending page_id."""
    qvec = embedder.embed_batch([query])[0]
    return search_by_vector(index, qvec, k)


def search_by_vector(index: VectorIndex, qvec: EmbeddingVector, k: int) -> list[TextbookHit]:
    """Search with an already-embedded query vector."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if qvec.dim != index.dim:
        raise ValueError(f"query dim {qvec.dim} != index dim {index.dim}")
    q = qvec.as_array().astype(np.float64)
    qn = np.linalg.norm(q)
    if qn == 0.0:
        scores = np.zeros(len(index))
    else:
        mat = index.matrix.astype(np.float64)
        norms = np.linalg.norm(mat, axis=1)
        norms[norms == 0.0] = 1.0  # zero page vectors score 0 regardless
        scores = mat @ (q / qn) / norms
    order = sorted(range(len(index)), key=lambda i: (-scores[i], index.page_ids[i]))
    top = order[: min(k, len(index))]
    return [
        TextbookHit(
            page_id=index.page_ids[i],
            score=float(scores[i]),
            text=index.texts.get(index.page_ids[i], ""),
        )
        for i in top
    ]


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Write the binary index atomically.

    Layout (little-endian): magic "MTIX", version u32, dim u32, count u64,
    corpus_ref (u32 length + UTF-8 bytes), then count records of
    (page_id u64, dim x float32). Page texts live in the pages JSONL, not here.
    """
    path = Path(path)
    ref = index.corpus_ref.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IIQ", VERSION, index.dim, len(index)))
            fh.write(struct.pack("<I", len(ref)))
            fh.write(ref)
            for i, pid in enumerate(index.page_ids):
                fh.write(struct.pack("<Q", pid))
                fh.write(index.matrix[i].tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_index(path: str | Path, pages: Sequence[TextbookPage] | None = None) -> VectorIndex:
    """Read an index; optionally rehydrate page texts from the source pages."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 20 or data[:4] != MAGIC:
        raise IndexFormatError(f"{path}: bad magic")
    version, dim, count = struct.unpack_from("<IIQ", data, 4)
    if version != VERSION:
        raise IndexFormatError(f"{path}: unsupported version {version}")
    offset = 20
    try:
        (ref_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        corpus_ref = data[offset : offset + ref_len].decode("utf-8")
        if len(data[offset : offset + ref_len]) != ref_len:
            raise struct.error("short corpus_ref")
        offset += ref_len
        record = 8 + 4 * dim
        if len(data) - offset != count * record:
            raise struct.error("record area size mismatch")
        page_ids = []
        matrix = np.empty((count, dim), dtype=np.float32)
        for i in range(count):
            (pid,) = struct.unpack_from("<Q", data, offset)
            offset += 8
            matrix[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
            offset += 4 * dim
            page_ids.append(pid)
    except struct.error as exc:
        raise IndexFormatError(f"{path}: truncated index file ({exc})") from exc
    texts = {p.page_id: p.text for p in pages} if pages else {}
    return VectorIndex(dim=dim, page_ids=page_ids, matrix=matrix, corpus_ref=corpus_ref, texts=texts)

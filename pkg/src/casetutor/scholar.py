"""Live academic retrieval: PubMed + Semantic Scholar, paced and cached."""
from __future__ import annotations

import asyncio
import hashlib
import json
import os
import re
import tempfile
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import httpx

from .errors import ProtocolError, RetrievalError, TransportError

PUBMED_ESEARCH = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/esearch.fcgi"
PUBMED_EFETCH = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils/efetch.fcgi"
PUBMED_ARTICLE_URL = "https://pubmed.ncbi.nlm.nih.gov/{pmid}/"
S2_SEARCH = "https://api.semanticscholar.org/graph/v1/paper/search"
S2_FIELDS = "title,abstract,url,year"

DEFAULT_LIMIT_PER_SOURCE = 10
MAX_LIMIT = 50
RETRY_ATTEMPTS = 3
RETRY_BASE_S = 0.5


@dataclass(frozen=True)
class EvidenceItem:
    """One normalized academic search result."""

    title: str
    abstract: str
    url: str
    source: str  # "pubmed" | "semantic_scholar"
    external_id: str
    year: int | None = None

    def __post_init__(self) -> None:
        if not self.title or not self.url:
            raise ValueError("title and url must be non-empty")
        if self.source not in ("pubmed", "semantic_scholar"):
            raise ValueError(f"unknown source {self.source!r}")

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "abstract": self.abstract,
            "url": self.url,
            "source": self.source,
            "external_id": self.external_id,
            "year": self.year,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EvidenceItem":
        return cls(
            title=obj["title"],
            abstract=obj.get("abstract", ""),
            url=obj["url"],
            source=obj["source"],
            external_id=obj.get("external_id", ""),
            year=obj.get("year"),
        )


def normalized_title(title: str) -> str:
    return re.sub(r"\s+", " ", title.strip().lower())


class RateLimiter:
    """Caps overlapping requests and paces consecutive request starts.

    One instance per source. Instrumented: ``max_in_flight`` and the list of
    request start times are observable by tests.
    """

    def __init__(self, max_concurrent: int, min_interval_ms: int = 0):
        if max_concurrent < 1 or min_interval_ms < 0:
            raise ValueError("max_concurrent >= 1 and min_interval_ms >= 0 required")
        self.max_concurrent = max_concurrent
        self.min_interval_ms = min_interval_ms
        self._sem = asyncio.Semaphore(max_concurrent)
        self._pace_lock = asyncio.Lock()
        self._last_start = float("-inf")
        self.in_flight = 0
        self.max_in_flight = 0
        self.start_times: list[float] = []

    async def __aenter__(self) -> "RateLimiter":
        await self._sem.acquire()
        async with self._pace_lock:
            now = time.monotonic()
            wait = self._last_start + self.min_interval_ms / 1000.0 - now
            if wait > 0:
                await asyncio.sleep(wait)
                now = time.monotonic()
            self._last_start = now
            self.start_times.append(now)
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
        return self

    async def __aexit__(self, *exc) -> None:
        self.in_flight -= 1
        self._sem.release()


class QueryCache:
    """On-disk JSON cache keyed by (source, query, limit); writes are atomic."""

    def __init__(self, root_dir: str | Path):
        self.root = Path(root_dir)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, source: str, query: str, limit: int) -> Path:
        key = hashlib.sha256(f"{source}\x00{query}\x00{limit}".encode("utf-8")).hexdigest()
        return self.root / f"{key}.json"

    def get(self, source: str, query: str, limit: int) -> list[EvidenceItem] | None:
        path = self._path(source, query, limit)
        if not path.exists():
            return None
        obj = json.loads(path.read_text("utf-8"))
        return [EvidenceItem.from_dict(it) for it in obj["items"]]

    def put(self, source: str, query: str, limit: int, items: Sequence[EvidenceItem]) -> None:
        path = self._path(source, query, limit)
        payload = {
            "query": query,
            "source": source,
            "fetched_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "items": [it.to_dict() for it in items],
        }
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, ensure_ascii=False)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def purge(self) -> int:
        n = 0
        for f in self.root.glob("*.json"):
            f.unlink()
            n += 1
        return n


async def _get_with_retry(
    client: httpx.AsyncClient,
    limiter: RateLimiter,
    url: str,
    params: dict,
    retry_base_s: float = RETRY_BASE_S,
) -> httpx.Response:
    last_error: Exception | None = None
    for attempt in range(RETRY_ATTEMPTS):
        if attempt > 0:
            await asyncio.sleep(retry_base_s * (2 ** (attempt - 1)))
        try:
            async with limiter:
                resp = await client.get(url, params=params)
        except httpx.HTTPError as exc:
            last_error = TransportError(str(exc), kind="http")
            continue
        if resp.status_code == 429 or resp.status_code >= 500:
            last_error = TransportError(f"HTTP {resp.status_code} from {url}", kind="http")
            continue
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code} from {url}", kind="http")
        return resp
    assert last_error is not None
    raise last_error


class PubMedClient:
    """esearch + efetch, normalized to EvidenceItem."""

    source = "pubmed"

    def __init__(
        self,
        client: httpx.AsyncClient,
        limiter: RateLimiter,
        api_key: str | None = None,
        retry_base_s: float = RETRY_BASE_S,
    ):
        self.client = client
        self.limiter = limiter
        self.api_key = api_key or os.environ.get("PUBMED_API_KEY")
        self.retry_base_s = retry_base_s

    async def search(self, query: str, limit: int) -> list[EvidenceItem]:
        if not query:
            raise ValueError("query must be non-empty")
        if not 1 <= limit <= MAX_LIMIT:
            raise ValueError(f"limit must be in 1..{MAX_LIMIT}")
        params = {"db": "pubmed", "term": query, "retmax": str(limit), "retmode": "json"}
        if self.api_key:
            params["api_key"] = self.api_key
        resp = await _get_with_retry(
            self.client, self.limiter, PUBMED_ESEARCH, params, self.retry_base_s
        )
        try:
            ids = resp.json()["esearchresult"]["idlist"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed esearch payload: {exc}", kind="pubmed") from exc
        if not ids:
            return []
        fetch_params = {"db": "pubmed", "id": ",".join(ids), "retmode": "xml"}
        if self.api_key:
            fetch_params["api_key"] = self.api_key
        resp = await _get_with_retry(
            self.client, self.limiter, PUBMED_EFETCH, fetch_params, self.retry_base_s
        )
        return self._parse_efetch(resp.text, ids)

    def _parse_efetch(self, xml_text: str, ids: Sequence[str]) -> list[EvidenceItem]:
        try:
            root = ET.fromstring(xml_text)
        except ET.ParseError as exc:
            raise ProtocolError(f"malformed efetch XML: {exc}", kind="pubmed") from exc
        items: list[EvidenceItem] = []
        seen: set[str] = set()
        for article in root.iter("PubmedArticle"):
            pmid_el = article.find(".//PMID")
            title_el = article.find(".//ArticleTitle")
            pmid = (pmid_el.text or "").strip() if pmid_el is not None else ""
            title = "".join(title_el.itertext()).strip() if title_el is not None else ""
            if not pmid or not title or pmid in seen:
                continue
            seen.add(pmid)
            abstract = " ".join(
                " ".join(el.itertext()).strip()
                for el in article.findall(".//Abstract/AbstractText")
            ).strip()
            year_el = article.find(".//PubDate/Year")
            year = None
            if year_el is not None and (year_el.text or "").strip().isdigit():
                year = int(year_el.text.strip())
            items.append(
                EvidenceItem(
                    title=title,
                    abstract=abstract,
                    url=PUBMED_ARTICLE_URL.format(pmid=pmid),
                    source=self.source,
                    external_id=pmid,
                    year=year,
                )
            )
        return items


class SemanticScholarClient:
    """Graph paper search, normalized to EvidenceItem."""

    source = "semantic_scholar"

    def __init__(
        self,
        client: httpx.AsyncClient,
        limiter: RateLimiter,
        api_key: str | None = None,
        retry_base_s: float = RETRY_BASE_S,
    ):
        self.client = client
        self.limiter = limiter
        self.api_key = api_key or os.environ.get("S2_API_KEY")
        self.retry_base_s = retry_base_s

    async def search(self, query: str, limit: int) -> list[EvidenceItem]:
        if not query:
            raise ValueError("query must be non-empty")
        if not 1 <= limit <= MAX_LIMIT:
            raise ValueError(f"limit must be in 1..{MAX_LIMIT}")
        params = {"query": query, "limit": str(limit), "fields": S2_FIELDS}
        resp = await _get_with_retry(
            self.client, self.limiter, S2_SEARCH, params, self.retry_base_s
        )
        try:
            data = resp.json()["data"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(
                f"malformed paper-search payload: {exc}", kind="semantic_scholar"
            ) from exc
        items: list[EvidenceItem] = []
        seen: set[str] = set()
        for entry in data[:limit]:
            title = (entry.get("title") or "").strip()
            paper_id = (entry.get("paperId") or "").strip()
            if not title or (paper_id and paper_id in seen):
                continue
            if paper_id:
                seen.add(paper_id)
            year = entry.get("year")
            items.append(
                EvidenceItem(
                    title=title,
                    abstract=(entry.get("abstract") or "").strip(),
                    url=(entry.get("url") or "").strip()
                    or f"https://www.semanticscholar.org/paper/{paper_id}",
                    source=self.source,
                    external_id=paper_id,
                    year=int(year) if isinstance(year, int) else None,
                )
            )
        return items


@dataclass
class FetchResult:
    """Union of both sources' results plus any per-source failures."""

    keyword: str
    items: list[EvidenceItem] = field(default_factory=list)
    source_failures: dict[str, str] = field(default_factory=dict)


async def hybrid_fetch(
    keyword: str,
    pubmed: PubMedClient,
    s2: SemanticScholarClient,
    cache: QueryCache | None = None,
    limit_per_source: int = DEFAULT_LIMIT_PER_SOURCE,
) -> FetchResult:
    """Query both sources concurrently, deduplicate by normalized title.

    Cache hits bypass the network per source. One failing source degrades
    the result; both failing raises RetrievalError.
    """
    if not keyword:
        raise ValueError("keyword must be non-empty")

    async def one_source(client) -> list[EvidenceItem]:
        if cache is not None:
            hit = cache.get(client.source, keyword, limit_per_source)
            if hit is not None:
                return hit
        items = await client.search(keyword, limit_per_source)
        if cache is not None:
            cache.put(client.source, keyword, limit_per_source, items)
        return items

    results = await asyncio.gather(
        one_source(pubmed), one_source(s2), return_exceptions=True
    )
    failures: dict[str, str] = {}
    merged: list[EvidenceItem] = []
    seen_titles: set[str] = set()
    for client, result in zip((pubmed, s2), results):
        if isinstance(result, BaseException):
            failures[client.source] = str(result)
            continue
        for item in result:
            key = normalized_title(item.title)
            if key in seen_titles:
                continue
            seen_titles.add(key)
            merged.append(item)
    if len(failures) == 2:
        raise RetrievalError(f"all sources failed for {keyword!r}: {failures}")
    return FetchResult(keyword=keyword, items=merged, source_failures=failures)

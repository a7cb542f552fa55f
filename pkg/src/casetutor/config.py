"""Run configuration: one JSON document, env overrides for URLs/keys only."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .backends import BackendConfig
from .errors import ConfigError

SERVICES = ("generation", "embedding", "rerank")


@dataclass
class RetrievalConfig:
    k_local: int = 2
    limit_per_source: int = 10
    keep_n: int = 2
    cache_dir: str = ".casetutor-cache"


@dataclass
class EngineConfig:
    max_cases_in_flight: int = 16
    char_budget: int = 48_000
    sequential_mode: bool = False
    include_timings: bool = False


@dataclass
class PathsConfig:
    index: str = ""
    pages: str = ""
    gazetteer: str = ""
    output_dir: str = "out"


@dataclass
class RunConfig:
    backends: dict[str, BackendConfig] = field(
        default_factory=lambda: {s: BackendConfig(kind="mock") for s in SERVICES}
    )
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def validate(self) -> None:
        """Check every referenced path; report all violations at once."""
        problems: list[str] = []
        for service in SERVICES:
            if service not in self.backends:
                problems.append(f"backends: missing service {service!r}")
        for name in ("index", "pages", "gazetteer"):
            value = getattr(self.paths, name)
            if value and not Path(value).exists():
                problems.append(f"paths.{name}: {value} does not exist")
        if self.retrieval.k_local < 1:
            problems.append("retrieval.k_local must be >= 1")
        if self.retrieval.keep_n < 1:
            problems.append("retrieval.keep_n must be >= 1")
        if not 1 <= self.retrieval.limit_per_source <= 50:
            problems.append("retrieval.limit_per_source must be in 1..50")
        if self.engine.max_cases_in_flight < 1:
            problems.append("engine.max_cases_in_flight must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def to_dict(self) -> dict:
        return {
            "backends": {k: asdict(v) for k, v in self.backends.items()},
            "retrieval": asdict(self.retrieval),
            "engine": asdict(self.engine),
            "paths": asdict(self.paths),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        backends = {}
        for service, cfg in obj.get("backends", {}).items():
            try:
                backends[service] = BackendConfig(**cfg)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"backends.{service}: {exc}") from exc
        config = cls(
            backends=backends or {s: BackendConfig(kind="mock") for s in SERVICES},
            retrieval=RetrievalConfig(**obj.get("retrieval", {})),
            engine=EngineConfig(**obj.get("engine", {})),
            paths=PathsConfig(**obj.get("paths", {})),
        )
        return config

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            obj = json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        config = cls.from_dict(obj)
        config.apply_env_overrides()
        return config

    def apply_env_overrides(self) -> None:
        """CASETUTOR_<SERVICE>_URL may override backend endpoint URLs."""
        for service in list(self.backends):
            env = os.environ.get(f"CASETUTOR_{service.upper()}_URL")
            if env:
                old = self.backends[service]
                self.backends[service] = BackendConfig(
                    kind="http",
                    model_name=old.model_name,
                    endpoint_url=env,
                    max_batch=old.max_batch,
                    timeout_ms=old.timeout_ms,
                    max_concurrent=old.max_concurrent,
                )

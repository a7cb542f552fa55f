"""Rater agreement statistics and the LLM-as-judge harness."""
from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import prompts
from .backends import GenerationBackend, Prompt
from .compose import LearningModule
from .errors import IngestError, SchemaError, UndefinedStatisticError

log = logging.getLogger(__name__)

DIMENSIONS = ("textbook_summary", "educational_material", "mcq")


@dataclass(frozen=True)
class RatingTable:
    """Per-item 1-5 ratings from exactly two raters."""

    dimension: str
    items: tuple[tuple[str, int, int], ...]  # (item_id, r1, r2)

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("a rating table needs at least one item")
        ids = [i for i, _, _ in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("item_ids must be unique")
        for _, r1, r2 in self.items:
            if r1 not in range(1, 6) or r2 not in range(1, 6):
                raise ValueError("ratings must be integers in 1..5")

    @property
    def m(self) -> int:
        return len(self.items)

    def columns(self) -> tuple[list[int], list[int]]:
        return [r1 for _, r1, _ in self.items], [r2 for _, _, r2 in self.items]


@dataclass(frozen=True)
class AgreementReport:
    dimension: str
    alpha: float | None
    kappa_unweighted: float | None
    kappa_quadratic: float | None
    pct_exact: float
    pct_within1: float
    pearson_r: float | None
    m: int

    def __post_init__(self) -> None:
        if self.pct_within1 < self.pct_exact:
            raise ValueError("pct_within1 must be >= pct_exact")


def recode(r: int) -> int:
    """Collapse the 5-point scale to 3 interval points: 1-2, 3, 4-5."""
    if r not in (1, 2, 3, 4, 5):
        raise ValueError(f"rating {r} out of range 1..5")
    return {1: 1, 2: 1, 3: 2, 4: 3, 5: 3}[r]


def delta_sq(u: int, v: int) -> int:
    return (u - v) ** 2


def krippendorff_alpha(table: RatingTable) -> float:
    """1 - D_o/D_e on recoded ratings.

    D_o averages squared differences within items; D_e averages them over
    all M^2 cross pairs of rater-1 and rater-2 values.
    """
    r1, r2 = table.columns()
    a = [recode(x) for x in r1]
    b = [recode(x) for x in r2]
    m = table.m
    d_o = sum(delta_sq(u, v) for u, v in zip(a, b)) / m
    d_e = sum(delta_sq(u, v) for u in a for v in b) / (m * m)
    if d_e == 0:
        raise UndefinedStatisticError(
            "expected disagreement is zero (both raters constant and identical)"
        )
    return 1.0 - d_o / d_e


def cohens_kappa(table: RatingTable, weighting: str = "quadratic") -> float:
    """Two-rater kappa on the recoded 3-point scale.

    Quadratic weights are w_uv = 1 - (u-v)^2 / (k-1)^2 with k=3; the
    unweighted variant scores only exact category matches.
    """
    if weighting not in ("none", "quadratic"):
        raise ValueError(f"unknown weighting {weighting!r}")
    r1, r2 = table.columns()
    a = np.array([recode(x) for x in r1])
    b = np.array([recode(x) for x in r2])
    m = table.m
    k = 3
    counts = np.zeros((k, k))
    for u, v in zip(a, b):
        counts[u - 1, v - 1] += 1
    p = counts / m
    pa = p.sum(axis=1)
    pb = p.sum(axis=0)
    if weighting == "quadratic":
        u_idx, v_idx = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
        w = 1.0 - (u_idx - v_idx) ** 2 / (k - 1) ** 2
    else:
        w = np.eye(k)
    p_o = float((w * p).sum())
    p_e = float((w * np.outer(pa, pb)).sum())
    if abs(1.0 - p_e) < 1e-12:
        raise UndefinedStatisticError("chance agreement is 1; kappa undefined")
    return (p_o - p_e) / (1.0 - p_e)


def agreement_stats(table: RatingTable) -> tuple[float, float, float | None]:
    """(pct_exact, pct_within1, pearson_r) on the original 1-5 scale.

    Pearson r is None when either rater has zero variance.
    """
    r1, r2 = table.columns()
    m = table.m
    exact = 100.0 * sum(1 for u, v in zip(r1, r2) if u == v) / m
    within1 = 100.0 * sum(1 for u, v in zip(r1, r2) if abs(u - v) <= 1) / m
    a = np.asarray(r1, dtype=float)
    b = np.asarray(r2, dtype=float)
    if a.std() == 0.0 or b.std() == 0.0:
        return exact, within1, None
    r = float(np.corrcoef(a, b)[0, 1])
    return exact, within1, r


def agreement_report(table: RatingTable) -> AgreementReport:
    def guarded(fn, *args):
        try:
            return fn(*args)
        except UndefinedStatisticError:
            return None

    exact, within1, pearson = agreement_stats(table)
    return AgreementReport(
        dimension=table.dimension,
        alpha=guarded(krippendorff_alpha, table),
        kappa_unweighted=guarded(cohens_kappa, table, "none"),
        kappa_quadratic=guarded(cohens_kappa, table, "quadratic"),
        pct_exact=exact,
        pct_within1=within1,
        pearson_r=pearson,
        m=table.m,
    )


def load_rating_tables(path: str | Path) -> dict[str, list[tuple[str, str, RatingTable]]]:
    """Read the ratings CSV (item_id,dimension,rater,score).

    Returns dimension -> list of (rater_a, rater_b, table), one entry per
    rater pair. With more than two raters, every pairwise table is produced.
    """
    path = Path(path)
    rows: dict[str, dict[str, dict[str, int]]] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"item_id", "dimension", "rater", "score"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise IngestError(f"{path}: header must contain {sorted(required)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                score = int(row["score"])
            except ValueError as exc:
                raise IngestError(f"{path} line {lineno}: score must be an integer") from exc
            dim = row["dimension"]
            rows.setdefault(dim, {}).setdefault(row["rater"], {})[row["item_id"]] = score
    out: dict[str, list[tuple[str, str, RatingTable]]] = {}
    for dim, by_rater in rows.items():
        raters = sorted(by_rater)
        if len(raters) < 2:
            raise IngestError(f"{path}: dimension {dim!r} has fewer than two raters")
        pairs = []
        for i in range(len(raters)):
            for j in range(i + 1, len(raters)):
                ra, rb = raters[i], raters[j]
                shared = sorted(set(by_rater[ra]) & set(by_rater[rb]))
                if not shared:
                    continue
                table = RatingTable(
                    dimension=dim,
                    items=tuple((iid, by_rater[ra][iid], by_rater[rb][iid]) for iid in shared),
                )
                pairs.append((ra, rb, table))
        if not pairs:
            raise IngestError(f"{path}: dimension {dim!r} has no overlapping items")
        out[dim] = pairs
    return out


# ---------------------------------------------------------------------------
# LLM-as-judge
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JudgeScore:
    case_id: str
    judge_model: str
    dimension: str
    score: int

    def __post_init__(self) -> None:
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"unknown dimension {self.dimension!r}")
        if self.score not in range(1, 6):
            raise ValueError("score must be in 1..5")

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "judge_model": self.judge_model,
            "dimension": self.dimension,
            "score": self.score,
        }


_SCORE_RE = re.compile(r"(?<![\d.])([1-5])(?![\d.])")


def parse_judge_score(completion: str) -> int:
    """First standalone integer 1-5 in the completion."""
    m = _SCORE_RE.search(completion)
    if not m:
        raise SchemaError(f"no score 1-5 found in judge completion: {completion[:200]!r}")
    return int(m.group(1))


def _artifact_text(module: LearningModule, dimension: str) -> str:
    if dimension == "textbook_summary":
        return "\n\n".join(s.summary for s in module.summaries) or "(no summaries)"
    if dimension == "educational_material":
        return module.education_text or "(no educational material)"
    return "\n\n".join(
        f"{q.stem}\nA. {q.options[0]}\nB. {q.options[1]}\nC. {q.options[2]}\nD. {q.options[3]}\n"
        f"Answer: {q.answer}"
        for q in module.mcqs
    ) or "(no questions)"


def build_judge_prompt(module: LearningModule, dimension: str) -> Prompt:
    user = prompts.render(
        prompts.JUDGE_USER,
        dimension=dimension,
        artifact=_artifact_text(module, dimension),
    )
    return Prompt(system=prompts.JUDGE_SYSTEM, user=user)


def judge_case(
    module: LearningModule,
    judge: GenerationBackend,
    judge_model: str = "judge",
    rubric_id: str = "default",
) -> list[JudgeScore]:
    """Score all three dimensions; one retry per dimension on a parse failure."""
    scores: list[JudgeScore] = []
    for dimension in DIMENSIONS:
        prompt = build_judge_prompt(module, dimension)
        score: int | None = None
        last_error: Exception | None = None
        for _ in range(2):
            try:
                score = parse_judge_score(judge.generate(prompt))
                break
            except SchemaError as exc:
                last_error = exc
        if score is None:
            raise SchemaError(
                f"case {module.case_id} dimension {dimension}: {last_error}"
            )
        scores.append(
            JudgeScore(
                case_id=module.case_id,
                judge_model=judge_model,
                dimension=dimension,
                score=score,
            )
        )
    return scores


def round_half_up(value: float, places: int = 2) -> float:
    return float(Decimal(str(value)).quantize(Decimal("1." + "0" * places), ROUND_HALF_UP))


def aggregate_judges(scores: Iterable[JudgeScore]) -> dict:
    """Per-judge per-dimension means, per-judge overall, and the cross-judge row.

    Values are exact floats; rounding (half-up, 2 decimals) happens only at
    render time.
    """
    scores = list(scores)
    if not scores:
        raise ValueError("at least one score required")
    by_judge: dict[str, dict[str, list[int]]] = {}
    for s in scores:
        by_judge.setdefault(s.judge_model, {}).setdefault(s.dimension, []).append(s.score)
    per_judge: dict[str, dict] = {}
    for judge, dims in sorted(by_judge.items()):
        dim_means = {d: float(np.mean(v)) for d, v in dims.items()}
        per_judge[judge] = {
            "dimensions": dim_means,
            "overall": float(np.mean(list(dim_means.values()))),
        }
    avg_row: dict[str, float] = {}
    for d in DIMENSIONS:
        means = [j["dimensions"][d] for j in per_judge.values() if d in j["dimensions"]]
        if means:
            avg_row[d] = float(np.mean(means))
    result = {
        "per_judge": per_judge,
        "avg_judges": avg_row,
        "avg_overall": float(np.mean(list(avg_row.values()))) if avg_row else None,
    }
    return result


def write_scores_jsonl(scores: Sequence[JudgeScore], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for s in scores:
            fh.write(json.dumps(s.to_dict(), ensure_ascii=False) + "\n")


def read_scores_jsonl(path: str | Path) -> list[JudgeScore]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out.append(
                    JudgeScore(
                        case_id=obj["case_id"],
                        judge_model=obj["judge_model"],
                        dimension=obj["dimension"],
                        score=int(obj["score"]),
                    )
                )
    return out

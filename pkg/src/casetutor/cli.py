"""Command-line interface."""
from __future__ import annotations

import asyncio
import json
import os
import sys
import time
from pathlib import Path

import click

from .backends import MockBackend
from .compose import LearningModule
from .config import RunConfig
from .decompose import CaseReport, KeywordSet
from .engine import (
    build_generation_batches,
    build_pool,
    execute_generation,
    run_generation_sequential,
    run_pipeline,
)
from .compose import ContextBundle, assemble_context
from .errors import CaseTutorError
from .evalkit import (
    aggregate_judges,
    agreement_report,
    judge_case,
    load_rating_tables,
    round_half_up,
    write_scores_jsonl,
)
from .rerank import RankedEvidence
from .runtime import FIXTURE_CASES, build_runtime, data_path, load_cases, mock_evidence
from .scholar import QueryCache
from .summarize import TextbookSummary
from .textbook import build_index, ingest_pages, save_index


def _load_config(config_path: str | None) -> RunConfig:
    if config_path:
        return RunConfig.load(config_path)
    return RunConfig()


def _atomic_write(path: Path, text: str) -> None:
    partial = path.with_suffix(path.suffix + ".partial")
    partial.write_text(text, encoding="utf-8")
    os.replace(partial, path)


@click.group()
def main() -> None:
    """Turn clinical case reports into evidence-grounded learning modules."""


@main.command()
@click.option("--pages", "pages_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--mock", is_flag=True, help="Use the deterministic mock embedder.")
def ingest(pages_path: str, out_path: str, config_path: str | None, mock: bool) -> None:
    """Embed a pages JSONL file into a binary vector index."""
    config = _load_config(config_path)
    rt = build_runtime(config, mock=mock, index=None)
    try:
        pages = ingest_pages(pages_path)
        embedder = MockBackend() if rt.mock else None
        if embedder is None:
            from .backends import HttpBackend

            embedder = HttpBackend(config.backends["embedding"])
        index = build_index(pages, embedder, corpus_ref=Path(pages_path).name)
        save_index(index, out_path)
        click.echo(f"indexed {len(index)} pages (dim {index.dim}) -> {out_path}")
    finally:
        asyncio.run(rt.close())


@main.command()
@click.option("--cases", "cases_path", type=click.Path(exists=True), help="Cases JSONL; defaults to the bundled fixture set.")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--mock", is_flag=True, help="All backends mocked; no network.")
@click.option("--out", "out_dir", default="out", type=click.Path())
def run(cases_path: str | None, config_path: str | None, mock: bool, out_dir: str) -> None:
    """Run the full pipeline and write modules.jsonl plus a run report."""
    config = _load_config(config_path)
    cases = load_cases(cases_path or data_path(FIXTURE_CASES))
    rt = build_runtime(config, mock=mock)
    try:
        result = asyncio.run(run_pipeline(cases, rt.deps))
    finally:
        asyncio.run(rt.close())
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    include_timings = config.engine.include_timings
    lines = [
        json.dumps(m.to_dict(include_timings=include_timings), ensure_ascii=False)
        for m in result.modules
    ]
    _atomic_write(out / "modules.jsonl", "\n".join(lines) + ("\n" if lines else ""))
    report = dict(result.report)
    report["config_digest"] = config.digest()
    _atomic_write(out / "run_report.json", json.dumps(report, indent=2) + "\n")
    click.echo(
        f"{report['n_ok']}/{report['n_cases']} cases ok "
        f"({report['n_skipped']} no-keywords, {report['n_failed']} failed)"
    )
    if result.job.status == "failed":
        sys.exit(1)


def _bench_bundles(n: int) -> list[ContextBundle]:
    bundles = []
    for i in range(n):
        case = CaseReport(
            case_id=f"bench{i:03d}",
            full_text=f"FINDINGS: Benchmark case {i} with atelectasis.\n\nIMPRESSION: Atelectasis.",
            impression="Atelectasis.",
            dataset_tag="bench",
        )
        kws = KeywordSet(case_id=case.case_id, keywords=("atelectasis",))
        items = mock_evidence("atelectasis")
        evidence = {
            "atelectasis": RankedEvidence(
                keyword="atelectasis",
                items=tuple((it, 1.0) for it in items),
                kept=tuple(items),
            )
        }
        summaries = {
            "atelectasis": TextbookSummary(
                keyword="atelectasis",
                summary="Atelectasis denotes loss of lung volume.",
                source_page_ids=(2,),
            )
        }
        bundles.append(assemble_context(case, kws, evidence, summaries))
    return bundles


@main.command()
@click.option("--n", default=20, show_default=True)
@click.option("--latency-ms", default=100.0, show_default=True, help="Fixed per-dispatch latency.")
@click.option("--per-prompt-ms", default=1.0, show_default=True, help="Marginal cost per prompt.")
def bench(n: int, latency_ms: float, per_prompt_ms: float) -> None:
    """Compare batched two-dispatch generation against the sequential mode."""
    bundles = _bench_bundles(n)

    async def timed_batched() -> float:
        backend = MockBackend(latency_ms=latency_ms, per_item_ms=per_prompt_ms)
        pool = build_pool(backend, backend, backend, workers_per_service=2).start()
        try:
            batches = build_generation_batches(bundles)
            start = time.monotonic()
            await execute_generation(pool, batches)
            return (time.monotonic() - start) * 1000
        finally:
            pool.shutdown()

    async def timed_sequential() -> float:
        backend = MockBackend(latency_ms=latency_ms, per_item_ms=per_prompt_ms)
        pool = build_pool(backend, backend, backend).start()
        try:
            start = time.monotonic()
            await run_generation_sequential(bundles, pool)
            return (time.monotonic() - start) * 1000
        finally:
            pool.shutdown()

    batched_ms = asyncio.run(timed_batched())
    sequential_ms = asyncio.run(timed_sequential())
    speedup = sequential_ms / batched_ms if batched_ms > 0 else float("inf")
    click.echo(f"{'mode':<12} {'wall ms':>10}")
    click.echo(f"{'batched':<12} {batched_ms:>10.1f}")
    click.echo(f"{'sequential':<12} {sequential_ms:>10.1f}")
    click.echo(f"speedup (sequential/batched): {speedup:.2f}x")


@main.group()
def eval() -> None:
    """Evaluation toolkit: rater agreement and LLM-as-judge."""


@eval.command()
@click.option("--ratings", "ratings_path", required=True, type=click.Path(exists=True))
def iaa(ratings_path: str) -> None:
    """Agreement statistics per dimension (all rater pairs plus their mean)."""
    tables = load_rating_tables(ratings_path)

    def fmt(x: float | None) -> str:
        return f"{x:.3f}" if x is not None else "undef"

    header = f"{'dimension':<24} {'pair':<16} {'alpha':>7} {'kappa_q':>8} {'kappa_u':>8} {'exact%':>7} {'within1%':>9} {'r':>7} {'M':>4}"
    click.echo(header)
    for dim in sorted(tables):
        pair_reports = []
        for ra, rb, table in tables[dim]:
            rep = agreement_report(table)
            pair_reports.append(rep)
            click.echo(
                f"{dim:<24} {ra + '/' + rb:<16} {fmt(rep.alpha):>7} {fmt(rep.kappa_quadratic):>8} "
                f"{fmt(rep.kappa_unweighted):>8} {rep.pct_exact:>7.1f} {rep.pct_within1:>9.1f} "
                f"{fmt(rep.pearson_r):>7} {rep.m:>4}"
            )
        if len(pair_reports) > 1:
            def mean_of(vals):
                vals = [v for v in vals if v is not None]
                return sum(vals) / len(vals) if vals else None

            click.echo(
                f"{dim:<24} {'mean(pairs)':<16} "
                f"{fmt(mean_of([r.alpha for r in pair_reports])):>7} "
                f"{fmt(mean_of([r.kappa_quadratic for r in pair_reports])):>8} "
                f"{fmt(mean_of([r.kappa_unweighted for r in pair_reports])):>8} "
                f"{mean_of([r.pct_exact for r in pair_reports]):>7.1f} "
                f"{mean_of([r.pct_within1 for r in pair_reports]):>9.1f} "
                f"{fmt(mean_of([r.pearson_r for r in pair_reports])):>7} "
                f"{pair_reports[0].m:>4}"
            )


@eval.command()
@click.option("--modules", "modules_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default="scores.jsonl", type=click.Path())
@click.option("--mock", is_flag=True, help="Use the deterministic mock judge.")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--judge-model", default="mock-judge", show_default=True)
def judge(modules_path: str, out_path: str, mock: bool, config_path: str | None, judge_model: str) -> None:
    """Score modules on all dimensions and print the aggregate table."""
    config = _load_config(config_path)
    if mock or config.backends["generation"].kind == "mock":
        backend = MockBackend()
    else:
        from .backends import HttpBackend

        backend = HttpBackend(config.backends["generation"])
    modules = []
    with open(modules_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                modules.append(LearningModule.from_dict(json.loads(line)))
    scores = []
    for module in modules:
        scores.extend(judge_case(module, backend, judge_model=judge_model))
    write_scores_jsonl(scores, out_path)
    agg = aggregate_judges(scores)
    click.echo(f"{'judge':<20} {'summary':>8} {'education':>10} {'mcq':>6} {'overall':>8}")
    for judge_name, row in agg["per_judge"].items():
        dims = row["dimensions"]
        click.echo(
            f"{judge_name:<20} {round_half_up(dims.get('textbook_summary', 0)):>8.2f} "
            f"{round_half_up(dims.get('educational_material', 0)):>10.2f} "
            f"{round_half_up(dims.get('mcq', 0)):>6.2f} {round_half_up(row['overall']):>8.2f}"
        )
    avg = agg["avg_judges"]
    click.echo(
        f"{'Avg. (Judges)':<20} {round_half_up(avg.get('textbook_summary', 0)):>8.2f} "
        f"{round_half_up(avg.get('educational_material', 0)):>10.2f} "
        f"{round_half_up(avg.get('mcq', 0)):>6.2f} {round_half_up(agg['avg_overall']):>8.2f}"
    )
    click.echo(f"wrote {len(scores)} scores -> {out_path}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--mock", is_flag=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(config_path: str | None, mock: bool, host: str, port: int) -> None:
    """Serve the job HTTP API consumed by the browser console."""
    import uvicorn

    from .api import create_app

    config = _load_config(config_path)
    app = create_app(config, mock=mock)
    uvicorn.run(app, host=host, port=port)


@main.group()
def cache() -> None:
    """Query-cache maintenance."""


@cache.command()
@click.option("--config", "config_path", type=click.Path(exists=True))
def purge(config_path: str | None) -> None:
    """Delete every cached academic query result."""
    config = _load_config(config_path)
    n = QueryCache(config.retrieval.cache_dir).purge()
    click.echo(f"purged {n} cache entries from {config.retrieval.cache_dir}")


def _cli_entry() -> None:
    try:
        main(standalone_mode=True)
    except CaseTutorError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    _cli_entry()

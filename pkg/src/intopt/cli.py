"""Command-line entry point: one subcommand per pipeline stage plus batch
composition over a program manifest.
"""

from __future__ import annotations

import json
import logging
import sys
import tempfile
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import click

from . import analysis as analysis_mod
from . import bench as bench_mod
from . import kb as kb_mod
from . import pipeline as pipeline_mod
from . import report as report_mod
from . import retrieval as retrieval_mod
from . import verify as verify_mod
from .errors import ConfigError, IntOptError
from .ir import (
    DEFAULT_TOKEN_CAP,
    IrPair,
    IrProgram,
    load_ir,
    validate_ir,
    write_ir,
)
from .llm import BackendConfig
from .toolchain import ToolchainConfig

logger = logging.getLogger(__name__)

_MODES = ("pipeline", "baseline", "replay")


@dataclass
class PipelineConfig:
    toolchain: ToolchainConfig = field(default_factory=ToolchainConfig)
    kb_path: str | None = None
    backends: dict[str, BackendConfig] = field(default_factory=dict)
    backend: str | None = None  # default backend id
    retrieval_m: int = retrieval_mod.DEFAULT_TOP_M
    token_cap: int = DEFAULT_TOKEN_CAP
    fuzz_runs: int = verify_mod.DEFAULT_FUZZ_RUNS
    bench_iters: int = bench_mod.DEFAULT_TIMED_ITERS
    workers: int = 1
    mode: str = "pipeline"
    harness_mode: str = "template"

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib

        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            data = tomllib.loads(path.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        config = cls()
        if "toolchain" in data:
            config.toolchain = ToolchainConfig.from_file(path)
        for key, attr in (
            ("kb", "kb_path"), ("backend", "backend"), ("mode", "mode"),
            ("retrieval_m", "retrieval_m"), ("token_cap", "token_cap"),
            ("fuzz_runs", "fuzz_runs"), ("bench_iters", "bench_iters"),
            ("workers", "workers"), ("harness_mode", "harness_mode"),
        ):
            if key in data:
                setattr(config, attr, data[key])
        for backend_id, entry in data.get("backends", {}).items():
            if "kind" not in entry:
                raise ConfigError(f"backend '{backend_id}' has no kind")
            config.backends[backend_id] = BackendConfig(
                backend_id=backend_id,
                kind=entry["kind"],
                endpoint=entry.get("endpoint", ""),
                model=entry.get("model", ""),
                transcript_dir=_relative_to(entry.get("transcript_dir"), path),
                max_retries=entry.get("max_retries", 5),
                timeout_s=entry.get("timeout_s", 600.0),
            )
        if config.kb_path:
            config.kb_path = _relative_to(config.kb_path, path)
        config.validate()
        return config

    def validate(self) -> None:
        if self.mode not in _MODES:
            raise ConfigError(f"unknown mode '{self.mode}' (expected one of {_MODES})")
        if self.backend and self.backend not in self.backends:
            raise ConfigError(f"default backend '{self.backend}' is not defined")
        if self.kb_path and not Path(self.kb_path).exists():
            raise ConfigError(f"knowledge base {self.kb_path} does not exist")
        if self.retrieval_m < 1:
            raise ConfigError("retrieval_m must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def resolve_backend(self, backend_id: str | None = None) -> BackendConfig:
        name = backend_id or self.backend
        if not name:
            raise ConfigError("no backend configured (set 'backend' or pass --backend)")
        if name not in self.backends:
            raise ConfigError(f"backend '{name}' is not defined")
        backend = self.backends[name]
        if self.mode == "replay" and backend.kind != "replay":
            # Replay mode forces every backend onto its transcript store.
            if not backend.transcript_dir:
                raise ConfigError(
                    f"replay mode needs a transcript_dir for backend '{name}'"
                )
            backend = BackendConfig(
                backend_id=backend.backend_id,
                kind="replay",
                endpoint=backend.endpoint,
                model=backend.model,
                transcript_dir=backend.transcript_dir,
            )
        return backend


def _relative_to(value: str | None, config_path: Path) -> str | None:
    if value is None:
        return None
    p = Path(value)
    return str(p if p.is_absolute() else (config_path.parent / p).resolve())


def _load_config(config_path: str | None) -> PipelineConfig:
    import os

    path = config_path or os.environ.get("INTOPT_CONFIG")
    if path:
        return PipelineConfig.load(path)
    return PipelineConfig()


def _emit(data: dict, as_json: bool, human: str | None = None) -> None:
    if as_json or human is None:
        click.echo(json.dumps(data, indent=2, sort_keys=True))
    else:
        click.echo(human)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML config file (defaults to $INTOPT_CONFIG).")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
@click.pass_context
def main(ctx, config_path, verbose):
    """Intent-driven LLVM IR optimization pipeline."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    ctx.obj = {"config_path": config_path}


def _config(ctx) -> PipelineConfig:
    return _load_config(ctx.obj["config_path"])


# --- kb ---------------------------------------------------------------------

@main.group()
def kb():
    """Compiler knowledge base."""


@kb.command("build")
@click.option("--llvm-root", required=True, type=click.Path(exists=True),
              help="LLVM source tree root.")
@click.option("--docs", type=click.Path(exists=True), default=None,
              help="Pass documentation file for descriptions.")
@click.option("--include-cached", is_flag=True,
              help="Count getCachedResult uses as dependencies.")
@click.option("-o", "--output", required=True, type=click.Path())
def kb_build(llvm_root, docs, include_cached, output):
    """Extract pass/analysis dependencies from an LLVM source tree."""
    docs_text = Path(docs).read_text() if docs else ""
    base = kb_mod.build_kb(llvm_root, docs_source=docs_text, include_cached=include_cached)
    base.save(output)
    click.echo(f"{len(base.entries)} passes -> {output}")


# --- retrieve ----------------------------------------------------------------

@main.command()
@click.argument("query")
@click.option("--kb", "kb_path", type=click.Path(exists=True), default=None)
@click.option("-m", "top_m", type=int, default=None, help="Number of passes to return.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def retrieve(ctx, query, kb_path, top_m, as_json):
    """Rank passes by similarity to a transformation description."""
    config = _config(ctx)
    kb_path = kb_path or config.kb_path
    if not kb_path:
        raise ConfigError("no knowledge base given (--kb or config)")
    base = kb_mod.KnowledgeBase.load(kb_path)
    index = retrieval_mod.build_index(base)
    hits = retrieval_mod.retrieve(index, query, m=top_m or config.retrieval_m)
    data = {
        "hits": [
            {"rank": h.rank, "pass_id": h.pass_id, "score": round(h.score, 9),
             "deps": base.entries[h.pass_id].deps}
            for h in hits
        ]
    }
    human = "\n".join(
        f"{h['rank']}. {h['pass_id']} ({h['score']:.4f}) deps: {', '.join(h['deps']) or '-'}"
        for h in data["hits"]
    ) or "no matches"
    _emit(data, as_json, human)


# --- analyze ------------------------------------------------------------------

@main.command()
@click.option("--ir", "ir_path", required=True, type=click.Path(exists=True))
@click.option("--analyses", required=True,
              help="Comma-separated analysis ids (e.g. LoopAnalysis).")
@click.option("--name-map", type=click.Path(exists=True), default=None,
              help="JSON analysis-to-printer map; bundled default otherwise.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def analyze(ctx, ir_path, analyses, name_map, as_json):
    """Collect analysis printer output for a program."""
    config = _config(ctx)
    program = load_ir(ir_path)
    nm = (analysis_mod.AnalysisNameMap.load(name_map) if name_map
          else analysis_mod.AnalysisNameMap.default())
    wanted = [a.strip() for a in analyses.split(",") if a.strip()]
    bundle = analysis_mod.collect_analysis(program, wanted, nm, config.toolchain)
    if as_json:
        _emit(
            {"program": bundle.for_program,
             "items": [{"analysis_id": it.analysis_id, "status": it.status,
                        "payload": it.payload} for it in bundle.items]},
            True,
        )
    else:
        click.echo(analysis_mod.render_bundle(bundle))


# --- optimize -------------------------------------------------------------------

def _optimize_program(program: IrProgram, config: PipelineConfig,
                      backend_id: str | None = None) -> tuple[IrProgram, dict]:
    """Run one program through the configured optimization mode."""
    backend = config.resolve_backend(backend_id)
    toolchain = config.toolchain
    if config.mode == "baseline":
        optimized = pipeline_mod.optimize_end_to_end_baseline(
            program, backend, toolchain=toolchain
        )
        return optimized, {"mode": "baseline"}
    if not config.kb_path:
        raise ConfigError("pipeline mode needs a knowledge base (kb in config)")
    base = kb_mod.KnowledgeBase.load(config.kb_path)
    index = retrieval_mod.build_index(base)
    strategy = pipeline_mod.formulate(program, backend)
    analyses = retrieval_mod.resolve_analysis_set(
        strategy.action_texts(), index, base, m=config.retrieval_m
    )
    bundle = analysis_mod.collect_analysis(
        program, analyses, analysis_mod.AnalysisNameMap.default(), toolchain
    )
    refined = pipeline_mod.refine(program, strategy, bundle, backend)
    optimized = pipeline_mod.realize(
        program, refined, bundle, backend, toolchain=toolchain
    )
    meta = {
        "mode": "pipeline",
        "initial_strategy": strategy.to_json(),
        "analyses": analyses,
        "refined_strategy": refined.to_json(),
    }
    return optimized, meta


@main.command()
@click.option("--ir", "ir_path", required=True, type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
@click.option("--backend", "backend_id", default=None)
@click.option("--mode", type=click.Choice(_MODES), default=None,
              help="Override the configured mode.")
@click.option("--strategy-out", type=click.Path(), default=None,
              help="Write stage metadata (strategies, analyses) as JSON.")
@click.pass_context
def optimize(ctx, ir_path, output, backend_id, mode, strategy_out):
    """Optimize one program via the staged pipeline (or baseline mode)."""
    config = _config(ctx)
    if mode:
        config.mode = mode
        config.validate()
    program = load_ir(ir_path)
    validate_ir(program, config.toolchain)
    optimized, meta = _optimize_program(program, config, backend_id)
    write_ir(optimized, output)
    if strategy_out:
        Path(strategy_out).write_text(json.dumps(meta, indent=2, sort_keys=True))
    status = "valid" if optimized.valid is not False else "INVALID"
    click.echo(f"{program.id}: optimized IR ({status}) -> {output}")


# --- verify ----------------------------------------------------------------------

@main.command("verify")
@click.option("--unopt", required=True, type=click.Path(exists=True))
@click.option("--opt", required=True, type=click.Path(exists=True))
@click.option("--runs", type=int, default=None, help="Fuzzing run budget.")
@click.option("--work-dir", type=click.Path(), default=None,
              help="Keep build artifacts and corpus here.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def verify_cmd(ctx, unopt, opt, runs, work_dir, as_json):
    """Check a pair for semantic equivalence."""
    config = _config(ctx)
    pair = IrPair(unopt=load_ir(unopt), opt=load_ir(opt))
    vconfig = verify_mod.VerifyConfig(
        toolchain=config.toolchain,
        runs=runs or config.fuzz_runs,
        harness_mode=config.harness_mode,
        backend=(config.resolve_backend() if config.harness_mode == "llm" else None),
        work_dir=Path(work_dir) if work_dir else None,
    )
    verdict = verify_mod.verify(pair, vconfig)
    human = f"{verdict.status} (method={verdict.method})"
    if verdict.crash_input:
        human += f"\ncrashing input: {verdict.crash_input}"
    _emit(verdict.to_json(), as_json, human)
    if not verdict.is_equivalent:
        sys.exit(1)


# --- bench ----------------------------------------------------------------------

@main.command("bench")
@click.option("--unopt", required=True, type=click.Path(exists=True))
@click.option("--opt", required=True, type=click.Path(exists=True))
@click.option("--corpus", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--iters", type=int, default=None, help="Timed iterations per input.")
@click.pass_context
def bench_cmd(ctx, unopt, opt, corpus, iters):
    """Measure the speedup of a verified pair over a fuzz corpus."""
    config = _config(ctx)
    pair = IrPair(unopt=load_ir(unopt), opt=load_ir(opt))
    merged = verify_mod.merge_for_diff(pair)
    harness = verify_mod.generate_harness(merged, mode="template")
    with tempfile.TemporaryDirectory(prefix="intopt-bench-") as work:
        record = bench_mod.bench_pair(
            harness, merged, corpus, config.toolchain, work,
            timed_iters=iters or config.bench_iters,
            program_id=pair.unopt.id,
        )
    click.echo(json.dumps(record.to_json(), indent=2, sort_keys=True))


# --- report ----------------------------------------------------------------------

@main.command("report")
@click.option("--results", required=True, type=click.Path(exists=True))
@click.option("--compare", type=click.Path(exists=True), default=None,
              help="Second results file for pairwise win/tie/loss.")
@click.option("--json", "as_json", is_flag=True)
def report_cmd(results, compare, as_json):
    """Aggregate a results file into the summary table."""
    records, verdicts = report_mod.load_results(results)
    rpt = report_mod.aggregate(records, verdicts)
    data = rpt.to_json()
    human = report_mod.render_markdown(rpt)
    if compare:
        other_records, _ = report_mod.load_results(compare)
        cmp = report_mod.compare_pairwise(records, other_records)
        data["pairwise"] = cmp.to_json()
        human += (
            f"\nPairwise vs {compare}: {cmp.wins} wins, {cmp.ties} ties, "
            f"{cmp.losses} losses (equal band "
            f"[{report_mod.DEFAULT_EQUAL_BAND[0]}, {report_mod.DEFAULT_EQUAL_BAND[1]}])\n"
        )
    _emit(data, as_json, human)


# --- distill ----------------------------------------------------------------------

@main.command("distill")
@click.option("--unopt", required=True, type=click.Path(exists=True))
@click.option("--opt", required=True, type=click.Path(exists=True))
@click.option("--backend", "backend_id", default=None)
@click.option("-o", "--output", required=True, type=click.Path(),
              help="Training-triple JSONL file (appended).")
@click.pass_context
def distill(ctx, unopt, opt, backend_id, output):
    """Infer the strategy behind a compiler-optimized pair."""
    config = _config(ctx)
    backend = config.resolve_backend(backend_id)
    pair = IrPair(unopt=load_ir(unopt), opt=load_ir(opt))
    pair, strategy = pipeline_mod.distill_strategy(
        pair, backend, token_cap=config.token_cap
    )
    line = pipeline_mod.triple_to_jsonl(pair, strategy)
    with open(output, "a") as fh:
        fh.write(line + "\n")
    click.echo(f"{pair.unopt.id}: {len(strategy.actions)} actions -> {output}")


# --- batch ----------------------------------------------------------------------

def _batch_one(ir_path: str, config: PipelineConfig, no_bench: bool) -> dict:
    """One program end to end; every failure becomes a record, never a raise."""
    program_id = Path(ir_path).stem
    try:
        program = load_ir(ir_path)
        validate_ir(program, config.toolchain)
        optimized, _ = _optimize_program(program, config)
        pair = IrPair(unopt=program, opt=optimized)
        vconfig = verify_mod.VerifyConfig(
            toolchain=config.toolchain,
            runs=config.fuzz_runs,
            harness_mode=config.harness_mode,
            backend=(config.resolve_backend() if config.harness_mode == "llm" else None),
        )
        work = Path(tempfile.mkdtemp(prefix=f"intopt-batch-{program_id}-"))
        vconfig.work_dir = work
        verdict = verify_mod.verify(pair, vconfig)
        if verdict.is_equivalent and not no_bench:
            merged = verify_mod.merge_for_diff(pair)
            harness = verify_mod.generate_harness(
                merged, mode=config.harness_mode, backend=vconfig.backend
            )
            record = bench_mod.bench_pair(
                harness, merged, work / "corpus", config.toolchain, work / "bench",
                timed_iters=config.bench_iters, program_id=program_id,
            )
        else:
            record = bench_mod.make_perf_record(
                program_id=program_id,
                correct=verdict.is_equivalent,
                avg_ns_base=0.0, avg_ns_opt=0.0,
                iters=config.bench_iters,
            )
        return {"program_id": program_id, "perf": record.to_json(),
                "verdict": verdict.to_json()}
    except ConfigError:
        raise
    except IntOptError as exc:
        return {"program_id": program_id, "error": type(exc).__name__,
                "detail": str(exc)}
    except Exception as exc:
        logger.error("unexpected failure on %s:\n%s", program_id, traceback.format_exc())
        return {"program_id": program_id, "error": type(exc).__name__,
                "detail": str(exc)}


@main.command("batch")
@click.option("--manifest", required=True, type=click.Path(exists=True),
              help="File listing one IR path per line.")
@click.option("-o", "--output", "output", default="results.jsonl", type=click.Path())
@click.option("--mode", type=click.Choice(_MODES), default=None)
@click.option("--resume", is_flag=True,
              help="Skip programs already present in the output file.")
@click.option("--no-bench", is_flag=True,
              help="Stop after verification; perf fields stay zero.")
@click.option("--workers", type=int, default=None)
@click.pass_context
def batch(ctx, manifest, output, mode, resume, no_bench, workers):
    """Optimize, verify, and benchmark every program in a manifest."""
    from concurrent.futures import ThreadPoolExecutor

    config = _config(ctx)
    if mode:
        config.mode = mode
        config.validate()
    if workers:
        config.workers = workers
    manifest_dir = Path(manifest).parent
    paths = []
    for line in Path(manifest).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        p = Path(line)
        paths.append(str(p if p.is_absolute() else manifest_dir / p))
    for p in paths:
        if not Path(p).exists():
            raise ConfigError(f"manifest entry {p} does not exist")
    # Fail before any work if the toolchain cannot be resolved.
    for tool in ("opt", "llc", "clangxx"):
        if not config.toolchain.available(tool):
            raise ConfigError(f"required tool '{tool}' cannot be resolved")
    if config.mode != "baseline":
        if not config.kb_path:
            raise ConfigError("pipeline mode needs a knowledge base (kb in config)")
    config.resolve_backend()

    done: set[str] = set()
    out_path = Path(output)
    if resume and out_path.exists():
        for line in out_path.read_text().splitlines():
            if line.strip():
                done.add(json.loads(line).get("program_id", ""))
    todo = [p for p in paths if Path(p).stem not in done]
    if not todo:
        click.echo(f"nothing to do ({len(done)} already in {output})")
        return

    # Results are appended in manifest order regardless of completion order
    # so replay runs produce identical bytes.
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        results = list(pool.map(lambda p: _batch_one(p, config, no_bench), todo))
    with open(out_path, "a") as fh:
        for record in results:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    failures = sum(1 for r in results if "error" in r)
    click.echo(f"{len(results)} programs ({failures} failed) -> {output}")


def _entry() -> None:
    try:
        main(standalone_mode=False)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)
    except IntOptError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    _entry()

"""Command line entry point: one command per pipeline stage."""

import json
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Annotated, Any

import click
import typer
import uvicorn

from src.core import config as settings
from src.core.logger_config import error_logger, pipeline_logger
from src.decorators.stage import handle_stage_exceptions
from src.enums.artifact import Stage
from src.enums.corpus import Difficulty
from src.enums.exit_code import ExitCode
from src.errors.core import CoreError
from src.errors.numerical import NumericalError
from src.models.config import PipelineConfig
from src.models.core import CoreModel
from src.services.config_service import ConfigService
from src.services.corpus_service import CorpusService
from src.services.pipeline_service import PipelineService
from src.services.rl_service import RLService

app = typer.Typer(
    name="reasonemb",
    help="Desk-scale adaptive reasoning embeddings: corpus, pool, training, RL and evaluation.",
    add_completion=False,
    no_args_is_help=True,
)

ConfigOption = Annotated[
    Path | None, typer.Option("--config", help="JSON config file (overrides env, not flags).")
]
SeedOption = Annotated[int | None, typer.Option("--seed", min=0, help="Root 64-bit seed.")]
OutOption = Annotated[str | None, typer.Option("--out", help="Output directory.")]
ErrorJsonOption = Annotated[
    bool, typer.Option("--error-json", help="Print failures as JSON on stdout.")
]
BackendUrlOption = Annotated[
    str | None, typer.Option("--backend-url", help="Remote worker/evaluator base URL.")
]
BackendModelOption = Annotated[
    str | None, typer.Option("--backend-model", help="Evaluator model name.")
]
TimeoutOption = Annotated[int | None, typer.Option("--timeout-ms", min=1)]
InflightOption = Annotated[int | None, typer.Option("--max-inflight", min=1)]


def resolve_config(
    config_path: Path | None,
    seed: int | None,
    out: str | None,
    backend: dict[str, Any] | None = None,
    extra: dict[str, Any] | None = None,
) -> PipelineConfig:
    """Defaults < env < file < flags."""
    flags: dict[str, Any] = {"seed": seed, "out_dir": out}
    if backend:
        flags["pool"] = {"backend": backend}
    if extra:
        flags = {**flags, **extra}
    return ConfigService.load_pipeline_config(config_path, flags)


def execute(stage: Stage, error_json: bool, action: Callable[[], Any]) -> Any:  # noqa: ANN401
    """Run a stage, turning CoreErrors into a message and an exit code."""
    try:
        return handle_stage_exceptions(stage.value)(action)()
    except CoreError as e:
        typer.echo(f"Error: {e.message}", err=True)
        if error_json:
            typer.echo(json.dumps({
                "error": type(e).__name__,
                "message": e.message,
                "exit_code": int(e.exit_code),
                "stage": stage.value,
            }))
        raise typer.Exit(code=int(e.exit_code)) from e


def emit(payload: CoreModel | dict[str, Any]) -> None:
    if isinstance(payload, CoreModel):
        typer.echo(payload.model_dump_json(indent=2))
    else:
        typer.echo(json.dumps(payload, indent=2))


@app.command("gen-corpus")
def gen_corpus(
    config: ConfigOption = None, seed: SeedOption = None, out: OutOption = None,
    error_json: ErrorJsonOption = False,
) -> None:
    """Generate the synthetic bridging-concept corpus."""

    def action() -> dict[str, Any]:
        pipeline = PipelineService(resolve_config(config, seed, out))
        pairs = pipeline.gen_corpus()
        hard = sum(1 for p in pairs if p.difficulty == Difficulty.hard)
        return {"pairs": len(pairs), "hard": hard}

    emit(execute(Stage.gen_corpus, error_json, action))


@app.command("gen-candidates")
def gen_candidates(
    config: ConfigOption = None, seed: SeedOption = None, out: OutOption = None,
    backend_url: BackendUrlOption = None, backend_model: BackendModelOption = None,
    timeout_ms: TimeoutOption = None, max_inflight: InflightOption = None,
    error_json: ErrorJsonOption = False,
) -> None:
    """Single-sided rationale candidates from every worker."""
    backend = {"url": backend_url, "model": backend_model, "timeout_ms": timeout_ms,
               "max_inflight": max_inflight}

    def action() -> dict[str, Any]:
        pipeline = PipelineService(resolve_config(config, seed, out, backend))
        return {"candidates": len(pipeline.gen_candidates())}

    emit(execute(Stage.gen_candidates, error_json, action))


@app.command("score-pool")
def score_pool(
    config: ConfigOption = None, seed: SeedOption = None, out: OutOption = None,
    backend_url: BackendUrlOption = None, backend_model: BackendModelOption = None,
    timeout_ms: TimeoutOption = None, max_inflight: InflightOption = None,
    error_json: ErrorJsonOption = False,
) -> None:
    """Counterfactual scoring, selection and weighting into the reasoning pool."""
    backend = {"url": backend_url, "model": backend_model, "timeout_ms": timeout_ms,
               "max_inflight": max_inflight}

    def action() -> dict[str, Any]:
        pipeline = PipelineService(resolve_config(config, seed, out, backend))
        entries = pipeline.score_pool()
        return {"entries": len(entries),
                "direct_only": sum(1 for e in entries if e.direct_only)}

    emit(execute(Stage.score_pool, error_json, action))


@app.command("train-joint")
def train_joint(
    config: ConfigOption = None, seed: SeedOption = None, out: OutOption = None,
    error_json: ErrorJsonOption = False,
) -> None:
    """Joint contrastive and chain-of-thought training."""

    def action() -> dict[str, Any]:
        report = PipelineService(resolve_config(config, seed, out)).train_joint()
        last = report.steps[-1] if report.steps else None
        return {"steps": len(report.steps), "final_loss": last.total if last else None,
                "checkpoint": report.final_checkpoint}

    emit(execute(Stage.train_joint, error_json, action))


@app.command("estimate-utility")
def estimate_utility(
    config: ConfigOption = None, seed: SeedOption = None, out: OutOption = None,
    error_json: ErrorJsonOption = False,
) -> None:
    """Direct vs reasoning similarity gap per RL pair."""

    def action() -> CoreModel:
        records = PipelineService(resolve_config(config, seed, out)).estimate_utility()
        return RLService.summarize_utility(records)

    emit(execute(Stage.estimate_utility, error_json, action))


@app.command("train-rl")
def train_rl(
    config: ConfigOption = None, seed: SeedOption = None, out: OutOption = None,
    error_json: ErrorJsonOption = False,
) -> None:
    """Adaptive reasoning policy optimization."""

    def action() -> dict[str, Any]:
        report = PipelineService(resolve_config(config, seed, out)).train_rl()
        last = report.steps[-1] if report.steps else None
        return {"steps": len(report.steps),
                "reasoning_ratio": last.reasoning_ratio if last else None,
                "skipped_pairs": len(report.skipped_pairs),
                "checkpoint": report.final_checkpoint}

    emit(execute(Stage.train_rl, error_json, action))


@app.command("eval")
def evaluate(
    config: ConfigOption = None, seed: SeedOption = None, out: OutOption = None,
    error_json: ErrorJsonOption = False,
) -> None:
    """Evaluate every strategy on the eval split."""

    def action() -> CoreModel:
        return PipelineService(resolve_config(config, seed, out)).evaluate()

    emit(execute(Stage.eval, error_json, action))


@app.command("sweep")
def sweep(
    config: ConfigOption = None, seed: SeedOption = None, out: OutOption = None,
    c_values: Annotated[
        list[float] | None, typer.Option("--c", help="Cost coefficient; repeat, ascending.")
    ] = None,
    error_json: ErrorJsonOption = False,
) -> None:
    """Retrain RL per cost coefficient and chart reasoning ratio against accuracy."""
    extra = {"eval": {"sweep_c_values": c_values}} if c_values else None

    def action() -> dict[str, Any]:
        rows = PipelineService(resolve_config(config, seed, out, extra=extra)).sweep()
        return {"rows": [r.model_dump() for r in rows]}

    emit(execute(Stage.sweep, error_json, action))


@app.command("gradcheck")
def gradcheck(
    seed: SeedOption = None,
    entries: Annotated[
        int | None, typer.Option("--entries", min=1, help="Entries sampled per tensor.")
    ] = None,
    error_json: ErrorJsonOption = False,
) -> None:
    """Finite-difference audit of the joint loss on the tiny encoder."""

    def action() -> CoreModel:
        report = PipelineService.gradcheck(entries, seed or 0)
        typer.echo(f"max relative error {report.max_rel_error:.3e}", err=True)
        if not report.passed:
            raise NumericalError(
                f"gradcheck failed: max relative error {report.max_rel_error:.3e} "
                f"exceeds {report.tolerance:.0e}"
            )
        return report

    emit(execute(Stage.gradcheck, error_json, action))


@app.command("analyze")
def analyze(
    config: ConfigOption = None, seed: SeedOption = None, out: OutOption = None,
    error_json: ErrorJsonOption = False,
) -> None:
    """Gain and utility distributions with figures."""

    def action() -> CoreModel:
        return PipelineService(resolve_config(config, seed, out)).analyze()

    emit(execute(Stage.analyze, error_json, action))


@app.command("serve-mock")
def serve_mock(
    config: ConfigOption = None, seed: SeedOption = None,
    host: Annotated[str, typer.Option("--host")] = "127.0.0.1",
    port: Annotated[int, typer.Option("--port")] = settings.MOCK_BACKEND_PORT,
) -> None:
    """Serve the synthetic judge and workers as an OpenAI-compatible backend."""
    from src.api.main import create_app

    resolved = resolve_config(config, seed, None)
    codebook = CorpusService.build_codebook(resolved.corpus, resolved.seed)
    mock = create_app(codebook=codebook, workers=resolved.pool.workers, seed=resolved.seed)
    uvicorn.run(mock, host=host, port=port)


@app.command("run-all")
def run_all(
    config: ConfigOption = None, seed: SeedOption = None, out: OutOption = None,
    backend_url: BackendUrlOption = None, backend_model: BackendModelOption = None,
    timeout_ms: TimeoutOption = None, max_inflight: InflightOption = None,
    no_sweep: Annotated[bool, typer.Option("--no-sweep", help="Skip the cost sweep.")] = False,
    error_json: ErrorJsonOption = False,
) -> None:
    """Every stage in order under one seed."""
    backend = {"url": backend_url, "model": backend_model, "timeout_ms": timeout_ms,
               "max_inflight": max_inflight}

    def action() -> CoreModel:
        resolved = resolve_config(config, seed, out, backend)
        pipeline_logger.info(f"Running all stages into {resolved.out_dir}")
        return PipelineService(resolved).run_all(include_sweep=not no_sweep)

    emit(execute(Stage.run_all, error_json, action))


def main(argv: list[str] | None = None) -> int:
    """Run the CLI and return its exit code; flag errors are usage errors."""
    try:
        code = app(args=argv, prog_name="reasonemb", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return int(ExitCode.usage)
    except click.exceptions.Abort:
        error_logger.error("Aborted")
        return int(ExitCode.usage)
    return int(code or 0)


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()

"""Main CLI interface for HiRRR."""

import logging
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence

import click
import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from . import __version__
from .cohort import build_cohort, build_dataset, generate_registry, load_encounters, write_encounters
from .config import (
    CohortConfig,
    Config,
    CvGrid,
    ModelSpec,
    ScenarioSpec,
    SplitPlan,
    ensure_directories,
    load_config,
    load_json_model,
    load_model_specs,
)
from .env_help.env_help_config import (
    ENV_CATEGORIES,
    ENV_HELP_CATEGORY_CHOICES,
    ENV_HELP_DEFAULT_MAX_LENGTH,
    ENV_HELP_DESCRIPTION_MAX_LENGTH,
)
from .estimators.base import Dataset, ModelParams
from .estimators.factory import EstimatorFactory
from .estimators.predict import predict
from .expfam import Family
from .metrics import MetricsReport
from .model_selection import cross_validate, fit_model, run_random_splits
from .reporting import (
    FactorDirection,
    compare_unique_cases,
    factor_table_rows,
    rank_factors,
    unique_case_table_rows,
)
from .simulation import n1_scaling_experiment, run_replications
from .utils.error_handler import HirrrError
from .utils.io import config_hash, write_csv, write_json, write_manifest
from .utils.logging_setup import AuditLogger, setup_logging

console = Console()
logger = logging.getLogger(__name__)

# Commands that run without loading configuration or logging
_CONFIG_FREE_COMMANDS = ("version", "env-help")


@dataclass
class RunContext:
    """Settings shared by every subcommand of one invocation."""

    config: Config
    seed: int
    seed_override: Optional[int]
    threads: int
    audit: Optional[AuditLogger]

    def resolve_seed(self, own_seed: int) -> int:
        """A JSON config's own seed unless --seed was passed."""
        return own_seed if self.seed_override is None else self.seed_override

    @contextmanager
    def audited(self, command: str, settings: Dict[str, Any]) -> Iterator[List[str]]:
        """Audit-log start, completion or failure; yields the output list."""
        start = time.time()
        outputs: List[str] = []
        if self.audit:
            self.audit.log_run_start(command, self.seed, config_hash(settings))
        try:
            yield outputs
        except Exception as e:
            if self.audit:
                self.audit.log_run_error(command, str(e))
            raise
        if self.audit:
            self.audit.log_run_complete(command, outputs, time.time() - start)


def _truncate(text: str, max_length: int) -> str:
    return text if len(text) <= max_length else text[:max_length] + "..."


def _fmt(cell: str) -> str:
    """Shorten float cells for console display."""
    text = str(cell)
    try:
        value = float(text)
    except ValueError:
        return text
    if text.lstrip("-").isdigit():
        return text
    return f"{value:.4g}"


def display_rows(title: str, rows: Sequence[Sequence[str]]) -> None:
    """Render a header-first row list as a rich table."""
    table = Table(title=title, show_header=True, header_style="bold blue")
    for i, name in enumerate(rows[0]):
        table.add_column(str(name), style="cyan" if i == 0 else "white")
    for row in rows[1:]:
        table.add_row(*[_fmt(c) for c in row])
    console.print(table)


def _default_out(run: RunContext, out: Optional[Path], name: str) -> Path:
    if out is not None:
        return out
    ensure_directories(run.config)
    return Path(run.config.default_output_dir) / name


def _log_fit(run: RunContext, estimator: str, params: ModelParams, lam: float) -> None:
    if run.audit:
        run.audit.log_fit(estimator, params.rank, lam, params.iterations, params.converged, params.objective)


@click.group()
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Run seed (overrides HIRRR_SEED)")
@click.option(
    "--threads",
    type=click.IntRange(min=1),
    default=None,
    help="Worker threads for grid cells and replicates (overrides HIRRR_THREADS)",
)
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
@click.option(
    "--env-file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Path to .env configuration file",
)
@click.pass_context
def cli(ctx: click.Context, seed: Optional[int], threads: Optional[int], verbose: bool, env_file: Optional[Path]):
    """HiRRR: reduced-rank regression with surrogate outcomes and single-record data.

    \b
    🔧 COMMON ENVIRONMENT VARIABLES:
    • HIRRR_THREADS      - Worker threads (--threads wins)
    • HIRRR_SEED         - Run seed (--seed wins)
    • LOG_LEVEL          - Logging verbosity (DEBUG, INFO, WARNING)

    \b
    💡 Configuration: Use 'env-help' command for complete documentation
    """
    if ctx.invoked_subcommand in _CONFIG_FREE_COMMANDS:
        return
    config = load_config(str(env_file) if env_file else None)
    setup_logging(config.log_file, "DEBUG" if verbose else config.log_level)
    audit = AuditLogger(config.audit_log_file) if config.enable_audit_logging else None
    ctx.obj = RunContext(
        config=config,
        seed=config.seed if seed is None else seed,
        seed_override=seed,
        threads=config.threads if threads is None else threads,
        audit=audit,
    )
    logger.debug(f"Run context: seed={ctx.obj.seed}, threads={ctx.obj.threads}")


@cli.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--reps", type=click.IntRange(min=1), required=True, help="Number of replicates")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True, help="Output directory")
@click.option(
    "--models",
    "models_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="JSON list of competitor models (default: glm, rrr, hirrr at the true rank)",
)
@click.option("--n1-grid", help="Comma-separated n1 values for the scaling experiment")
@click.option("--lambda", "lam", type=click.FloatRange(0.0, 1.0), default=1.0, help="Lambda for the n1 scaling runs")
@click.pass_obj
def simulate(
    run: RunContext,
    spec_path: Path,
    reps: int,
    out: Path,
    models_path: Optional[Path],
    n1_grid: Optional[str],
    lam: float,
):
    """Run simulation replicates and write trimmed-mean metric tables.

    \b
    Outputs in --out:
    • metrics.csv      - metric, <model>_mean, <model>_sd, <model>_se rows
    • replicates.csv   - one row per model and replicate
    • n1_scaling.csv   - n1, median_er_v, normalized (with --n1-grid)
    • manifest.json
    """
    spec = load_json_model(spec_path, ScenarioSpec)
    spec = spec.model_copy(update={"seed": run.resolve_seed(spec.seed)})
    if models_path:
        models = load_model_specs(models_path)
    else:
        models = [
            ModelSpec(name="glm", estimator="glm"),
            ModelSpec(name="rrr", estimator="rrr", rank=spec.r, lambda_=0.0),
            ModelSpec(name="hirrr", estimator="hirrr", rank=spec.r, lambda_=1.0),
        ]
    try:
        grid = [int(v) for v in n1_grid.split(",")] if n1_grid else []
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated integers, got {n1_grid!r}", param_hint="--n1-grid") from e
    settings = {
        "spec": spec.model_dump(mode="json"),
        "models": [m.model_dump(mode="json", by_alias=True) for m in models],
        "reps": reps,
        "n1_grid": grid,
        "lambda": lam,
        "trim": run.config.trim,
    }

    with run.audited("simulate", settings) as outputs:
        with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"), console=console) as progress:
            task = progress.add_task(f"Running {reps} replicates of {len(models)} models...", total=None)
            result = run_replications(spec, models, reps, run.threads)
            progress.update(task, description="Replicates complete")

        table = result.table(run.config.trim)
        outputs.append(str(write_csv(out / "metrics.csv", table)))
        rows: List[List[str]] = [["model", "rep", "status"] + MetricsReport.columns()]
        for name in result.models:
            for rep, report in enumerate(result.reports[name]):
                if report is None:
                    rows.append([name, str(rep), "failed"] + [""] * len(MetricsReport.columns()))
                else:
                    rows.append([name, str(rep), "ok"] + report.to_row())
        outputs.append(str(write_csv(out / "replicates.csv", rows)))

        if grid:
            scaling = n1_scaling_experiment(spec, grid, reps, lam, run.threads)
            outputs.append(
                str(
                    write_csv(
                        out / "n1_scaling.csv",
                        [["n1", "median_er_v", "normalized"]] + [[str(a), repr(b), repr(c)] for a, b, c in scaling],
                    )
                )
            )
        outputs.append(str(write_manifest(out, "simulate", spec.seed, settings)))

    display_rows(f"Simulation ({spec.scenario.value}, {reps} reps)", table)
    console.print(f"[green]✅ Wrote {len(outputs)} files to {out}[/green]")


@cli.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--model", "estimator", type=click.Choice(EstimatorFactory.available()), required=True)
@click.option("--rank", type=click.IntRange(min=1), default=None, help="Reduced rank (rrr, hirrr)")
@click.option("--lambda", "lam", type=click.FloatRange(0.0, 1.0), default=1.0, help="Single-record weight")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True, help="Output JSON file")
@click.option("--solver", type=click.Choice(["auto", "closed_form", "binary", "general"]), default="auto")
@click.option("--max-iters", type=click.IntRange(min=0), default=None, help="Iteration cap (default HIRRR_MAX_ITERS)")
@click.option("--tolerance", type=click.FloatRange(min=0.0, min_open=True), default=None)
@click.option("--dispersion", type=click.Choice(["column", "pooled"]), default="column")
@click.pass_obj
def fit(
    run: RunContext,
    data_path: Path,
    estimator: str,
    rank: Optional[int],
    lam: float,
    out: Path,
    solver: str,
    max_iters: Optional[int],
    tolerance: Optional[float],
    dispersion: str,
):
    """Fit one model to a dataset JSON and write its parameters."""
    if estimator in ("rrr", "hirrr") and rank is None:
        raise click.UsageError(f"--rank is required for --model {estimator}")
    spec = ModelSpec(
        name=estimator,
        estimator=estimator,
        rank=rank,
        lambda_=lam,
        solver=solver,
        max_iters=run.config.max_iters if max_iters is None else max_iters,
        tolerance=run.config.tolerance if tolerance is None else tolerance,
        dispersion=dispersion,
    )
    settings = {"data": data_path.name, "model": spec.model_dump(mode="json", by_alias=True)}

    with run.audited("fit", settings) as outputs:
        ds = Dataset.load(data_path)
        params = fit_model(spec, ds, seed=run.seed, threads=run.threads)
        _log_fit(run, estimator, params, lam)
        out.parent.mkdir(parents=True, exist_ok=True)
        params.save(out)
        outputs.append(str(out))
        outputs.append(str(write_manifest(out.parent, "fit", run.seed, settings)))

    summary = Table(title="Fit summary", show_header=False)
    summary.add_column("Field", style="cyan")
    summary.add_column("Value", style="white")
    summary.add_row("Model", estimator)
    summary.add_row("Data", f"n={ds.n}, n1={ds.n1}, p={ds.p}, q={ds.q}")
    summary.add_row("Rank", str(params.rank))
    summary.add_row("Lambda", f"{lam:g}")
    summary.add_row("Iterations", str(params.iterations))
    if params.objective is not None:
        summary.add_row("Objective", f"{params.objective:.6g}")
    console.print(summary)
    if not params.converged:
        console.print("[yellow]⚠️ Fit did not converge; parameters are the last iterate[/yellow]")
    console.print(f"[green]✅ Parameters written to {out}[/green]")


@cli.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--grid", "grid_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--model", "estimator", type=click.Choice(["hirrr", "rrr"]), default="hirrr")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), help="Output directory")
@click.pass_obj
def cv(run: RunContext, data_path: Path, grid_path: Path, estimator: str, out: Optional[Path]):
    """Cross-validate a (rank, lambda) grid.

    \b
    Outputs: cv_scores.csv (rank, lambda, fold, score), cv_best.json, manifest.json
    """
    grid = load_json_model(grid_path, CvGrid)
    grid = grid.model_copy(update={"seed": run.resolve_seed(grid.seed)})
    if estimator == "rrr":
        grid = grid.model_copy(update={"lambdas": [0.0]})
    out = _default_out(run, out, "cv")
    settings = {
        "data": data_path.name,
        "grid": grid.model_dump(mode="json"),
        "model": estimator,
        "max_iters": run.config.max_iters,
        "tolerance": run.config.tolerance,
    }

    with run.audited("cv", settings) as outputs:
        ds = Dataset.load(data_path)
        base = ModelSpec(
            name=estimator,
            estimator=estimator,
            rank=1,
            max_iters=run.config.max_iters,
            tolerance=run.config.tolerance,
        ).to_fit_config(seed=grid.seed)
        result = cross_validate(ds, grid, estimator, base, run.threads)
        outputs.append(str(write_csv(out / "cv_scores.csv", [["rank", "lambda", "fold", "score"]] + result.rows())))
        best = {
            "best_rank": result.best_rank,
            "best_lambda": result.best_lambda,
            "criterion": result.criterion.value,
            "cells": [
                {"rank": r, "lambda": lam, "mean_score": score}
                for (r, lam), score in sorted(result.cell_means.items())
            ],
        }
        outputs.append(str(write_json(out / "cv_best.json", best)))
        outputs.append(str(write_manifest(out, "cv", grid.seed, settings)))

    rows = [["rank", "lambda", "mean_score"]] + [
        [str(r), repr(lam), repr(score)] for (r, lam), score in sorted(result.cell_means.items())
    ]
    display_rows(f"Cross-validation ({result.criterion.value})", rows)
    console.print(
        Panel(
            f"[bold]rank = {result.best_rank}, lambda = {result.best_lambda:g}[/bold]",
            title="Selected cell",
            border_style="green",
        )
    )


@cli.command()
@click.option("--records", "records_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True, help="Output directory")
@click.pass_obj
def cohort(run: RunContext, records_path: Path, config_path: Optional[Path], out: Path):
    """Build a matched case-control cohort dataset from an encounter CSV.

    \b
    Outputs: dataset.json, cohort.json (names and patient ids), manifest.json
    """
    cfg = load_json_model(config_path, CohortConfig) if config_path else CohortConfig()
    cfg = cfg.model_copy(update={"seed": run.resolve_seed(cfg.seed)})
    settings = {"records": records_path.name, "cohort": cfg.model_dump(mode="json")}

    with run.audited("cohort", settings) as outputs:
        records = load_encounters(records_path)
        built = build_cohort(records, cfg)
        ds = build_dataset(built, cfg)
        out.mkdir(parents=True, exist_ok=True)
        ds.save(out / "dataset.json")
        outputs.append(str(out / "dataset.json"))
        names = {
            "feature_names": ds.feature_names,
            "outcome_names": ds.outcome_names,
            "multi_patients": [p.patient_id for p in built.multi],
            "single_patients": [p.patient_id for p in built.single],
            "flagged_cases": built.flagged,
            "excluded_patients": built.excluded,
        }
        outputs.append(str(write_json(out / "cohort.json", names)))
        outputs.append(str(write_manifest(out, "cohort", cfg.seed, settings)))
        if run.audit:
            run.audit.log_summary("cohort", {"n": ds.n, "n1": ds.n1, "p": ds.p, "q": ds.q})

    summary = Table(title="Cohort", show_header=True, header_style="bold blue")
    summary.add_column("Group", style="cyan")
    summary.add_column("Patients", style="white")
    summary.add_row("Multi-record (matched)", str(ds.n))
    summary.add_row("Cases", str(int(ds.Y[:, 0].sum())))
    summary.add_row("Single-record", str(ds.n1))
    summary.add_row("Features", str(ds.p))
    summary.add_row("Outcomes", ", ".join(ds.outcome_names))
    console.print(summary)
    if built.flagged:
        console.print(f"[yellow]⚠️ {len(built.flagged)} cases matched fewer controls than requested[/yellow]")


@cli.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--models", "models_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), help="Output directory")
@click.option(
    "--fits-dir",
    type=click.Path(file_okay=False, path_type=Path),
    help="Write every repeat's fitted parameters here",
)
@click.pass_obj
def splits(
    run: RunContext,
    data_path: Path,
    plan_path: Path,
    models_path: Path,
    out: Optional[Path],
    fits_dir: Optional[Path],
):
    """Repeated stratified train/test evaluation of several models.

    \b
    Outputs: split_metrics.csv, split_summary.csv, manifest.json
    """
    plan = load_json_model(plan_path, SplitPlan)
    plan = plan.model_copy(update={"seed": run.resolve_seed(plan.seed)})
    models = load_model_specs(models_path)
    out = _default_out(run, out, "splits")
    settings = {
        "data": data_path.name,
        "plan": plan.model_dump(mode="json"),
        "models": [m.model_dump(mode="json", by_alias=True) for m in models],
    }

    with run.audited("splits", settings) as outputs:
        ds = Dataset.load(data_path)
        with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"), console=console) as progress:
            task = progress.add_task(f"Evaluating {len(models)} models over {plan.repeats} splits...", total=None)
            evaluation = run_random_splits(ds, plan, models, run.threads)
            progress.update(task, description="Splits complete")

        flagged = set(evaluation.flags)
        rows: List[List[str]] = [["model", "repeat", "flagged"] + MetricsReport.columns()]
        for name, reports in evaluation.reports.items():
            for rep, report in enumerate(reports):
                rows.append([name, str(rep), str(int(rep in flagged))] + report.to_row())
        outputs.append(str(write_csv(out / "split_metrics.csv", rows)))

        summary = evaluation.summary()
        summary_rows = [["model", "metric", "mean", "sd"]]
        for name, metrics in summary.items():
            for metric, (mean, sd) in metrics.items():
                summary_rows.append([name, metric, repr(mean), repr(sd)])
        outputs.append(str(write_csv(out / "split_summary.csv", summary_rows)))

        if fits_dir is not None:
            for name, fits in evaluation.fits.items():
                for rep, params in enumerate(fits):
                    if params is None:
                        continue
                    path = fits_dir / f"{name}_rep{rep:03d}.json"
                    path.parent.mkdir(parents=True, exist_ok=True)
                    params.save(path)
                    outputs.append(str(path))
        outputs.append(str(write_manifest(out, "splits", plan.seed, settings)))

    display_rows(f"Split evaluation ({plan.repeats} repeats)", summary_rows)
    if flagged:
        console.print(f"[yellow]⚠️ Flagged repeats (single-class test split): {sorted(flagged)}[/yellow]")


@cli.group()
def report():
    """Risk-factor and unique-case tables from fitted models."""
    pass


def _feature_names(ds: Dataset) -> List[str]:
    return ds.feature_names or [f"x{j + 1}" for j in range(ds.p)]


@report.command("factors")
@click.option(
    "--fits",
    "fit_paths",
    multiple=True,
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Fitted parameter files (repeatable)",
)
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--direction", type=click.Choice([d.value for d in FactorDirection]), default="risk")
@click.option("--top-k", type=click.IntRange(min=1), default=20)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True, help="Output CSV")
@click.pass_obj
def report_factors(
    run: RunContext, fit_paths: Sequence[Path], data_path: Path, direction: str, top_k: int, out: Path
):
    """Rank features by standardized primary-outcome coefficient across fits."""
    settings = {
        "fits": [p.name for p in fit_paths],
        "data": data_path.name,
        "direction": direction,
        "top_k": top_k,
    }
    with run.audited("report factors", settings) as outputs:
        ds = Dataset.load(data_path)
        fits = [ModelParams.load(p) for p in fit_paths]
        feature_sd = ds.X.std(axis=0, ddof=1) if ds.n > 1 else np.zeros(ds.p)
        binary = ds.families[0] is Family.BERNOULLI
        rows = rank_factors(
            fits,
            feature_sd,
            FactorDirection(direction),
            top_k,
            _feature_names(ds),
            X=ds.X if binary else None,
            labels=ds.Y[:, 0] if binary else None,
        )
        table = factor_table_rows(rows)
        outputs.append(str(write_csv(out, table)))
        outputs.append(str(write_manifest(out.parent, "report factors", run.seed, settings)))

    display_rows(f"Top {len(rows)} {direction} factors", table)


@report.command("unique-cases")
@click.option("--fit-a", "fit_a", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--fit-b", "fit_b", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--top-fraction", type=click.FloatRange(0.0, 1.0, min_open=True), default=0.10)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True, help="Output CSV")
@click.pass_obj
def report_unique_cases(
    run: RunContext, fit_a: Path, fit_b: Path, data_path: Path, top_fraction: float, out: Path
):
    """Compare exposures of cases flagged by both models versus only model B."""
    settings = {
        "fit_a": fit_a.name,
        "fit_b": fit_b.name,
        "data": data_path.name,
        "top_fraction": top_fraction,
    }
    with run.audited("report unique-cases", settings) as outputs:
        ds = Dataset.load(data_path)
        params_a, params_b = ModelParams.load(fit_a), ModelParams.load(fit_b)
        scores_a = predict(params_a, ds.X, ds.families, ds.q0).primary_scores[:, 0]
        scores_b = predict(params_b, ds.X, ds.families, ds.q0).primary_scores[:, 0]
        binary = np.flatnonzero(np.all((ds.X == 0) | (ds.X == 1), axis=0))
        names = _feature_names(ds)
        result = compare_unique_cases(
            scores_a,
            scores_b,
            ds.Y[:, 0],
            ds.X[:, binary],
            [names[j] for j in binary],
            top_fraction,
        )
        outputs.append(str(write_csv(out, unique_case_table_rows(result))))
        outputs.append(str(write_manifest(out.parent, "report unique-cases", run.seed, settings)))

    console.print(f"[bold]Cases flagged by both:[/bold] {result.n_both}")
    console.print(f"[bold]Cases flagged only by B:[/bold] {result.n_only_b}")
    if result.empty:
        console.print("[yellow]⚠️ One group is empty; the table has no rows[/yellow]")
    else:
        display_rows("Unique-case exposures", unique_case_table_rows(result)[:11])


@cli.command("synth-registry")
@click.option("--patients", type=click.IntRange(min=1), required=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True, help="Output CSV")
@click.option("--single-fraction", type=click.FloatRange(0.0, 1.0), default=0.5)
@click.pass_obj
def synth_registry(run: RunContext, patients: int, out: Path, single_fraction: float):
    """Write a synthetic encounter registry CSV with planted structure."""
    settings = {"patients": patients, "single_fraction": single_fraction}
    with run.audited("synth-registry", settings) as outputs:
        records = generate_registry(patients, seed=run.seed, single_fraction=single_fraction)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_encounters(records, out)
        outputs.append(str(out))
        outputs.append(str(write_manifest(out.parent, "synth-registry", run.seed, settings)))
    console.print(f"[green]✅ Wrote {len(records)} encounters for {patients} patients to {out}[/green]")


@cli.command()
def version():
    """Display version information."""
    console.print()
    console.print("[bold blue]HiRRR[/bold blue]")
    console.print("[dim]Version Information[/dim]")
    console.print()
    console.print(f"[bold]Version:[/bold] {__version__}")
    console.print("[bold]License:[/bold] MIT")
    console.print(f"[bold]Estimators:[/bold] {', '.join(EstimatorFactory.available())}")
    console.print()
    console.print("[dim]Reduced-rank regression of a primary outcome jointly with[/dim]")
    console.print("[dim]surrogate outcomes and single-record data.[/dim]")
    console.print()


@cli.command("env-help")
@click.option(
    "--category",
    type=click.Choice(ENV_HELP_CATEGORY_CHOICES),
    default="all",
    help="Show environment variables for specific category",
)
def env_help(category: str):
    """Display environment variable documentation for the CLI."""
    console.print("\n[bold blue]📚 Environment Variable Documentation[/bold blue]")
    console.print("=" * 60)

    if category != "all":
        category_info = ENV_CATEGORIES[category]
        console.print(f"\n[bold cyan]{category_info['title']}[/bold cyan]")
        console.print(f"[dim]{category_info['description']}[/dim]\n")
        categories_to_show = {category: category_info}
    else:
        console.print("\n[green]💡 Use --category <name> to filter by specific category[/green]")
        console.print(f"[dim]Available categories: {', '.join(ENV_CATEGORIES.keys())}[/dim]\n")
        categories_to_show = ENV_CATEGORIES

    last_category = next(reversed(categories_to_show), None)
    for cat_name, cat_info in categories_to_show.items():
        if category == "all":
            console.print(f"\n[bold cyan]{cat_info['title']}[/bold cyan]")
            console.print(f"[dim]{cat_info['description']}[/dim]")

        table = Table(show_header=True, header_style="bold blue")
        table.add_column("Variable", style="cyan", width=25)
        table.add_column("Description", style="white", width=40)
        table.add_column("Default", style="green", width=20)
        table.add_column("Required", style="yellow", width=15)

        for var_name, var_info in cat_info["variables"].items():
            if var_info["required"] is True:
                required_text = "[red]Yes[/red]"
            elif var_info["required"] is False:
                required_text = "[green]No[/green]"
            else:
                required_text = f"[yellow]{var_info['required']}[/yellow]"
            table.add_row(
                var_name,
                _truncate(var_info["description"], ENV_HELP_DESCRIPTION_MAX_LENGTH),
                _truncate(var_info["default"], ENV_HELP_DEFAULT_MAX_LENGTH),
                required_text,
            )
        console.print(table)
        if category == "all" and cat_name != last_category:
            console.print()

    console.print("\n[bold blue]📋 Configuration Notes[/bold blue]")
    console.print("• Put variables in a .env file or pass --env-file to the hirrr group")
    console.print("• Command-line flags (--seed, --threads) win over environment values")
    console.print("• Thread count never changes results, only wall time")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Console entry point.

    Returns:
        0 on success, 1 on a usage error, 2 on a data or convergence error
    """
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="hirrr", standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return 1
    except click.ClickException as e:
        e.show()
        return 2
    except click.Abort:
        console.print("[yellow]Aborted[/yellow]")
        return 1
    except (HirrrError, OSError, ValueError) as e:
        logger.error(f"Command failed: {e}")
        console.print(f"[red]❌ Error: {e}[/red]")
        return 2
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())

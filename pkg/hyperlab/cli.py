"""Typer CLI for the hyperlab rigidity laboratory."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Optional

import typer
import yaml
from pydantic import ValidationError

from hyperlab.config.settings import get_settings
from hyperlab.dynamics.errors import MatrixFormatError
from hyperlab.models.documents import ExperimentConfig, MapDocument
from hyperlab.models.report import Report
from hyperlab.reporting.renderer import render_report
from hyperlab.reporting.writer import write_report
from hyperlab.runner import run_experiment

logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
LOGGER = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_NUMERIC = 2

app = typer.Typer(help="hyperlab: Lyapunov-exponent rigidity experiments on torus maps")

KIND_HELP = {
    "spectrum": "Spectral analysis of an integer matrix.",
    "exponents": "Volume-averaged Lyapunov exponents and invariant splitting.",
    "conjugacy": "Conjugacy with the linear model and periodic data.",
    "gibbs": "Leaf tracing and Gibbs density along an expanding foliation.",
    "entropy": "Conditional entropy, Pesin check and the periodic-orbit control.",
    "skew": "Skew product over T^2: center exponent, partial entropy gap, center holonomy.",
    "katok": "Katok suspension: center holonomy and unique-intersection indicator.",
    "full-rigidity": "Exponents, conjugacy, B2-B5' diagnostics and periodic data.",
}


def _parse_shear(text: str) -> dict[str, Any]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise typer.BadParameter("shear must be 'direction,driver,amplitude'")
    return {"direction": int(parts[0]), "driver": int(parts[1]), "amplitude": float(parts[2])}


def load_config(
    kind: str,
    config: Optional[Path],
    matrix: Optional[str],
    map_kind: Optional[str],
    shears: list[str],
    seed: Optional[int],
    workers: Optional[int],
    out_dir: Optional[Path],
) -> ExperimentConfig:
    """Merge a YAML/JSON config file with command-line overrides."""
    raw: dict[str, Any] = {}
    if config is not None:
        raw = yaml.safe_load(config.read_text(encoding="utf-8")) or {}
    raw["kind"] = kind
    document = dict(raw.get("map") or {})
    if matrix is not None:
        document["matrix"] = matrix
    if shears:
        document["shears"] = [_parse_shear(s) for s in shears]
        document.setdefault("kind", "perturbation")
    if map_kind is not None:
        document["kind"] = map_kind
    raw["map"] = document
    if seed is not None:
        raw["seed"] = seed
    if workers is not None:
        raw["workers"] = workers
    if out_dir is not None:
        raw["output_dir"] = str(out_dir)
    return ExperimentConfig.model_validate(raw)


def execute(
    kind: str,
    config: Optional[Path] = None,
    matrix: Optional[str] = None,
    map_kind: Optional[str] = None,
    shears: Optional[list[str]] = None,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    out_dir: Optional[Path] = None,
    verbose: bool = False,
    no_cache: bool = False,
) -> Report:
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        experiment = load_config(kind, config, matrix, map_kind, shears or [], seed, workers, out_dir)
    except (ValidationError, MatrixFormatError, OSError, yaml.YAMLError) as exc:
        typer.echo(f"config error: {exc}", err=True)
        raise typer.Exit(code=EXIT_CONFIG)
    settings = get_settings()
    report = run_experiment(experiment, use_cache=not no_cache, settings=settings)
    target = experiment.output_dir or settings.output_dir / f"{kind}-{report.input_hash[:12]}"
    path = write_report(report, target)
    typer.echo(render_report(report))
    typer.echo(f"Wrote report to {path}")
    if report.failed:
        raise typer.Exit(code=EXIT_NUMERIC)
    return report


def _register(kind: str) -> None:
    def command(
        config: Optional[Path] = typer.Option(None, "--config", help="YAML or JSON experiment file"),
        matrix: Optional[str] = typer.Option(None, "--matrix", help='Integer matrix, e.g. "2,1;1,1"'),
        map_kind: Optional[str] = typer.Option(None, "--map-kind", help="linear | perturbation | conjugated | skew | katok"),
        shear: Optional[list[str]] = typer.Option(None, "--shear", help="direction,driver,amplitude (repeatable)"),
        seed: Optional[int] = typer.Option(None, "--seed"),
        workers: Optional[int] = typer.Option(None, "--workers", help="Worker processes (or HYPERLAB_WORKERS)"),
        out_dir: Optional[Path] = typer.Option(None, "--out-dir"),
        verbose: bool = typer.Option(False, "--verbose"),
        no_cache: bool = typer.Option(False, "--no-cache"),
    ) -> None:
        execute(kind, config, matrix, map_kind, shear, seed, workers, out_dir, verbose, no_cache)

    command.__doc__ = KIND_HELP[kind]
    app.command(kind)(command)


for _kind in KIND_HELP:
    _register(_kind)


@app.command("schema")
def schema(out_dir: str = typer.Option("hyperlab/schemas", "--out-dir")) -> None:
    """Export JSON schemas for configs, map documents and reports."""
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    files = {
        "ExperimentConfig.schema.json": ExperimentConfig.model_json_schema(),
        "MapDocument.schema.json": MapDocument.model_json_schema(),
        "Report.schema.json": Report.model_json_schema(),
    }
    for name, payload in files.items():
        (target / name).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    typer.echo(f"Wrote {len(files)} schema files to {target}")

"""Command-line front end.

``oamlens run`` executes a config in-process by default (required for the
determinism and file-output guarantees); ``--server`` switches it into a
thin client that posts the same config to a running service. ``oamlens
serve`` starts that service. Exit codes: 0 success, 2 configuration error
(message names the offending field), 3 numerical failure.
"""

from __future__ import annotations

import filecmp
import json
import shutil
import sys
from pathlib import Path

import click

from .core import ConfigurationError, DomainError, NumericalError
from .experiments import config_json_schema, load_config, run
from .service import list_recipes, recipe_text

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


@click.group()
def main() -> None:
    """Simulations of orbital-angular-momentum dependent magnetic lensing."""


def _fail_config(message: str) -> None:
    click.echo(f"configuration error: {message}", err=True)
    sys.exit(EXIT_CONFIG)


def _fail_numerical(message: str) -> None:
    click.echo(f"numerical error: {message}", err=True)
    sys.exit(EXIT_NUMERICAL)


def _summarize(report, out_dir: Path) -> None:
    click.echo(f"kind: {report.kind}")
    if report.title:
        click.echo(f"title: {report.title}")
    for name, rows in report.tables.items():
        click.echo(f"table {name}: {len(rows)} rows")
    for note in report.notes:
        click.echo(f"note: {note}")
    click.echo(f"files: {len(report.files)} (+ report.json) in {out_dir}")


@main.command(name="run")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Experiment config JSON.")
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False, path_type=Path),
              help="Output directory for files and report.json.")
@click.option("--threads", default=1, show_default=True,
              type=click.IntRange(1, 64),
              help="Worker threads for per-m wave propagation.")
@click.option("--seed-check", is_flag=True,
              help="Run the config twice and verify byte-identical outputs.")
@click.option("--server", default=None, metavar="URL",
              help="Post the config to a running service instead of "
                   "executing locally (files then stay on the server).")
def run_command(config_path: Path, out_dir: Path, threads: int,
                seed_check: bool, server: str) -> None:
    """Execute one experiment config."""
    if server is not None:
        _run_remote(config_path, out_dir, threads, server)
        return
    try:
        config = load_config(config_path)
    except ConfigurationError as exc:
        _fail_config(str(exc))
    base_dir = config_path.parent
    try:
        report = run(config, out_dir, threads=threads, base_dir=base_dir)
    except ConfigurationError as exc:
        _fail_config(str(exc))
    except DomainError as exc:
        _fail_config(str(exc))
    except NumericalError as exc:
        _fail_numerical(str(exc))
    if seed_check:
        twin = out_dir / ".seed_check"
        if twin.exists():
            shutil.rmtree(twin)
        run(config, twin, threads=threads, base_dir=base_dir)
        mismatches = _compare_runs(out_dir, twin)
        shutil.rmtree(twin)
        if mismatches:
            _fail_numerical("seed check failed, outputs differ: "
                            + ", ".join(mismatches))
        click.echo("seed check: outputs byte-identical across two runs")
    _summarize(report, out_dir)


def _compare_runs(a: Path, b: Path) -> list:
    names = sorted(p.name for p in a.iterdir()
                   if p.is_file())
    mismatches = []
    for name in names:
        other = b / name
        if not other.exists() or not filecmp.cmp(a / name, other, shallow=False):
            mismatches.append(name)
    return mismatches


def _run_remote(config_path: Path, out_dir: Path, threads: int, server: str) -> None:
    import httpx

    try:
        raw = json.loads(config_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        _fail_config(f"cannot read config {config_path}: {exc}")
    try:
        response = httpx.post(server.rstrip("/") + "/run",
                              json={"config": raw, "threads": threads},
                              timeout=600.0)
    except httpx.HTTPError as exc:
        _fail_numerical(f"service unreachable: {exc}")
    if response.status_code == 200:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(
            json.dumps(response.json(), indent=2, sort_keys=True) + "\n")
        click.echo(f"remote run complete; report saved to {out_dir}/report.json "
                   "(data files remain on the server)")
        return
    if response.status_code == 422:
        _fail_config(_remote_detail(response))
    _fail_numerical(_remote_detail(response))


def _remote_detail(response) -> str:
    try:
        detail = response.json().get("detail")
    except json.JSONDecodeError:
        detail = response.text
    return f"HTTP {response.status_code}: {detail}"


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--output-root", default=None,
              type=click.Path(file_okay=False, path_type=Path),
              help="Directory for run outputs (default ./oamlens_runs).")
def serve(host: str, port: int, output_root: Path) -> None:
    """Start the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(str(output_root) if output_root else None),
                host=host, port=port)


@main.command()
@click.option("--show", "show_name", default=None, metavar="NAME",
              help="Print one recipe to stdout.")
@click.option("--copy-to", "copy_dir", default=None,
              type=click.Path(file_okay=False, path_type=Path),
              help="Copy all recipes into a directory.")
def recipes(show_name: str, copy_dir: Path) -> None:
    """List, show, or export the bundled experiment recipes."""
    if show_name is not None:
        try:
            click.echo(recipe_text(show_name), nl=False)
        except KeyError:
            _fail_config(f"no recipe named {show_name!r}")
        return
    if copy_dir is not None:
        copy_dir.mkdir(parents=True, exist_ok=True)
        for name in list_recipes():
            (copy_dir / name).write_text(recipe_text(name))
        click.echo(f"copied {len(list_recipes())} recipes to {copy_dir}")
        return
    for name in list_recipes():
        click.echo(name)


@main.command()
def schema() -> None:
    """Print the experiment config JSON schema."""
    click.echo(json.dumps(config_json_schema(), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()

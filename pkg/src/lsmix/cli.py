from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Callable, Optional

import typer

from lsmix.core.errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    InvalidParameterError,
    LsmixError,
    NumericalError,
    SiteError,
)
from lsmix.core.runlog import to_json
from lsmix import tools

app = typer.Typer(add_completion=False, help="Gaussian location-scale mixture processes for spatial extremes.")

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

ConfigOpt = typer.Option(None, "--config", "-c", help="Run-config file (key = value lines).")
SeedOpt = typer.Option(None, "--seed", help="Master seed; overrides the config's `seed`.")
WorkersOpt = typer.Option(None, "--workers", help="Worker threads (default: $LSMIX_WORKERS or 1).")
OutOpt = typer.Option(Path("."), "--out", "-o", help="Output directory.")
SetOpt = typer.Option(None, "--set", help="Extra config entry KEY=VALUE; repeatable.")
LogOpt = typer.Option("WARNING", "--log-level", help="Logging level on stderr.")


def exit_code(err: BaseException) -> int:
    """Exit status for an error escaping a command."""
    if isinstance(err, ConfigError):
        return EXIT_USAGE
    if isinstance(err, (DataError, SiteError, OSError)):
        return EXIT_DATA
    if isinstance(err, (NumericalError, ConvergenceError)):
        return EXIT_NUMERICAL
    if isinstance(err, InvalidParameterError):
        return EXIT_USAGE
    return 1


def _overrides(pairs: list[str] | None) -> dict[str, str]:
    out: dict[str, str] = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError("--set expects KEY=VALUE", context={"value": item})
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _run(
    fn: Callable[..., dict[str, Any]],
    config: Optional[Path],
    seed: Optional[int],
    workers: Optional[int],
    out: Path,
    sets: list[str] | None,
    log_level: str,
) -> None:
    logging.basicConfig(
        level=getattr(logging, log_level.upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        payload = fn(config, seed=seed, workers=workers, out=out, overrides=_overrides(sets))
    except (LsmixError, OSError) as e:
        typer.echo(f"error: {e}", err=True)
        raise typer.Exit(code=exit_code(e)) from e
    typer.echo(to_json(payload))


@app.command()
def simulate(
    config: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
    workers: Optional[int] = WorkersOpt,
    out: Path = OutOpt,
    sets: Optional[list[str]] = SetOpt,
    log_level: str = LogOpt,
) -> None:
    """Simulate sites and replications; writes sites.csv and data.csv."""
    _run(tools.simulate, config, seed, workers, out, sets, log_level)


@app.command()
def fit(
    config: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
    workers: Optional[int] = WorkersOpt,
    out: Path = OutOpt,
    sets: Optional[list[str]] = SetOpt,
    log_level: str = LogOpt,
) -> None:
    """Two-step or copula fit; writes fit.json."""
    _run(tools.fit, config, seed, workers, out, sets, log_level)


@app.command()
def condsim(
    config: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
    workers: Optional[int] = WorkersOpt,
    out: Path = OutOpt,
    sets: Optional[list[str]] = SetOpt,
    log_level: str = LogOpt,
) -> None:
    """Conditional simulation; writes draws.csv and medians.csv."""
    _run(tools.condsim, config, seed, workers, out, sets, log_level)


@app.command()
def chi(
    config: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
    workers: Optional[int] = WorkersOpt,
    out: Path = OutOpt,
    sets: Optional[list[str]] = SetOpt,
    log_level: str = LogOpt,
) -> None:
    """Chi by distance class; writes chi.csv (and chi_model.csv)."""
    _run(tools.chi, config, seed, workers, out, sets, log_level)


@app.command()
def bootstrap(
    config: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
    workers: Optional[int] = WorkersOpt,
    out: Path = OutOpt,
    sets: Optional[list[str]] = SetOpt,
    log_level: str = LogOpt,
) -> None:
    """Parametric bootstrap intervals; writes intervals.csv."""
    _run(tools.bootstrap, config, seed, workers, out, sets, log_level)


@app.command("marginal-fit")
def marginal_fit(
    config: Optional[Path] = ConfigOpt,
    seed: Optional[int] = SeedOpt,
    workers: Optional[int] = WorkersOpt,
    out: Path = OutOpt,
    sets: Optional[list[str]] = SetOpt,
    log_level: str = LogOpt,
) -> None:
    """Per-site EGPD fits; writes marginal.csv and uniform.csv."""
    _run(tools.marginal_fit, config, seed, workers, out, sets, log_level)


def main() -> None:
    app()


if __name__ == "__main__":
    main()

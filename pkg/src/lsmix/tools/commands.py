from __future__ import annotations

import math
from pathlib import Path
from typing import Any

import numpy as np

from ..core.errors import ConfigError, DataError
from ..core.limits import MC_TABLE_SIZE
from ..core.runlog import write_json_atomic
from ..core.tables import read_matrix, read_sites, write_egpd_table, write_matrix, write_records, write_sites
from ..stats.bootstrap import BootstrapConfig, bootstrap_ci
from ..stats.condsim import CondSimConfig, conditional_predict, conditional_simulate
from ..stats.correlation import SiteSet
from ..stats.estimate import FitResult, fit_copula, fit_two_step
from ..stats.marginal import egpd_fit_sites, egpd_to_uniform
from ..stats.process import DataMatrix, marginal_table, simulate as simulate_data
from ..stats.taildep import chi_by_distance, simulated_chi_curve
from .common import (
    CommandContext,
    copula_config,
    copula_input,
    cvm_config,
    design_for,
    finish,
    load_data,
    load_egpd,
    load_sites,
    make_context,
    matern_params,
    mixing_spec,
    model_params,
    step1_config,
    study_size,
)

Overrides = dict[str, str] | None


def simulate(
    config: str | Path | None = None,
    *,
    seed: int | None = None,
    workers: int | None = None,
    out: str | Path | None = None,
    overrides: Overrides = None,
) -> dict[str, Any]:
    """
    Sites (from `sites.file`, else uniform on the study domain) and n
    replications of the configured model.
    """
    ctx = make_context("simulate", config, seed=seed, workers=workers, out=out, overrides=overrides)
    params = model_params(ctx.cfg)
    sites = load_sites(ctx, allow_study=True)
    _, n = study_size(ctx.cfg)
    if n is None:
        raise ConfigError("number of replications required (key `study.n` or `study.config`)")

    data = simulate_data(params, sites, n, ctx.stream_seed(1), workers=ctx.workers)
    outputs = {
        "sites": write_sites(ctx.out_path("sites.csv"), sites.coords),
        "data": write_matrix(ctx.out_path("data.csv"), data.values),
    }
    return finish(ctx, outputs, {"model": params.to_dict(), "n": data.n, "m": data.m})


def _fit(ctx: CommandContext) -> tuple[FitResult, DataMatrix]:
    cfg = ctx.cfg
    spec = mixing_spec(cfg)
    sites = load_sites(ctx)
    data = load_data(ctx, sites)
    design = design_for(cfg, spec)
    if cfg.copula:
        udata = copula_input(data, load_egpd(ctx, sites.m))
        return fit_copula(udata, spec, design, copula_config(cfg)), data
    return fit_two_step(data, spec, design, step1_config(cfg), cvm_config(cfg)), data


def fit(
    config: str | Path | None = None,
    *,
    seed: int | None = None,
    workers: int | None = None,
    out: str | Path | None = None,
    overrides: Overrides = None,
) -> dict[str, Any]:
    """Two-step fit, or the copula fit when `fit.copula = true`."""
    ctx = make_context("fit", config, seed=seed, workers=workers, out=out, overrides=overrides)
    result, data = _fit(ctx)
    payload = {**result.to_dict(), "n": data.n, "m": data.m}
    outputs = {"fit": write_json_atomic(ctx.out_path("fit.json"), payload)}
    summary = {
        "model": result.mixing.name,
        "estimate": result.parameter_vector(),
        "converged": result.converged,
        "copula": result.copula,
        "n_skipped": result.n_skipped,
    }
    return finish(ctx, outputs, summary)


def _read_conditioning(path: Path | None) -> tuple[SiteSet, np.ndarray]:
    """Conditioning file: columns x, y, value."""
    if path is None:
        raise DataError("no conditioning file given (key `condsim.conditioning.file`)")
    table = read_matrix(path, what="conditioning file")
    if table.shape[1] != 3:
        raise DataError("conditioning file must have columns x, y, value", context={"columns": table.shape[1]})
    return SiteSet(table[:, :2]), table[:, 2]


def condsim(
    config: str | Path | None = None,
    *,
    seed: int | None = None,
    workers: int | None = None,
    out: str | Path | None = None,
    overrides: Overrides = None,
) -> dict[str, Any]:
    """Conditional draws at the target sites given the values at the conditioning sites."""
    ctx = make_context("condsim", config, seed=seed, workers=workers, out=out, overrides=overrides)
    cfg = ctx.cfg
    params = model_params(cfg)
    sites1, x1 = _read_conditioning(cfg.conditioning_file)
    if cfg.targets_file is None:
        raise DataError("no target site file given (key `condsim.targets.file`)")
    sites2 = SiteSet(read_sites(cfg.targets_file))
    mcmc = CondSimConfig(**cfg.condsim)

    draws = conditional_simulate(params, sites1, x1, sites2, mcmc, ctx.stream_seed(0))
    egpd = load_egpd(ctx, sites2.m)
    table = marginal_table(params.mixing, cfg.n_table or MC_TABLE_SIZE, ctx.stream_seed(1)) if egpd else None
    summary = conditional_predict(draws, table, egpd)

    cols: list[np.ndarray] = [sites2.coords[:, 0], sites2.coords[:, 1], summary.median]
    header = ["x", "y", "median"]
    if summary.observed is not None:
        cols += [summary.uniform, summary.observed]
        header += ["uniform", "observed"]
    outputs = {
        "draws": write_matrix(ctx.out_path("draws.csv"), draws.values),
        "medians": write_matrix(ctx.out_path("medians.csv"), np.column_stack(cols), header=header),
    }
    return finish(ctx, outputs, {
        "retained": int(draws.values.shape[0]),
        "acceptance_rate": None if math.isnan(draws.chain.acceptance_rate) else draws.chain.acceptance_rate,
        "targets": sites2.m,
    })


_CHI_HEADER = ("distance", "p", "n_pairs", "q1", "median", "q3")


def chi(
    config: str | Path | None = None,
    *,
    seed: int | None = None,
    workers: int | None = None,
    out: str | Path | None = None,
    overrides: Overrides = None,
) -> dict[str, Any]:
    """
    Empirical chi by distance class. When the config also carries a model and
    Matern parameters, the same curve is computed on data simulated from it.
    """
    ctx = make_context("chi", config, seed=seed, workers=workers, out=out, overrides=overrides)
    cfg = ctx.cfg
    sites = load_sites(ctx)
    data = load_data(ctx, sites)
    udata = copula_input(data, load_egpd(ctx, sites.m))
    curve = chi_by_distance(udata.values, sites, cfg.chi_thresholds, cfg.chi_bin_width, cfg.chi_side)
    outputs = {"chi": write_records(ctx.out_path("chi.csv"), _CHI_HEADER, curve.to_rows())}

    if cfg.model and cfg.phi is not None and cfg.eta is not None:
        model = simulated_chi_curve(
            model_params(cfg), sites, data.n, ctx.stream_seed(1),
            cfg.chi_thresholds, cfg.chi_bin_width, cfg.chi_side, workers=ctx.workers,
        )
        outputs["chi_model"] = write_records(ctx.out_path("chi_model.csv"), _CHI_HEADER, model.to_rows())

    return finish(ctx, outputs, {
        "thresholds": [float(p) for p in curve.thresholds],
        "bins": int(curve.bin_centers.shape[0]),
        "empty_bins": int(np.sum(curve.empty_bins)),
    })


def bootstrap(
    config: str | Path | None = None,
    *,
    seed: int | None = None,
    workers: int | None = None,
    out: str | Path | None = None,
    overrides: Overrides = None,
) -> dict[str, Any]:
    """
    Percentile intervals around the estimate given by `model`, `model.*` and
    `matern.*`; n is taken from `study.n` or the row count of `data.file`.
    """
    ctx = make_context("bootstrap", config, seed=seed, workers=workers, out=out, overrides=overrides)
    cfg = ctx.cfg
    spec = mixing_spec(cfg)
    sites = load_sites(ctx)
    _, n = study_size(cfg)
    if n is None:
        n = load_data(ctx, sites).n

    estimate = FitResult(
        mixing=spec, matern=matern_params(cfg), step1_nll=math.nan, cvm=None,
        step1_converged=True, step2_converged=True, copula=cfg.copula,
    )
    kw: dict[str, Any] = {"seed": ctx.stream_seed(0)}
    if cfg.bootstrap_B is not None:
        kw["B"] = cfg.bootstrap_B
    if cfg.bootstrap_level is not None:
        kw["level"] = cfg.bootstrap_level
    if cfg.bootstrap_mode is not None:
        kw["mode"] = cfg.bootstrap_mode
    try:
        bcfg = BootstrapConfig(**kw)
    except ValueError as e:
        raise ConfigError("unknown bootstrap.mode", context={"value": cfg.bootstrap_mode}) from e

    result = bootstrap_ci(
        estimate, sites, n, bcfg,
        design=design_for(cfg, spec), step1=step1_config(cfg), cvm=cvm_config(cfg),
        copula=copula_config(cfg), workers=ctx.workers,
    )
    outputs = {
        "intervals": write_records(ctx.out_path("intervals.csv"), ("parameter", "estimate", "lower", "upper"), result.to_rows()),
    }
    return finish(ctx, outputs, {
        "B": bcfg.B,
        "level": bcfg.level,
        "mode": str(bcfg.mode),
        "n_failed": result.n_failed,
        "intervals": {k: list(v) for k, v in result.intervals().items()},
    })


def marginal_fit(
    config: str | Path | None = None,
    *,
    seed: int | None = None,
    workers: int | None = None,
    out: str | Path | None = None,
    overrides: Overrides = None,
) -> dict[str, Any]:
    """Per-site EGPD fits of `data.file`; writes the parameter table and the uniform-scale data."""
    ctx = make_context("marginal-fit", config, seed=seed, workers=workers, out=out, overrides=overrides)
    if ctx.cfg.data_file is None:
        raise DataError("no data file given (key `data.file`)")
    values = read_matrix(ctx.cfg.data_file)
    fits = egpd_fit_sites(values, ctx.workers)
    params = [f.params for f in fits]
    outputs = {
        "marginal": write_egpd_table(ctx.out_path("marginal.csv"), [p.to_row() for p in params]),
        "uniform": write_matrix(ctx.out_path("uniform.csv"), egpd_to_uniform(values, params)),
    }
    return finish(ctx, outputs, {
        "sites": len(fits),
        "converged": sum(f.converged for f in fits),
        "nll": float(sum(f.nll for f in fits)),
    })

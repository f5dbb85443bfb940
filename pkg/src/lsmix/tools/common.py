from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..core.classification import Step1Class
from ..core.errors import ConfigError, DataError
from ..core.models import CommandResult
from ..core.parsers import RunConfig, load_run_config
from ..core.paths import ensure_within, resolve_out_dir
from ..core.runlog import append_run_record, fingerprint
from ..core.tables import read_egpd_table, read_matrix, read_sites
from ..core.workers import WorkerConfig, derive_seed, resolve_workers
from ..stats.correlation import MaternParams, SiteSet, study_design, study_sites
from ..stats.estimate import CopulaConfig, CvmConfig, Step1Config, Step1Design, step1_design
from ..stats.marginal import EgpdParams, egpd_to_uniform
from ..stats.mixing import MixingSpec, mixing_from_name
from ..stats.process import DataMatrix, ModelParams, rank_transform

logger = logging.getLogger(__name__)


@dataclass
class CommandContext:
    """Everything a command needs besides its own logic: config, seed, workers, output dir."""
    command: str
    cfg: RunConfig
    seed: int
    workers: WorkerConfig
    out_dir: Path
    t0: float = field(default_factory=time.perf_counter)

    def out_path(self, name: str) -> Path:
        return ensure_within(self.out_dir, self.out_dir / name)

    def stream_seed(self, index: int) -> int:
        return derive_seed(self.seed, index)


def make_context(
    command: str,
    config: str | Path | None = None,
    *,
    seed: int | None = None,
    workers: int | None = None,
    out: str | Path | None = None,
    overrides: dict[str, str] | None = None,
) -> CommandContext:
    """
    Build the command context; explicit arguments win over the config file,
    the config file wins over the environment.
    """
    cfg = load_run_config(config, overrides)
    return CommandContext(
        command=command,
        cfg=cfg,
        seed=int(seed if seed is not None else (cfg.seed if cfg.seed is not None else 0)),
        workers=resolve_workers(workers),
        out_dir=resolve_out_dir(out),
    )


def finish(ctx: CommandContext, outputs: dict[str, Path], summary: dict[str, Any]) -> dict[str, Any]:
    """Append the run record and return the command payload."""
    wall = time.perf_counter() - ctx.t0
    fp = fingerprint(ctx.cfg.text)
    outs = {k: v.as_posix() for k, v in outputs.items()}
    append_run_record(ctx.out_dir, ctx.command, fp, ctx.seed, outs, wall)
    logger.info("%s finished in %.2fs", ctx.command, wall)
    return CommandResult(
        command=ctx.command,
        seed=ctx.seed,
        fingerprint=fp,
        outputs=outs,
        summary=summary,
        duration_ms=int(round(1000 * wall)),
    ).to_dict()


# model ---------------------------------------------------------------------------


def mixing_spec(cfg: RunConfig) -> MixingSpec:
    if not cfg.model:
        raise ConfigError("no model given (key `model`)")
    return mixing_from_name(cfg.model, cfg.model_params)


def matern_params(cfg: RunConfig) -> MaternParams:
    if cfg.phi is None or cfg.eta is None:
        raise ConfigError("Matern parameters required (keys `matern.phi`, `matern.eta`)")
    return MaternParams(cfg.phi, cfg.eta)


def model_params(cfg: RunConfig) -> ModelParams:
    return ModelParams(mixing_spec(cfg), matern_params(cfg))


def design_for(cfg: RunConfig, spec: MixingSpec) -> Step1Design:
    if cfg.step1_class is None:
        return step1_design(spec, cfg.reference, cfg.reference2)
    try:
        cls = Step1Class(cfg.step1_class.strip().lower())
    except ValueError as e:
        raise ConfigError("unknown fit.class", context={"value": cfg.step1_class, "known": [c.value for c in Step1Class]}) from e
    return Step1Design(cls, cfg.reference, cfg.reference2)


def step1_config(cfg: RunConfig) -> Step1Config:
    start = MaternParams(cfg.phi, cfg.eta) if (cfg.phi is not None and cfg.eta is not None) else None
    return Step1Config(start=start)


def cvm_config(cfg: RunConfig) -> CvmConfig:
    return CvmConfig(n_mc=cfg.n_cvm) if cfg.n_cvm is not None else CvmConfig()


def copula_config(cfg: RunConfig) -> CopulaConfig:
    kw: dict[str, Any] = {"step1": step1_config(cfg), "cvm": cvm_config(cfg)}
    if cfg.n_table is not None:
        kw["n_table"] = cfg.n_table
    return CopulaConfig(**kw)


# inputs --------------------------------------------------------------------------


def study_size(cfg: RunConfig) -> tuple[int | None, int | None]:
    """(m, n) from an explicit study.m / study.n, else from the configuration label."""
    m, n = cfg.study_m, cfg.study_n
    if cfg.study_config:
        dm, dn = study_design(cfg.study_config)
        m = m if m is not None else dm
        n = n if n is not None else dn
    return m, n


def load_sites(ctx: CommandContext, *, allow_study: bool = False) -> SiteSet:
    cfg = ctx.cfg
    if cfg.sites_file is not None:
        return SiteSet(read_sites(cfg.sites_file))
    if allow_study:
        m, _ = study_size(cfg)
        if m is not None:
            return study_sites(m, ctx.stream_seed(0))
    raise DataError("no site file given (key `sites.file`)")


def load_data(ctx: CommandContext, sites: SiteSet) -> DataMatrix:
    if ctx.cfg.data_file is None:
        raise DataError("no data file given (key `data.file`)")
    return DataMatrix(read_matrix(ctx.cfg.data_file), sites)


def load_egpd(ctx: CommandContext, m: int) -> list[EgpdParams] | None:
    if ctx.cfg.marginal_file is None:
        return None
    table = read_egpd_table(ctx.cfg.marginal_file)
    if table.shape[0] != m:
        raise DataError("one marginal parameter row per site is required", context={"rows": table.shape[0], "sites": m})
    return [EgpdParams(*row) for row in table]


def is_uniform(data: DataMatrix) -> bool:
    v = data.values
    return bool(np.all((v > 0.0) & (v < 1.0)))


def copula_input(data: DataMatrix, egpd: list[EgpdParams] | None) -> DataMatrix:
    """Observed data to the uniform scale: EGPD margins if given, ranks unless already uniform."""
    if egpd is not None:
        return data.with_values(egpd_to_uniform(data.values, egpd))
    if is_uniform(data):
        return data
    logger.info("copula input: applying the rank transform")
    return rank_transform(data)

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import StrEnum

import numpy as np
from numpy.typing import NDArray

from ..core.errors import ConvergenceError, InvalidParameterError, LsmixError
from ..core.limits import MAX_FAILED_FRACTION, MIN_BOOTSTRAP
from ..core.workers import WorkerConfig, derive_seed, map_indexed
from .correlation import SiteSet
from .estimate import (
    CopulaConfig,
    CvmConfig,
    FitResult,
    Step1Config,
    Step1Design,
    fit_copula,
    fit_theta_sr,
    fit_theta_w,
    fit_two_step,
    minimize_unconstrained,
    cvm_stat,
    row_means,
    step1_design,
)
from .process import ModelParams, from_uniform, marginal_table, simulate, to_uniform

logger = logging.getLogger(__name__)


class BootstrapMode(StrEnum):
    FAST = "fast"
    STANDARD = "standard"


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 100
    level: float = 0.95
    mode: BootstrapMode = BootstrapMode.FAST
    seed: int = 0

    def __post_init__(self) -> None:
        if self.B < MIN_BOOTSTRAP:
            raise InvalidParameterError("too few bootstrap replicates", context={"B": self.B, "min": MIN_BOOTSTRAP})
        if not 0.0 < self.level < 1.0:
            raise InvalidParameterError("confidence level must lie in (0, 1)", context={"level": self.level})
        object.__setattr__(self, "mode", BootstrapMode(self.mode))


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    names: tuple[str, ...]
    estimate: NDArray[np.float64]
    lower: NDArray[np.float64]
    upper: NDArray[np.float64]
    replicates: NDArray[np.float64]
    n_failed: int
    level: float
    mode: BootstrapMode

    def intervals(self) -> dict[str, tuple[float, float]]:
        return {n: (float(lo), float(hi)) for n, lo, hi in zip(self.names, self.lower, self.upper)}

    def to_rows(self) -> list[tuple[str, float, float, float]]:
        return [(n, float(e), float(lo), float(hi)) for n, e, lo, hi in zip(self.names, self.estimate, self.lower, self.upper)]


def _refit(
    fit: FitResult,
    sites: SiteSet,
    n: int,
    b: int,
    cfg: BootstrapConfig,
    design: Step1Design,
    step1: Step1Config,
    cvm: CvmConfig,
    copula: CopulaConfig,
) -> FitResult:
    truth = ModelParams(fit.mixing, fit.matern)
    data = simulate(truth, sites, n, derive_seed(cfg.seed, b))
    step1 = replace(step1, start=fit.matern)
    fast = cfg.mode is BootstrapMode.FAST

    if not fit.copula:
        if not fast:
            return fit_two_step(data, fit.mixing, design, step1, cvm)
        # fast: step 2 uses the variance of mean(W) at the original estimate
        s1 = fit_theta_w(data, design, step1)
        if fit.mixing.n_params == 0:
            return replace(fit, matern=s1.params, step1_nll=s1.nll)
        s2 = fit_theta_sr(row_means(data, fit.matern), fit.mixing, cvm)
        return replace(fit, mixing=s2.spec, matern=s1.params, cvm=s2.objective)

    udata = to_uniform(data, marginal_table(fit.mixing, copula.n_table, copula.table_seed))
    if not fast:
        return fit_copula(udata, fit.mixing, design, replace(copula, step1=step1))
    # fast copula: theta_W fixed while searching theta_SR, then one step-1 refit
    mixing = fit.mixing
    if mixing.n_params:
        sigma2 = row_means(data, fit.matern).sigma2

        def objective(v: NDArray) -> float:
            try:
                spec = mixing.from_unconstrained(v)
                x = from_uniform(udata, marginal_table(spec, copula.n_table, copula.table_seed))
                return cvm_stat(spec, sigma2, x.values.mean(axis=1), copula.cvm)
            except LsmixError:
                return 1e12

        v, _, _, _ = minimize_unconstrained(
            objective, mixing.to_unconstrained(), xatol=1e-3, fatol=copula.fatol, maxiter=copula.max_evals
        )
        mixing = mixing.from_unconstrained(v)
    x = from_uniform(udata, marginal_table(mixing, copula.n_table, copula.table_seed))
    s1 = fit_theta_w(x, design, step1)
    return replace(fit, mixing=mixing, matern=s1.params, step1_nll=s1.nll)


def bootstrap_ci(
    fit: FitResult,
    sites: SiteSet,
    n: int,
    cfg: BootstrapConfig | None = None,
    *,
    design: Step1Design | None = None,
    step1: Step1Config | None = None,
    cvm: CvmConfig | None = None,
    copula: CopulaConfig | None = None,
    workers: WorkerConfig | None = None,
) -> BootstrapResult:
    """
    Parametric bootstrap percentile intervals.

    Replicate b simulates n rows at the fitted parameters from its own stream
    and refits. In fast mode the Matern parameters of the original fit are
    held fixed while the mixing parameters are re-estimated. Failed refits are
    dropped; more than 10% failures is an error.
    """
    cfg = cfg or BootstrapConfig()
    design = design or step1_design(fit.mixing)
    step1 = step1 or Step1Config()
    cvm = cvm or CvmConfig()
    copula = copula or CopulaConfig()

    def _one(b: int) -> dict[str, float] | None:
        try:
            return _refit(fit, sites, n, b, cfg, design, step1, cvm, copula).parameter_vector()
        except LsmixError as e:
            logger.info("bootstrap replicate %d failed: %s", b, e)
            return None

    results = map_indexed(_one, cfg.B, workers)
    ok = [r for r in results if r is not None]
    n_failed = cfg.B - len(ok)
    if n_failed > MAX_FAILED_FRACTION * cfg.B:
        raise ConvergenceError(
            "too many bootstrap replicates failed", context={"failed": n_failed, "B": cfg.B}
        )

    names = tuple(fit.parameter_vector())
    reps = np.array([[r[k] for k in names] for r in ok], dtype=float)
    alpha = 1.0 - cfg.level
    lower, upper = np.quantile(reps, [0.5 * alpha, 1.0 - 0.5 * alpha], axis=0)
    estimate = np.array([fit.parameter_vector()[k] for k in names])
    logger.info("bootstrap (%s): %d replicates, %d failed", cfg.mode, cfg.B, n_failed)
    return BootstrapResult(names, estimate, lower, upper, reps, n_failed, cfg.level, cfg.mode)

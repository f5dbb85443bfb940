"""
Two-step estimation.

Step 1 fits the Matern parameters from transformed vectors (differences,
ratios, ratios of differences) whose law does not depend on (S, R). Step 2
fits the mixing parameters by minimizing a Cramer-von Mises distance between
the row means and a Monte Carlo cdf of S + R * mean(W).
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.special as sc
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import solve_triangular
from scipy.optimize import minimize, minimize_scalar

from ..core.classification import Step1Class
from ..core.errors import DataError, InvalidParameterError, LsmixError, NumericalError
from ..core.limits import (
    COPULA_FATOL,
    COPULA_MAX_EVALS,
    CVM_FATOL,
    CVM_MAXITER,
    CVM_XATOL,
    DEGENERATE_TOL,
    LOG_PARAM_BOUND,
    MC_LOOP_SIZE,
    MIN_MC_SAMPLE,
    STEP1_FATOL,
    STEP1_MAXITER,
    STEP1_XATOL,
)
from .correlation import CorrMatrix, MaternParams, SiteSet, avg_variance, build_corr_matrix, cholesky_with_jitter
from .mixing import MixingSpec, sample_sr_batch
from .numkernel import mvn_logpdf
from .process import DataMatrix, MonteCarloMarginal, from_uniform, marginal_table, mc_cdf

logger = logging.getLogger(__name__)

_LOG_PI = float(np.log(np.pi))
_PENALTY = 1e12


# step 1 -------------------------------------------------------------------------


@dataclass(frozen=True)
class Step1Design:
    """Step-1 class with its reference site(s), 0-based."""
    cls: Step1Class
    reference: int = 0
    reference2: int = 1

    def validate(self, m: int) -> None:
        needed = {
            Step1Class.PURE_GAUSSIAN: 1,
            Step1Class.LOCATION: 2,
            Step1Class.SCALE: 2,
            Step1Class.LOCATION_SCALE: 3,
        }[self.cls]
        if m < needed:
            raise InvalidParameterError(f"{self.cls} needs at least {needed} sites", context={"m": m})
        if not 0 <= self.reference < m:
            raise InvalidParameterError("reference site out of range", context={"reference": self.reference, "m": m})
        if self.cls is Step1Class.LOCATION_SCALE:
            if not 0 <= self.reference2 < m or self.reference2 == self.reference:
                raise InvalidParameterError(
                    "second reference must be a different valid site",
                    context={"reference": self.reference, "reference2": self.reference2},
                )

    def others(self, m: int) -> NDArray[np.int64]:
        return np.array([i for i in range(m) if i != self.reference], dtype=int)

    def difference_matrix(self, m: int) -> NDArray[np.float64]:
        """(m-1) x m matrix with rows e_i - e_ref for i != ref."""
        others = self.others(m)
        a = np.zeros((m - 1, m))
        a[np.arange(m - 1), others] = 1.0
        a[:, self.reference] = -1.0
        return a

    def dot_position(self, m: int) -> int:
        """Slot that holds the constant 1 in the augmented vector."""
        if self.cls is Step1Class.SCALE:
            return self.reference
        return int(np.flatnonzero(self.others(m) == self.reference2)[0])


def step1_design(spec: MixingSpec, reference: int = 0, reference2: int = 1) -> Step1Design:
    return Step1Design(spec.step1_class, reference, reference2)


def z_transform_rows(values: ArrayLike, design: Step1Design) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """
    Transformed rows and a mask of the rows kept. Rows whose ratio
    denominator is below 1e-12 in absolute value are dropped.
    """
    x = np.atleast_2d(np.asarray(values, dtype=float))
    n, m = x.shape
    design.validate(m)
    ref = design.reference
    others = design.others(m)

    match design.cls:
        case Step1Class.PURE_GAUSSIAN:
            return x.copy(), np.ones(n, dtype=bool)
        case Step1Class.LOCATION:
            return x[:, others] - x[:, [ref]], np.ones(n, dtype=bool)
        case Step1Class.SCALE:
            denom = x[:, ref]
            keep = np.abs(denom) >= DEGENERATE_TOL
            with np.errstate(divide="ignore", invalid="ignore"):
                z = x[keep][:, others] / denom[keep, None]
            return z, keep
        case Step1Class.LOCATION_SCALE:
            d = x[:, others] - x[:, [ref]]
            pos = design.dot_position(m)
            denom = d[:, pos]
            keep = np.abs(denom) >= DEGENERATE_TOL
            rest = np.delete(np.arange(m - 1), pos)
            with np.errstate(divide="ignore", invalid="ignore"):
                z = d[keep][:, rest] / denom[keep, None]
            return z, keep
    raise InvalidParameterError(f"unknown step-1 class {design.cls!r}")


def z_transform(row: ArrayLike, design: Step1Design) -> NDArray[np.float64] | None:
    """Transformed vector of one row, or None when its denominator vanishes."""
    z, keep = z_transform_rows(np.asarray(row, dtype=float)[None, :], design)
    return z[0] if keep[0] else None


def _augment(z: NDArray[np.float64], pos: int) -> NDArray[np.float64]:
    return np.insert(z, pos, 1.0, axis=1)


def _ratio_logdensity(zdot: NDArray[np.float64], cov: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Log density of the ratio vector of a centred d-dimensional scale mixture,
    written through the augmented vector zdot (constant 1 in the reference slot):
    pi^{-d/2} |C|^{-1/2} Gamma(d/2) (zdot' C^-1 zdot)^{-d/2}.
    """
    d = cov.shape[0]
    L, _ = cholesky_with_jitter(cov, what="step-1 covariance")
    sol = solve_triangular(L, zdot.T, lower=True, check_finite=False)
    quad = np.sum(sol * sol, axis=0)
    return -0.5 * d * _LOG_PI - np.sum(np.log(np.diag(L))) + sc.gammaln(0.5 * d) - 0.5 * d * np.log(quad)


def step1_negloglik_sigma(sigma: NDArray[np.float64], zrows: NDArray[np.float64], design: Step1Design) -> float:
    """Step-1 negative log-likelihood for a given correlation matrix."""
    m = sigma.shape[0]
    if zrows.shape[0] == 0:
        raise DataError("no valid transformed rows")
    try:
        match design.cls:
            case Step1Class.PURE_GAUSSIAN:
                ll = mvn_logpdf(zrows, cholesky_with_jitter(sigma)[0])
            case Step1Class.LOCATION:
                a = design.difference_matrix(m)
                ll = mvn_logpdf(zrows, cholesky_with_jitter(a @ sigma @ a.T, what="step-1 covariance")[0])
            case Step1Class.SCALE:
                ll = _ratio_logdensity(_augment(zrows, design.dot_position(m)), sigma)
            case Step1Class.LOCATION_SCALE:
                a = design.difference_matrix(m)
                ll = _ratio_logdensity(_augment(zrows, design.dot_position(m)), a @ sigma @ a.T)
    except NumericalError:
        return np.inf
    total = float(np.sum(ll))
    return -total if np.isfinite(total) else np.inf


def step1_negloglik(theta_w: MaternParams, zrows: NDArray[np.float64], sites: SiteSet, design: Step1Design) -> float:
    """Step-1 negative log-likelihood; +inf when the correlation matrix cannot be factorized."""
    try:
        corr = build_corr_matrix(sites, theta_w)
    except NumericalError:
        return np.inf
    return step1_negloglik_sigma(np.asarray(corr.sigma), zrows, design)


@dataclass(frozen=True)
class Step1Config:
    xatol: float = STEP1_XATOL
    fatol: float = STEP1_FATOL
    maxiter: int = STEP1_MAXITER
    start: MaternParams | None = None


@dataclass(frozen=True)
class Step1Fit:
    params: MaternParams
    nll: float
    converged: bool
    n_evals: int
    n_skipped: int


def default_matern_start(sites: SiteSet) -> MaternParams:
    """Median pairwise distance for the range, 1 for the smoothness."""
    return MaternParams(phi=float(np.median(sites.pair_distances())), eta=1.0)


def _nelder_mead(fun: Callable[[NDArray], float], x0: NDArray, step: float, **options) -> object:
    simplex = np.vstack([x0, x0 + step * np.eye(x0.shape[0])])
    return minimize(fun, x0, method="Nelder-Mead", options={"initial_simplex": simplex, **options})


def fit_theta_w(data: DataMatrix, design: Step1Design, cfg: Step1Config | None = None) -> Step1Fit:
    """Minimize the step-1 negative log-likelihood over (log phi, log eta)."""
    cfg = cfg or Step1Config()
    if data.n < 2:
        raise DataError("step 1 needs at least two replications", context={"n": data.n})
    zrows, keep = z_transform_rows(data.values, design)
    n_skipped = int(np.sum(~keep))
    if n_skipped:
        logger.info("step 1: skipped %d rows with vanishing denominators", n_skipped)
    if zrows.shape[0] == 0:
        raise DataError("every row has a vanishing denominator")
    if not np.all(np.isfinite(zrows)):
        raise DataError("transformed rows contain non-finite values")

    start = cfg.start or default_matern_start(data.sites)
    x0 = np.log([start.phi, start.eta])

    def objective(v: NDArray) -> float:
        if np.any(np.abs(v - x0) > LOG_PARAM_BOUND) or v[1] > np.log(50.0):
            return _PENALTY
        val = step1_negloglik(MaternParams(*np.exp(v)), zrows, data.sites, design)
        return val if np.isfinite(val) else _PENALTY

    res = _nelder_mead(objective, x0, 0.5, xatol=cfg.xatol, fatol=cfg.fatol, maxiter=cfg.maxiter)
    params = MaternParams(*np.exp(res.x))
    if not res.success:
        logger.warning("step 1 did not converge: %s", res.message)
    logger.debug("step 1: phi=%.4g eta=%.4g nll=%.6g (%d evals)", params.phi, params.eta, res.fun, res.nfev)
    return Step1Fit(params, float(res.fun), bool(res.success), int(res.nfev), n_skipped)


# step 2 -------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RowMeans:
    """Spatial averages of each replication and the variance of mean(W)."""
    means: NDArray[np.float64]
    sigma2: float

    @property
    def n(self) -> int:
        return int(self.means.shape[0])


def row_means(data: DataMatrix, corr: CorrMatrix | MaternParams) -> RowMeans:
    if isinstance(corr, MaternParams):
        corr = build_corr_matrix(data.sites, corr)
    return RowMeans(means=data.values.mean(axis=1), sigma2=avg_variance(corr))


@dataclass(frozen=True)
class CvmConfig:
    n_mc: int = MC_LOOP_SIZE
    seed: int = 20_240_601
    xatol: float = CVM_XATOL
    fatol: float = CVM_FATOL
    maxiter: int = CVM_MAXITER

    def __post_init__(self) -> None:
        if self.n_mc < MIN_MC_SAMPLE:
            raise InvalidParameterError("Monte Carlo size too small", context={"n_mc": self.n_mc, "min": MIN_MC_SAMPLE})


def cvm_statistic(sorted_sample: ArrayLike, model_cdf: ArrayLike) -> float:
    """1/(12n) + sum_i ((i - 1/2)/n - F(x_(i)))^2 for cdf values at the order statistics."""
    f = np.asarray(model_cdf, dtype=float)
    n = f.shape[0]
    if n == 0 or np.asarray(sorted_sample).shape[0] != n:
        raise DataError("sample and cdf values must be non-empty and of equal length")
    grid = (np.arange(1, n + 1) - 0.5) / n
    return float(1.0 / (12.0 * n) + np.sum((grid - f) ** 2))


def mean_table(spec: MixingSpec, sigma2: float, cfg: CvmConfig) -> MonteCarloMarginal:
    """Monte Carlo table of S + R sigma_Wbar G under the fixed seed in cfg."""
    rng = np.random.default_rng(cfg.seed)
    batch = sample_sr_batch(spec, rng, cfg.n_mc)
    g = rng.standard_normal(cfg.n_mc)
    return MonteCarloMarginal(batch.s + batch.r * np.sqrt(sigma2) * g)


def cvm_stat(
    spec: MixingSpec,
    sigma2: float | CorrMatrix,
    means: RowMeans | ArrayLike,
    cfg: CvmConfig | None = None,
) -> float:
    cfg = cfg or CvmConfig()
    if isinstance(sigma2, CorrMatrix):
        sigma2 = avg_variance(sigma2)
    xbar = means.means if isinstance(means, RowMeans) else np.asarray(means, dtype=float)
    xs = np.sort(xbar)
    table = mean_table(spec, float(sigma2), cfg)
    return cvm_statistic(xs, mc_cdf(table, xs))


@dataclass(frozen=True)
class Step2Fit:
    spec: MixingSpec
    objective: float
    converged: bool
    n_evals: int
    trace: tuple[float, ...] = ()


def minimize_unconstrained(
    fun: Callable[[NDArray], float],
    x0: NDArray[np.float64],
    *,
    xatol: float,
    fatol: float,
    maxiter: int,
) -> tuple[NDArray[np.float64], float, bool, int]:
    """Bounded Brent in one dimension, Nelder-Mead otherwise."""
    if x0.shape[0] == 1:
        lo = max(x0[0] - 5.0, -LOG_PARAM_BOUND)
        hi = min(x0[0] + 5.0, LOG_PARAM_BOUND)
        res = minimize_scalar(
            lambda t: fun(np.array([t])),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": xatol, "maxiter": maxiter},
        )
        return np.array([res.x]), float(res.fun), bool(res.success), int(res.nfev)
    res = _nelder_mead(fun, x0, 0.5, xatol=xatol, fatol=fatol, maxiter=maxiter, maxfev=maxiter)
    return np.asarray(res.x), float(res.fun), bool(res.success), int(res.nfev)


def fit_theta_sr(
    means: RowMeans,
    spec: MixingSpec,
    cfg: CvmConfig | None = None,
) -> Step2Fit:
    """
    Minimize the Cramer-von Mises statistic over the variant's unconstrained
    parameters, starting from the parameters carried by `spec`.
    """
    cfg = cfg or CvmConfig()
    if spec.n_params == 0:
        raise InvalidParameterError(f"{spec.name} has no mixing parameters to estimate")
    trace: list[float] = []

    def objective(v: NDArray) -> float:
        if np.any(np.abs(v) > LOG_PARAM_BOUND):
            return _PENALTY
        try:
            val = cvm_stat(spec.from_unconstrained(v), means.sigma2, means, cfg)
        except (LsmixError, FloatingPointError):
            return _PENALTY
        val = val if np.isfinite(val) else _PENALTY
        trace.append(val)
        return val

    x, fun, ok, nfev = minimize_unconstrained(
        objective, spec.to_unconstrained(), xatol=cfg.xatol, fatol=cfg.fatol, maxiter=cfg.maxiter
    )
    fitted = spec.from_unconstrained(x)
    if not ok:
        logger.warning("step 2 did not converge for %s", spec.name)
    logger.debug("step 2: %s T=%.6g (%d evals)", fitted, fun, nfev)
    return Step2Fit(fitted, fun, ok, nfev, tuple(trace))


# fits ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    """Point estimates of (theta_W, theta_SR) with objective values and flags."""
    mixing: MixingSpec
    matern: MaternParams
    step1_nll: float
    cvm: float | None
    step1_converged: bool
    step2_converged: bool
    n_skipped: int = 0
    n_evals: int = 0
    trace: tuple[float, ...] = field(default=(), repr=False)
    copula: bool = False
    wall_time_s: float = 0.0

    @property
    def converged(self) -> bool:
        return self.step1_converged and self.step2_converged

    def parameter_vector(self) -> dict[str, float]:
        return {**self.matern.to_dict(), **self.mixing.params()}

    def to_dict(self) -> dict:
        return {
            "model": self.mixing.name,
            "mixing": self.mixing.params(),
            "matern": self.matern.to_dict(),
            "step1_nll": self.step1_nll,
            "cvm": self.cvm,
            "step1_converged": self.step1_converged,
            "step2_converged": self.step2_converged,
            "n_skipped": self.n_skipped,
            "n_evals": self.n_evals,
            "trace": list(self.trace),
            "copula": self.copula,
            "wall_time_s": self.wall_time_s,
        }


def fit_two_step(
    data: DataMatrix,
    spec: MixingSpec,
    design: Step1Design | None = None,
    step1: Step1Config | None = None,
    cvm: CvmConfig | None = None,
) -> FitResult:
    t0 = time.perf_counter()
    design = design or step1_design(spec)
    s1 = fit_theta_w(data, design, step1)
    if spec.n_params == 0:
        return FitResult(
            mixing=spec, matern=s1.params, step1_nll=s1.nll, cvm=None,
            step1_converged=s1.converged, step2_converged=True,
            n_skipped=s1.n_skipped, n_evals=s1.n_evals, wall_time_s=time.perf_counter() - t0,
        )
    means = row_means(data, s1.params)
    s2 = fit_theta_sr(means, spec, cvm)
    logger.info("two-step fit %s: %s, %s", spec.name, s1.params, s2.spec)
    return FitResult(
        mixing=s2.spec,
        matern=s1.params,
        step1_nll=s1.nll,
        cvm=s2.objective,
        step1_converged=s1.converged,
        step2_converged=s2.converged,
        n_skipped=s1.n_skipped,
        n_evals=s1.n_evals + s2.n_evals,
        trace=s2.trace,
        wall_time_s=time.perf_counter() - t0,
    )


@dataclass(frozen=True)
class CopulaConfig:
    n_table: int = MC_LOOP_SIZE
    table_seed: int = 20_240_602
    fatol: float = COPULA_FATOL
    max_evals: int = COPULA_MAX_EVALS
    step1: Step1Config = field(default_factory=Step1Config)
    cvm: CvmConfig = field(default_factory=CvmConfig)


@dataclass
class _InnerState:
    start: MaternParams | None
    best_value: float = np.inf
    best: tuple[MixingSpec, Step1Fit] | None = None
    evals: int = 0
    trace: list[float] = field(default_factory=list)


def _copula_inner(
    udata: DataMatrix,
    spec: MixingSpec,
    design: Step1Design,
    cfg: CopulaConfig,
    state: _InnerState,
) -> float:
    """Algorithm: quantile table, u -> x, step-1 refit, CvM on the row means."""
    table = marginal_table(spec, cfg.n_table, cfg.table_seed)
    x = from_uniform(udata, table)
    s1 = fit_theta_w(x, design, replace(cfg.step1, start=state.start))
    state.start = s1.params
    state.evals += 1
    if spec.n_params == 0:
        value = 0.0
    else:
        means = row_means(x, s1.params)
        value = cvm_stat(spec, means.sigma2, means, cfg.cvm)
    state.trace.append(value)
    if value < state.best_value:
        state.best_value = value
        state.best = (spec, s1)
    return value


def fit_copula(
    udata: DataMatrix,
    spec: MixingSpec,
    design: Step1Design | None = None,
    cfg: CopulaConfig | None = None,
) -> FitResult:
    """
    Copula fit: outer derivative-free search over the mixing parameters, each
    trial refitting the Matern parameters on data mapped through the trial's
    quantile table (warm-started from the previous inner optimum).
    """
    t0 = time.perf_counter()
    cfg = cfg or CopulaConfig()
    design = design or step1_design(spec)
    u = udata.values
    if np.any((u <= 0.0) | (u >= 1.0)) or not np.all(np.isfinite(u)):
        raise DataError("copula data must lie strictly inside (0, 1)")
    state = _InnerState(start=cfg.step1.start)

    if spec.n_params == 0:
        _copula_inner(udata, spec, design, cfg, state)
        converged = True
    else:
        def objective(v: NDArray) -> float:
            if np.any(np.abs(v) > LOG_PARAM_BOUND):
                return _PENALTY
            try:
                return _copula_inner(udata, spec.from_unconstrained(v), design, cfg, state)
            except (NumericalError, InvalidParameterError):
                return _PENALTY

        x0 = spec.to_unconstrained()
        _, _, converged, _ = minimize_unconstrained(
            objective, x0, xatol=1e-3, fatol=cfg.fatol, maxiter=cfg.max_evals
        )

    if state.best is None:
        raise NumericalError("copula objective could not be evaluated", context={"model": spec.name})
    best_spec, s1 = state.best
    if not converged:
        logger.warning("copula outer search stopped before convergence (%d evaluations)", state.evals)
    return FitResult(
        mixing=best_spec,
        matern=s1.params,
        step1_nll=s1.nll,
        cvm=state.best_value if spec.n_params else None,
        step1_converged=s1.converged,
        step2_converged=bool(converged),
        n_skipped=s1.n_skipped,
        n_evals=state.evals,
        trace=tuple(state.trace),
        copula=True,
        wall_time_s=time.perf_counter() - t0,
    )

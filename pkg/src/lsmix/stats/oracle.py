"""
Full-likelihood reference by numerical integration over the mixing variables.

Only practical for a handful of sites; the estimators never call it, tests
compare against it.
"""
from __future__ import annotations

import logging
import warnings
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import IntegrationWarning, dblquad, quad

from ..core.classification import Step1Class
from ..core.errors import InvalidParameterError, NumericalError
from .correlation import build_corr_matrix
from .mixing import SM4, SM5, MixingSpec
from .numkernel import mvn_logpdf
from .process import DataMatrix, ModelParams

logger = logging.getLogger(__name__)

MAX_ORACLE_SITES = 3

# integrand values below exp(max - _LOG_SPAN) are treated as zero
_LOG_SPAN = 60.0
_GRID_1D = 2001
_GRID_2D = 161

# (a, b) -> (s, r, log prior including the change of variables)
Mapping2d = Callable[[NDArray, NDArray], tuple[NDArray, NDArray, NDArray]]


def _log_kernel(x: NDArray, s: NDArray, r: NDArray, chol: NDArray) -> NDArray:
    """log of r^-m phi_Sigma((x - s)/r) for arrays of (s, r)."""
    s = np.atleast_1d(s)
    r = np.atleast_1d(r)
    z = (x[None, :] - s[:, None]) / r[:, None]
    return np.atleast_1d(mvn_logpdf(z, chol)) - x.shape[0] * np.log(r)


def _sr_prior(spec: MixingSpec, s: NDArray, r: NDArray) -> NDArray:
    return np.array([spec.sr_logpdf(float(a), float(b)) for a, b in zip(np.ravel(s), np.ravel(r))])


def _active_range(grid: NDArray, logf: NDArray) -> tuple[float, float]:
    ok = np.flatnonzero(np.isfinite(logf) & (logf > np.nanmax(logf) - _LOG_SPAN))
    lo = grid[max(ok[0] - 1, 0)]
    hi = grid[min(ok[-1] + 1, grid.shape[0] - 1)]
    return float(lo), float(hi)


def _checked(val: float, err: float, what: str) -> float:
    if not (np.isfinite(val) and val > 0.0) or err > 1e-6 * abs(val):
        raise NumericalError(f"quadrature did not converge for {what}", context={"value": val, "error": err})
    return val


def _integrate_1d(logf: Callable[[NDArray], NDArray], lo: float, hi: float, epsrel: float) -> float:
    grid = np.linspace(lo, hi, _GRID_1D)
    vals = logf(grid)
    if not np.any(np.isfinite(vals)):
        return -np.inf
    c = float(np.nanmax(vals))
    a, b = _active_range(grid, vals)
    peak = float(grid[int(np.nanargmax(vals))])
    points = [peak] if a < peak < b else None
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            val, err = quad(
                lambda v: float(np.exp(logf(np.array([v]))[0] - c)),
                a, b, points=points, epsabs=0.0, epsrel=epsrel, limit=400,
            )
        except IntegrationWarning as e:
            raise NumericalError("quadrature did not converge", context={"detail": str(e)}) from e
    return c + float(np.log(_checked(val, err, "1-d mixing integral")))


def _integrate_2d(
    logf: Callable[[NDArray, NDArray], NDArray],
    a_range: tuple[float, float],
    b_range: tuple[float, float],
    epsrel: float,
) -> float:
    ga = np.linspace(*a_range, _GRID_2D)
    gb = np.linspace(*b_range, _GRID_2D)
    A, B = np.meshgrid(ga, gb, indexing="ij")
    vals = logf(A.ravel(), B.ravel()).reshape(A.shape)
    if not np.any(np.isfinite(vals)):
        return -np.inf
    c = float(np.nanmax(vals))
    a_lo, a_hi = _active_range(ga, np.nanmax(np.where(np.isfinite(vals), vals, -np.inf), axis=1))
    b_lo, b_hi = _active_range(gb, np.nanmax(np.where(np.isfinite(vals), vals, -np.inf), axis=0))

    def integrand(b: float, a: float) -> float:
        return float(np.exp(logf(np.array([a]), np.array([b]))[0] - c))

    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            val, err = dblquad(integrand, a_lo, a_hi, b_lo, b_hi, epsabs=0.0, epsrel=epsrel)
        except IntegrationWarning as e:
            raise NumericalError("quadrature did not converge", context={"detail": str(e)}) from e
    return c + float(np.log(_checked(val, err, "2-d mixing integral")))


def _row_loglik(x: NDArray, spec: MixingSpec, chol: NDArray, epsrel: float) -> float:
    cls = spec.step1_class
    spread = float(np.max(np.abs(x)))

    if cls is Step1Class.LOCATION:
        def logf(s: NDArray) -> NDArray:
            return _log_kernel(x, s, np.ones_like(s), chol) + _sr_prior(spec, s, np.ones_like(s))

        lo = 0.0 if spec.location_support == "positive" else -spread - 60.0
        return _integrate_1d(logf, lo, spread + 60.0, epsrel)

    if isinstance(spec, SM4):
        a_shape = 1.0 / spec.gamma

        def logf2(a: NDArray, b: NDArray) -> NDArray:
            e, g = np.exp(a), np.exp(b)
            r = np.sqrt(e) / g
            prior = np.array([spec.latent_logpdf_terms((float(u), float(v))) for u, v in zip(e, g)])
            return _log_kernel(x, np.zeros_like(r), r, chol) + prior + a + b

        b_lo = -(40.0 + 20.0 * spec.gamma) * max(1.0, spec.gamma)
        b_hi = float(np.log(20.0 + 40.0 / a_shape))
        return _integrate_2d(logf2, (-40.0, 6.0), (b_lo, b_hi), epsrel)

    if cls is Step1Class.SCALE:
        def logf(t: NDArray) -> NDArray:
            r = np.exp(t)
            return _log_kernel(x, np.zeros_like(r), r, chol) + _sr_prior(spec, np.zeros_like(r), r) + t

        hi = 40.0
        if isinstance(spec, SM5) and spec.gamma < 0.0:
            hi = float(np.log(-1.0 / spec.gamma)) - 1e-12
        return _integrate_1d(logf, -40.0, hi, epsrel)

    # location-scale: (s, log r)
    def logf_ls(s: NDArray, t: NDArray) -> NDArray:
        r = np.exp(t)
        return _log_kernel(x, s, r, chol) + _sr_prior(spec, s, r) + t

    lo = 0.0 if spec.location_support == "positive" else -spread - 60.0
    return _integrate_2d(logf_ls, (lo, spread + 60.0), (-25.0, 5.0), epsrel)


def quad_negloglik_oracle(params: ModelParams, data: DataMatrix, *, epsrel: float = 1e-9) -> float:
    """
    Negative log-likelihood of `data` under the full model, integrating the
    Gaussian density over the mixing variables row by row.
    """
    if data.m > MAX_ORACLE_SITES:
        raise InvalidParameterError(
            "quadrature oracle supports at most 3 sites", context={"m": data.m, "max": MAX_ORACLE_SITES}
        )
    chol = build_corr_matrix(data.sites, params.corr).chol
    spec = params.mixing
    if spec.step1_class is Step1Class.PURE_GAUSSIAN:
        return float(-np.sum(mvn_logpdf(data.values, chol)))

    total = 0.0
    for i, x in enumerate(data.values):
        ll = _row_loglik(np.asarray(x, dtype=float), spec, chol, epsrel)
        if not np.isfinite(ll):
            raise NumericalError("row has zero likelihood", context={"row": i})
        total -= ll
    logger.debug("oracle negloglik %.6f over %d rows (%s)", total, data.n, spec)
    return float(total)

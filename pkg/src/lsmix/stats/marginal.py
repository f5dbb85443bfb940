"""EGPD marginals F(y) = B(H_xi(y / sigma)) with B(u) = p u^k1 + (1 - p) u^k2."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import product

import numpy as np
import scipy.special as sc
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize
from scipy.stats import genpareto

from ..core.errors import ConvergenceError, DataError, InvalidParameterError
from ..core.limits import BINV_TOL, GPD_XI_ZERO, MIN_EGPD_SAMPLES
from ..core.workers import WorkerConfig, map_indexed
from .mixing import gpd_quantile

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EgpdParams:
    sigma: float
    xi: float
    p: float = 1.0
    kappa1: float = 1.0
    kappa2: float = 1.0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidParameterError("EGPD scale must be positive", context={"sigma": self.sigma})
        if not np.isfinite(self.xi):
            raise InvalidParameterError("EGPD shape must be finite", context={"xi": self.xi})
        if not 0.0 <= self.p <= 1.0:
            raise InvalidParameterError("EGPD weight must lie in [0, 1]", context={"p": self.p})
        if not (self.kappa1 > 0 and self.kappa2 >= self.kappa1):
            raise InvalidParameterError(
                "EGPD powers need 0 < kappa1 <= kappa2",
                context={"kappa1": self.kappa1, "kappa2": self.kappa2},
            )

    @property
    def upper_endpoint(self) -> float:
        return -self.sigma / self.xi if self.xi < -GPD_XI_ZERO else np.inf

    def to_dict(self) -> dict[str, float]:
        return {"sigma": self.sigma, "xi": self.xi, "p": self.p, "kappa1": self.kappa1, "kappa2": self.kappa2}

    def to_row(self) -> tuple[float, ...]:
        return (self.sigma, self.xi, self.p, self.kappa1, self.kappa2)


def _check_support(x: NDArray, xi: float, sigma: float) -> None:
    if np.any(x < 0.0) or np.any(~np.isfinite(x) & ~np.isposinf(x)):
        raise InvalidParameterError("value outside the distribution support")
    if xi < -GPD_XI_ZERO and np.any(x > -sigma / xi):
        raise InvalidParameterError("value above the upper endpoint", context={"endpoint": -sigma / xi})


def _gpd_log_survival(x: NDArray, xi: float, sigma: float) -> NDArray:
    """log(1 - H_xi(x / sigma)) in a form that is stable near xi = 0."""
    z = x / sigma
    if abs(xi) < GPD_XI_ZERO:
        return -z
    with np.errstate(divide="ignore"):
        return -np.log1p(xi * z) / xi


def gpd_cdf(x: ArrayLike, xi: float, sigma: float = 1.0) -> NDArray[np.float64] | float:
    if not sigma > 0:
        raise InvalidParameterError("GPD scale must be positive", context={"sigma": sigma})
    x = np.asarray(x, dtype=float)
    _check_support(x, xi, sigma)
    out = -np.expm1(_gpd_log_survival(x, xi, sigma))
    return float(out) if out.ndim == 0 else out


def _gpd_logpdf(x: NDArray, xi: float, sigma: float) -> NDArray:
    return -np.log(sigma) + (1.0 + xi) * _gpd_log_survival(x, xi, sigma)


def _b(v: NDArray, prm: EgpdParams) -> NDArray:
    return prm.p * v**prm.kappa1 + (1.0 - prm.p) * v**prm.kappa2


def _b_prime(v: NDArray, prm: EgpdParams) -> NDArray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return prm.p * prm.kappa1 * v ** (prm.kappa1 - 1.0) + (1.0 - prm.p) * prm.kappa2 * v ** (prm.kappa2 - 1.0)


def egpd_cdf(y: ArrayLike, params: EgpdParams) -> NDArray[np.float64] | float:
    y = np.asarray(y, dtype=float)
    h = np.asarray(gpd_cdf(y, params.xi, params.sigma))
    out = _b(h, params)
    return float(out) if out.ndim == 0 else out


def egpd_pdf(y: ArrayLike, params: EgpdParams) -> NDArray[np.float64] | float:
    y = np.asarray(y, dtype=float)
    h = np.asarray(gpd_cdf(y, params.xi, params.sigma))
    out = _b_prime(h, params) * np.exp(_gpd_logpdf(y, params.xi, params.sigma))
    return float(out) if out.ndim == 0 else out


def _b_inverse(u: NDArray, prm: EgpdParams) -> NDArray:
    """Safeguarded Newton on [0, 1]: bisection whenever a step leaves the bracket."""
    if prm.kappa1 == prm.kappa2 or prm.p == 1.0:
        return u ** (1.0 / prm.kappa1)
    if prm.p == 0.0:
        return u ** (1.0 / prm.kappa2)

    lo = np.zeros_like(u)
    hi = np.ones_like(u)
    v = u ** (1.0 / prm.kappa1)
    for _ in range(200):
        f = _b(v, prm) - u
        lo = np.where(f < 0.0, v, lo)
        hi = np.where(f > 0.0, v, hi)
        d = _b_prime(v, prm)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = v - f / d
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        new = np.where(bad, 0.5 * (lo + hi), step)
        done = np.abs(new - v) <= BINV_TOL * np.maximum(v, 1e-300)
        v = new
        if np.all(done | (f == 0.0)):
            break
    return v


def egpd_quantile(u: ArrayLike, params: EgpdParams) -> NDArray[np.float64] | float:
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise InvalidParameterError("probabilities must lie in (0, 1)")
    v = np.clip(_b_inverse(u, params), 0.0, np.nextafter(1.0, 0.0))
    out = np.asarray(gpd_quantile(v, params.sigma, params.xi))
    return float(out) if out.ndim == 0 else out


def egpd_sample(params: EgpdParams, size: int, rng: np.random.Generator) -> NDArray[np.float64]:
    u = rng.random(size)
    u = np.clip(u, 1e-16, 1.0 - 1e-16)
    return np.asarray(egpd_quantile(u, params))


# fitting ----------------------------------------------------------------------


@dataclass(frozen=True)
class EgpdFit:
    params: EgpdParams
    nll: float
    converged: bool

    def to_dict(self) -> dict:
        return {**self.params.to_dict(), "nll": self.nll, "converged": self.converged}


def _unpack(theta: NDArray) -> EgpdParams:
    log_sigma, xi, logit_p, log_k1, log_dk = theta
    k1 = float(np.exp(log_k1))
    return EgpdParams(
        sigma=float(np.exp(log_sigma)),
        xi=float(xi),
        p=float(sc.expit(logit_p)),
        kappa1=k1,
        kappa2=k1 + float(np.exp(log_dk)),
    )


def egpd_negloglik(params: EgpdParams, y: NDArray[np.float64]) -> float:
    if params.xi < -GPD_XI_ZERO and np.any(y >= params.upper_endpoint):
        return np.inf
    h = np.asarray(gpd_cdf(y, params.xi, params.sigma))
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = np.log(_b_prime(h, params)) + _gpd_logpdf(y, params.xi, params.sigma)
    if not np.all(np.isfinite(ll)):
        return np.inf
    return float(-np.sum(ll))


def egpd_fit(samples: ArrayLike, *, maxiter: int = 4_000) -> EgpdFit:
    """
    Maximum likelihood over (log sigma, xi, logit p, log k1, log(k2 - k1)),
    Nelder-Mead from a small grid of starting points.
    """
    y = np.asarray(samples, dtype=float).ravel()
    if y.size < MIN_EGPD_SAMPLES:
        raise DataError("too few samples for an EGPD fit", context={"n": int(y.size), "min": MIN_EGPD_SAMPLES})
    if not np.all(np.isfinite(y)):
        raise DataError("samples must be finite")
    if np.any(y < 0.0):
        raise DataError("EGPD samples must be non-negative")
    if np.ptp(y) == 0.0:
        raise DataError("degenerate samples: all values are equal")

    xi0, _, sigma0 = genpareto.fit(y, floc=0.0)
    xi0 = float(np.clip(xi0, -0.4, 0.8))
    sigma0 = float(max(sigma0, 1e-6 * np.mean(y) + 1e-300))

    def objective(theta: NDArray) -> float:
        try:
            prm = _unpack(theta)
        except InvalidParameterError:
            return np.inf
        return egpd_negloglik(prm, y)

    best = None
    for logit_p, log_k1 in product((-1.0, 1.0), (np.log(0.7), np.log(1.5))):
        start = np.array([np.log(sigma0), xi0, logit_p, log_k1, np.log(1.5)])
        if not np.isfinite(objective(start)):
            continue
        res = minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={"maxiter": maxiter, "xatol": 1e-6, "fatol": 1e-8},
        )
        if best is None or res.fun < best.fun:
            best = res

    if best is None or not np.isfinite(best.fun):
        raise ConvergenceError("EGPD likelihood could not be evaluated at any start point")
    if not best.success:
        logger.warning("EGPD fit did not converge: %s", best.message)
    return EgpdFit(params=_unpack(best.x), nll=float(best.fun), converged=bool(best.success))


def egpd_fit_sites(values: ArrayLike, workers: WorkerConfig | None = None) -> list[EgpdFit]:
    """Independent per-site EGPD fits, one per column."""
    y = np.asarray(values, dtype=float)
    if y.ndim != 2:
        raise DataError("expected an (n, m) matrix of observations")
    return map_indexed(lambda j: egpd_fit(y[:, j]), y.shape[1], workers)


def egpd_to_uniform(values: ArrayLike, params: list[EgpdParams]) -> NDArray[np.float64]:
    """Per-site probability integral transform to (0, 1)."""
    y = np.asarray(values, dtype=float)
    if y.ndim != 2 or y.shape[1] != len(params):
        raise DataError("one EGPD parameter set per column is required")
    u = np.column_stack([np.asarray(egpd_cdf(y[:, j], p)) for j, p in enumerate(params)])
    eps = 0.5 / y.shape[0]
    return np.clip(u, eps, 1.0 - eps)

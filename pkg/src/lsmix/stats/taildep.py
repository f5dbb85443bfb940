"""
Tail dependence: closed-form chi and chi-bar for the mixing catalogue, plug-in
estimators at finite thresholds, and the chi-by-distance diagnostic.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import StrEnum
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..core.errors import DataError, InvalidParameterError
from ..core.limits import CHI_BIN_WIDTH, CHI_THRESHOLDS, GPD_XI_ZERO, LSM_CHI_DRAWS, MIN_JOINT_EXCEEDANCES
from ..core.workers import WorkerConfig
from .correlation import SiteSet
from .mixing import LM1, LM2, LSM1, LSM2, SM1, SM2, SM3, SM4, SM5, Gaussian, MixingSpec, open_uniform
from .numkernel import std_normal_cdf, student_t_cdf
from .process import ModelParams, rank_transform, simulate

logger = logging.getLogger(__name__)


class TailSide(StrEnum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class TailCoefficient:
    """A coefficient value; `stderr` is non-zero only for Monte Carlo evaluations."""
    value: float
    stderr: float = 0.0

    def __float__(self) -> float:
        return self.value


def _check_rho(rho: float) -> float:
    rho = float(rho)
    if not (-1.0 < rho < 1.0):
        raise InvalidParameterError("correlation must lie in (-1, 1)", context={"rho": rho})
    return rho


def _t_chi(nu: float, rho: float) -> float:
    arg = -np.sqrt(nu + 1.0) * np.sqrt((1.0 - rho) / (1.0 + rho))
    return float(2.0 * student_t_cdf(arg, nu + 1.0))


def lsm_chi_montecarlo(
    lam: float,
    rho: float,
    n: int = LSM_CHI_DRAWS,
    seed: int = 0,
) -> TailCoefficient:
    """
    E[min(Z1^lam / E Z1^lam, Z2^lam / E Z2^lam)] with Z_i = exp(R W_i),
    R = sqrt(E), E ~ E(1/2), (W1, W2) standard bivariate normal with correlation rho.

    Moments in the denominators are the sample means of the same draws.
    """
    rho = _check_rho(rho)
    if not 0.0 < lam < 1.0:
        raise InvalidParameterError("Monte Carlo chi needs 0 < lam < 1", context={"lam": lam})
    rng = np.random.default_rng(int(seed))
    r = np.sqrt(-2.0 * np.log1p(-open_uniform(rng, n)))
    g = rng.standard_normal((n, 2))
    w1 = g[:, 0]
    w2 = rho * g[:, 0] + np.sqrt(1.0 - rho * rho) * g[:, 1]
    z1 = np.exp(lam * r * w1)
    z2 = np.exp(lam * r * w2)
    terms = np.minimum(z1 / z1.mean(), z2 / z2.mean())
    value = float(np.clip(terms.mean(), 0.0, 1.0))
    stderr = float(terms.std(ddof=1) / np.sqrt(n))
    logger.debug("lsm chi lam=%.3g rho=%.3g: %.5f (se %.2e)", lam, rho, value, stderr)
    return TailCoefficient(value, stderr)


def chi_theory(
    spec: MixingSpec,
    rho: float,
    side: TailSide | str = TailSide.UPPER,
    *,
    n_mc: int = LSM_CHI_DRAWS,
    seed: int = 0,
) -> TailCoefficient:
    """Limiting chi for a pair of sites with Gaussian correlation rho."""
    rho = _check_rho(rho)
    side = TailSide(side)
    upper = side is TailSide.UPPER

    match spec:
        case Gaussian() | SM1() | SM2():
            return TailCoefficient(0.0)
        case LM1(lam=lam):
            if not upper:
                return TailCoefficient(0.0)
            return TailCoefficient(float(2.0 * std_normal_cdf(-lam * np.sqrt(1.0 - rho) / np.sqrt(2.0))))
        case LM2(lam1=lam1, lam2=lam2):
            lam = lam1 if upper else lam2
            return TailCoefficient(float(2.0 * std_normal_cdf(-lam * np.sqrt(1.0 - rho) / np.sqrt(2.0))))
        case SM3(nu=nu):
            return TailCoefficient(_t_chi(nu, rho))
        case SM4(gamma=gamma):
            return TailCoefficient(_t_chi(1.0 / gamma, rho))
        case SM5(gamma=gamma):
            if gamma <= 0.0:
                return TailCoefficient(0.0)
            # R is regularly varying with index 1/gamma
            return TailCoefficient(_t_chi(1.0 / gamma, rho))
        case LSM1(lam=lam):
            if not upper or lam >= 1.0:
                return TailCoefficient(0.0)
            return lsm_chi_montecarlo(lam, rho, n_mc, seed)
        case LSM2(lam1=lam1, lam2=lam2):
            lam = lam1 if upper else lam2
            if lam >= 1.0:
                return TailCoefficient(0.0)
            return lsm_chi_montecarlo(lam, rho, n_mc, seed)
    raise InvalidParameterError(f"no tail coefficients for {spec!r}")


def chibar_theory(spec: MixingSpec, rho: float, side: TailSide | str = TailSide.UPPER) -> TailCoefficient:
    rho = _check_rho(rho)
    side = TailSide(side)
    upper = side is TailSide.UPPER
    laplace = float(np.sqrt(2.0 * (1.0 + rho)) - 1.0)

    match spec:
        case Gaussian():
            return TailCoefficient(rho)
        case SM1() | SM2():
            return TailCoefficient(laplace)
        case LM1():
            return TailCoefficient(1.0 if upper else rho)
        case LM2() | SM3() | SM4():
            return TailCoefficient(1.0)
        case SM5(gamma=gamma):
            if gamma > GPD_XI_ZERO:
                return TailCoefficient(1.0)
            if gamma < -GPD_XI_ZERO:
                return TailCoefficient(rho)
            return TailCoefficient(float(np.cbrt(4.0 * (1.0 + rho)) - 1.0))
        case LSM1(lam=lam):
            if not upper:
                return TailCoefficient(laplace)
            return TailCoefficient(_lsm_chibar(lam, rho))
        case LSM2(lam1=lam1, lam2=lam2):
            return TailCoefficient(_lsm_chibar(lam1 if upper else lam2, rho))
    raise InvalidParameterError(f"no tail coefficients for {spec!r}")


def _lsm_chibar(lam: float, rho: float) -> float:
    if lam > 1.0:
        return max(2.0 / lam - 1.0, rho)
    return 1.0


# empirical estimators ---------------------------------------------------------


def _pairs(u: ArrayLike, side: TailSide) -> NDArray[np.float64]:
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[1] != 2:
        raise DataError("expected an (n, 2) array of paired probabilities", context={"shape": u.shape})
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise DataError("paired probabilities must lie in (0, 1)")
    return u if side is TailSide.UPPER else 1.0 - u


def _exceedances(u: NDArray, p: float) -> tuple[int, float, float]:
    if not 0.0 < p < 1.0:
        raise InvalidParameterError("threshold must lie in (0, 1)", context={"p": p})
    ex = u > p
    joint = int(np.sum(ex[:, 0] & ex[:, 1]))
    if joint == 0:
        raise DataError("no joint exceedances above the threshold", context={"p": p})
    if joint < MIN_JOINT_EXCEEDANCES:
        logger.debug("only %d joint exceedances at p=%.4g", joint, p)
    n = u.shape[0]
    marg = 0.5 * (ex[:, 0].sum() + ex[:, 1].sum()) / n
    return joint, joint / n, float(marg)


def chi_empirical(u: ArrayLike, p: float, side: TailSide | str = TailSide.UPPER) -> float:
    """Pr(U2 > p, U1 > p) / Pr(U > p) with the marginal averaged over both columns."""
    _, pj, pm = _exceedances(_pairs(u, TailSide(side)), p)
    return float(pj / pm)


def chibar_empirical(u: ArrayLike, p: float, side: TailSide | str = TailSide.UPPER) -> float:
    """2 log Pr(U > p) / log Pr(U1 > p, U2 > p) - 1."""
    _, pj, pm = _exceedances(_pairs(u, TailSide(side)), p)
    if pj >= 1.0:
        return 1.0
    return float(2.0 * np.log(pm) / np.log(pj) - 1.0)


@dataclass(frozen=True, eq=False)
class ChiCurve:
    """
    Quartiles of pairwise chi estimates per distance bin, one row per threshold.

    Empty bins carry n_pairs = 0 and NaN summaries.
    """
    thresholds: NDArray[np.float64]
    bin_edges: NDArray[np.float64]
    n_pairs: NDArray[np.int64]
    q1: NDArray[np.float64]
    median: NDArray[np.float64]
    q3: NDArray[np.float64]

    @property
    def bin_centers(self) -> NDArray[np.float64]:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def empty_bins(self) -> NDArray[np.bool_]:
        return self.n_pairs == 0

    def to_rows(self) -> NDArray[np.float64]:
        """Rows of (bin_center, p, n_pairs, q1, median, q3)."""
        rows = []
        for k, p in enumerate(self.thresholds):
            for b, c in enumerate(self.bin_centers):
                rows.append((c, p, self.n_pairs[b], self.q1[k, b], self.median[k, b], self.q3[k, b]))
        return np.asarray(rows, dtype=float)


def pairwise_chi(udata: NDArray[np.float64], p: float, side: TailSide | str = TailSide.UPPER) -> NDArray[np.float64]:
    """
    Chi estimates for every site pair (condensed i < j order); NaN where a pair
    has no joint exceedances.
    """
    u = np.asarray(udata, dtype=float)
    if TailSide(side) is TailSide.LOWER:
        u = 1.0 - u
    ex = (u > p).astype(float)
    joint = ex.T @ ex
    marg = ex.sum(axis=0)
    denom = 0.5 * (marg[:, None] + marg[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        chi = np.where(joint > 0, joint / denom, np.nan)
    iu = np.triu_indices(u.shape[1], k=1)
    return chi[iu]


def chi_by_distance(
    udata: NDArray[np.float64],
    sites: SiteSet,
    thresholds: Sequence[float] = CHI_THRESHOLDS,
    bin_width: float = CHI_BIN_WIDTH,
    side: TailSide | str = TailSide.UPPER,
) -> ChiCurve:
    u = np.asarray(udata, dtype=float)
    if sites.m < 2:
        raise InvalidParameterError("chi by distance needs at least two sites")
    if u.ndim != 2 or u.shape[1] != sites.m:
        raise DataError("uniform data do not match the site set", context={"shape": u.shape, "m": sites.m})
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise DataError("uniform data must lie strictly inside (0, 1)")
    ps = np.asarray(sorted(float(p) for p in thresholds))
    if ps.size == 0 or np.any((ps <= 0.0) | (ps >= 1.0)):
        raise InvalidParameterError("thresholds must lie in (0, 1)")
    if not bin_width > 0:
        raise InvalidParameterError("bin width must be positive", context={"bin_width": bin_width})

    dist = sites.pair_distances()
    n_bins = max(int(np.floor(dist.max() / bin_width)) + 1, 1)
    edges = bin_width * np.arange(n_bins + 1, dtype=float)
    which = np.minimum((dist // bin_width).astype(int), n_bins - 1)
    counts = np.bincount(which, minlength=n_bins)

    shape = (ps.size, n_bins)
    q1, med, q3 = np.full(shape, np.nan), np.full(shape, np.nan), np.full(shape, np.nan)
    for k, p in enumerate(ps):
        chi = pairwise_chi(u, p, side)
        for b in np.flatnonzero(counts):
            vals = chi[which == b]
            vals = vals[np.isfinite(vals)]
            if vals.size:
                q1[k, b], med[k, b], q3[k, b] = np.quantile(vals, [0.25, 0.5, 0.75])

    if np.any(counts == 0):
        logger.warning("%d of %d distance bins are empty", int(np.sum(counts == 0)), n_bins)
    return ChiCurve(thresholds=ps, bin_edges=edges, n_pairs=counts, q1=q1, median=med, q3=q3)


def simulated_chi_curve(
    params: ModelParams,
    sites: SiteSet,
    n: int,
    seed: int,
    thresholds: Sequence[float] = CHI_THRESHOLDS,
    bin_width: float = CHI_BIN_WIDTH,
    side: TailSide | str = TailSide.UPPER,
    workers: WorkerConfig | None = None,
) -> ChiCurve:
    """Chi by distance on rank-transformed data simulated from a model."""
    data = simulate(params, sites, n, seed, workers=workers)
    return chi_by_distance(rank_transform(data).values, sites, thresholds, bin_width, side)

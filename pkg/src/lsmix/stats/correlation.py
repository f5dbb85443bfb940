from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.special as sc
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.distance import cdist, pdist

from ..core.errors import InvalidParameterError, NumericalError, SiteError
from ..core.limits import JITTER_MAX, JITTER_START, JITTER_WARN, STUDY_DOMAIN
from .numkernel import log_bessel_k

logger = logging.getLogger(__name__)

# Configuration label -> (m sites, n replications)
STUDY_DESIGNS: dict[str, tuple[int, int]] = {
    "A": (50, 100),
    "B": (100, 500),
    "C": (200, 1000),
    "D": (400, 2000),
}


def _readonly(a: NDArray) -> NDArray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MaternParams:
    """Matern range `phi` and smoothness `eta`, both strictly positive."""
    phi: float
    eta: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.phi) and self.phi > 0):
            raise InvalidParameterError("Matern range must be positive", context={"phi": self.phi})
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise InvalidParameterError("Matern smoothness must be positive", context={"eta": self.eta})

    def to_dict(self) -> dict[str, float]:
        return {"phi": float(self.phi), "eta": float(self.eta)}


@dataclass(frozen=True, eq=False)
class SiteSet:
    """Planar site coordinates, one row per site."""
    coords: NDArray[np.float64]

    def __post_init__(self) -> None:
        c = np.array(self.coords, dtype=float, copy=True)
        if c.ndim != 2 or c.shape[1] != 2 or c.shape[0] < 1:
            raise SiteError("sites must be an (m, 2) array", context={"shape": c.shape})
        if not np.all(np.isfinite(c)):
            raise SiteError("site coordinates must be finite")
        if c.shape[0] > 1 and np.min(pdist(c)) <= 0.0:
            raise SiteError("sites must be pairwise distinct")
        object.__setattr__(self, "coords", _readonly(c))

    @property
    def m(self) -> int:
        return int(self.coords.shape[0])

    def __len__(self) -> int:
        return self.m

    def distances(self) -> NDArray[np.float64]:
        """Full m x m Euclidean distance matrix."""
        return cdist(self.coords, self.coords)

    def pair_distances(self) -> NDArray[np.float64]:
        """Condensed distances for i < j, in scipy's pdist order."""
        return pdist(self.coords)

    def subset(self, idx: ArrayLike) -> SiteSet:
        return SiteSet(self.coords[np.asarray(idx, dtype=int)])

    def concat(self, other: SiteSet) -> SiteSet:
        return SiteSet(np.vstack([self.coords, other.coords]))


@dataclass(frozen=True, eq=False)
class CorrMatrix:
    sigma: NDArray[np.float64]
    chol: NDArray[np.float64]
    jitter: float = 0.0
    params: MaternParams | None = field(default=None)

    @property
    def m(self) -> int:
        return int(self.sigma.shape[0])


def matern_rho(h: ArrayLike, p: MaternParams) -> NDArray[np.float64] | float:
    """
    Matern correlation 2^{1-eta}/Gamma(eta) * u^eta * K_eta(u) with u = 2 sqrt(eta) h / phi.

    Reduces to exp(-sqrt(2) h / phi) at eta = 0.5.
    """
    h = np.asarray(h, dtype=float)
    if np.any(h < 0.0):
        raise InvalidParameterError("distances must be non-negative")
    u = 2.0 * np.sqrt(p.eta) * h / p.phi
    out = np.ones_like(u)
    pos = u > 0.0
    if np.any(pos):
        up = u[pos]
        logrho = (
            (1.0 - p.eta) * np.log(2.0)
            - sc.gammaln(p.eta)
            + p.eta * np.log(up)
            + log_bessel_k(p.eta, up)
        )
        out[pos] = np.exp(logrho)
    out = np.clip(np.nan_to_num(out, nan=0.0), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def cholesky_with_jitter(a: NDArray[np.float64], *, what: str = "matrix") -> tuple[NDArray[np.float64], float]:
    """
    Lower Cholesky factor of `a`, adding 1e-10 to the diagonal and escalating
    by x10 up to 1e-6 when the plain factorization fails.
    """
    try:
        return np.linalg.cholesky(a), 0.0
    except np.linalg.LinAlgError:
        pass

    eye = np.eye(a.shape[0])
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1.0 + 1e-9):
        try:
            L = np.linalg.cholesky(a + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
            continue
        log = logger.warning if jitter > JITTER_WARN else logger.debug
        log("%s needed diagonal jitter %.1e", what, jitter)
        return L, jitter

    raise NumericalError(f"Cholesky failed for {what} after maximum jitter", context={"jitter": JITTER_MAX})


def build_corr_matrix(sites: SiteSet, p: MaternParams) -> CorrMatrix:
    sigma = matern_rho(sites.distances(), p)
    sigma = np.atleast_2d(sigma)
    sigma = 0.5 * (sigma + sigma.T)
    np.fill_diagonal(sigma, 1.0)
    chol, jitter = cholesky_with_jitter(sigma, what="correlation matrix")
    return CorrMatrix(sigma=_readonly(sigma), chol=_readonly(chol), jitter=jitter, params=p)


def avg_variance(corr: CorrMatrix) -> float:
    """Variance of the spatial average of W: m^-2 1' Sigma 1."""
    m = corr.m
    return float(np.sum(corr.sigma) / (m * m))


def study_sites(label_or_m: str | int, seed: int, domain: float = STUDY_DOMAIN) -> SiteSet:
    """Uniform sites on [0, domain]^2 for a configuration label (A-D) or an explicit m."""
    if isinstance(label_or_m, str):
        key = label_or_m.strip().upper()
        if key not in STUDY_DESIGNS:
            raise InvalidParameterError("unknown study configuration", context={"label": label_or_m})
        m = STUDY_DESIGNS[key][0]
    else:
        m = int(label_or_m)
    if m < 1:
        raise InvalidParameterError("number of sites must be positive", context={"m": m})
    rng = np.random.default_rng(int(seed))
    return SiteSet(rng.uniform(0.0, domain, size=(m, 2)))


def study_design(label: str) -> tuple[int, int]:
    key = label.strip().upper()
    if key not in STUDY_DESIGNS:
        raise InvalidParameterError("unknown study configuration", context={"label": label})
    return STUDY_DESIGNS[key]

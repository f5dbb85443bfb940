"""Special functions and Gaussian density kernels."""
from __future__ import annotations

import numpy as np
import scipy.special as sc
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import solve_triangular

from ..core.errors import InvalidParameterError
from ..core.limits import CDF_CEIL, CDF_FLOOR

_LOG_2PI = float(np.log(2.0 * np.pi))


def std_normal_cdf(x: ArrayLike) -> NDArray[np.float64] | float:
    """Standard normal cdf, clamped to [1e-300, 1 - 1e-16]."""
    out = np.clip(sc.ndtr(np.asarray(x, dtype=float)), CDF_FLOOR, CDF_CEIL)
    return float(out) if out.ndim == 0 else out


def std_normal_ppf(u: ArrayLike) -> NDArray[np.float64] | float:
    """Inverse of the standard normal cdf."""
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise InvalidParameterError("probabilities must lie in (0, 1)")
    out = sc.ndtri(u)
    return float(out) if out.ndim == 0 else out


def student_t_cdf(x: ArrayLike, nu: float) -> NDArray[np.float64] | float:
    """
    Student t cdf with `nu` degrees of freedom via the regularized incomplete beta.

    T(x) = 1 - I_{nu/(nu+x^2)}(nu/2, 1/2) / 2 for x >= 0, mirrored for x < 0.
    """
    if not nu > 0:
        raise InvalidParameterError("degrees of freedom must be positive", context={"nu": nu})
    x = np.asarray(x, dtype=float)
    tail = 0.5 * sc.betainc(0.5 * nu, 0.5, nu / (nu + x * x))
    out = np.where(x >= 0.0, 1.0 - tail, tail)
    out = np.clip(out, CDF_FLOOR, CDF_CEIL)
    return float(out) if out.ndim == 0 else out


def bessel_k(eta: float, x: ArrayLike) -> NDArray[np.float64] | float:
    """Modified Bessel function of the second kind; K_{-eta} = K_eta."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise InvalidParameterError("bessel_k needs a positive argument")
    out = sc.kv(abs(eta), x)
    return float(out) if out.ndim == 0 else out


def log_bessel_k(eta: float, x: ArrayLike) -> NDArray[np.float64]:
    """log K_eta(x) through the exponentially scaled kve, finite for large x."""
    x = np.asarray(x, dtype=float)
    return np.log(sc.kve(abs(eta), x)) - x


def mvn_logpdf(z: ArrayLike, chol: NDArray[np.float64]) -> NDArray[np.float64] | float:
    """
    Log density of N(0, L L^T) at z, where `chol` is the lower factor L.

    `z` may be a single vector of length m or an (n, m) matrix of rows.
    """
    L = np.asarray(chol, dtype=float)
    z = np.asarray(z, dtype=float)
    m = L.shape[0]
    if L.ndim != 2 or L.shape[1] != m:
        raise InvalidParameterError("chol must be square", context={"shape": L.shape})
    if z.shape[-1] != m:
        raise InvalidParameterError(
            "dimension mismatch between z and chol",
            context={"z": z.shape, "chol": L.shape},
        )
    diag = np.diag(L)
    if np.any(diag <= 0.0):
        raise InvalidParameterError("chol must have a positive diagonal")

    sol = solve_triangular(L, np.atleast_2d(z).T, lower=True, check_finite=False)
    quad = np.sum(sol * sol, axis=0)
    out = -0.5 * m * _LOG_2PI - np.sum(np.log(diag)) - 0.5 * quad
    return float(out[0]) if z.ndim == 1 else out

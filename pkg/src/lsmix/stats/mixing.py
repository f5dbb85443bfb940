"""
Catalogue of (S, R) mixing laws.

Every variant samples through inverse cdfs of independent open-interval
uniforms, so a fixed uniform array gives draws that move smoothly with the
parameters (common random numbers inside optimizer loops).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from typing import ClassVar, Literal

import numpy as np
import scipy.special as sc
from numpy.typing import ArrayLike, NDArray

from ..core.classification import Step1Class
from ..core.errors import ConfigError, InvalidParameterError
from ..core.limits import GPD_XI_ZERO

logger = logging.getLogger(__name__)

LocationSupport = Literal["none", "positive", "real"]

_TINY = np.finfo(float).tiny
_LOG_HALF = float(np.log(0.5))
_BELOW_ONE = float(np.nextafter(1.0, 0.0))


def open_uniform(rng: np.random.Generator, shape: int | tuple[int, ...]) -> NDArray[np.float64]:
    """Uniforms on the open interval (0, 1)."""
    k = rng.integers(0, 2**53, size=shape, dtype=np.int64)
    # the top integer rounds to 1.0
    return np.minimum((k.astype(float) + 0.5) / float(2**53), _BELOW_ONE)


def _exp_quantile(u: NDArray, rate: float) -> NDArray:
    return -np.log1p(-u) / rate


def _gamma_quantile(u: NDArray, shape: float, rate: float) -> NDArray:
    return np.maximum(sc.gammaincinv(shape, u), _TINY) / rate


def _exp_logpdf(x: float, rate: float) -> float:
    return float(np.log(rate) - rate * x)


def _gamma_logpdf(x: float, shape: float, rate: float) -> float:
    return float(shape * np.log(rate) - sc.gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x)


def al_cdf(x: ArrayLike, lam1: float, lam2: float) -> NDArray[np.float64] | float:
    """
    Asymmetric Laplace cdf of E1 - E2 with E1 ~ E(lam1), E2 ~ E(lam2).

    1 - lam2/(lam1+lam2) exp(-lam1 x) for x >= 0, lam1/(lam1+lam2) exp(lam2 x) below.
    """
    if not (lam1 > 0 and lam2 > 0):
        raise InvalidParameterError("rates must be positive", context={"lam1": lam1, "lam2": lam2})
    x = np.asarray(x, dtype=float)
    tot = lam1 + lam2
    with np.errstate(over="ignore"):
        upper = 1.0 - lam2 / tot * np.exp(-lam1 * np.maximum(x, 0.0))
        lower = lam1 / tot * np.exp(lam2 * np.minimum(x, 0.0))
    out = np.where(x >= 0.0, upper, lower)
    return float(out) if out.ndim == 0 else out


def gpd_quantile(u: ArrayLike, sigma: float, gamma: float) -> NDArray[np.float64] | float:
    """Quantile of GPD(sigma, gamma): sigma((1-u)^-gamma - 1)/gamma, -sigma log(1-u) at gamma=0."""
    if not sigma > 0:
        raise InvalidParameterError("GPD scale must be positive", context={"sigma": sigma})
    u = np.asarray(u, dtype=float)
    if np.any((u < 0.0) | (u > 1.0)):
        raise InvalidParameterError("probabilities must lie in [0, 1)")
    if np.any(u >= 1.0) and gamma >= 0.0:
        raise InvalidParameterError("GPD quantile at u=1 is infinite for gamma >= 0")
    with np.errstate(divide="ignore"):
        log_tail = np.log1p(-u)
        if abs(gamma) < GPD_XI_ZERO:
            out = -sigma * log_tail
        else:
            # gamma < 0 and u = 1 give expm1(-inf) = -1, the upper endpoint
            out = sigma * np.expm1(-gamma * log_tail) / gamma
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LatentDraw:
    """One (s, r) pair with the base variables that generated it."""
    s: float
    r: float
    latent: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not self.r > 0:
            raise InvalidParameterError("scale draw must be positive", context={"r": self.r})


@dataclass(frozen=True, eq=False)
class LatentBatch:
    s: NDArray[np.float64]
    r: NDArray[np.float64]
    latent: NDArray[np.float64]

    def __len__(self) -> int:
        return int(self.s.shape[0])

    def draw(self, i: int) -> LatentDraw:
        return LatentDraw(float(self.s[i]), float(self.r[i]), tuple(float(v) for v in self.latent[i]))


@dataclass(frozen=True)
class MixingSpec:
    """
    Base class of the mixing catalogue.

    Subclasses declare their parameters as dataclass fields and implement the
    latent construction. Positive parameters are searched on the log scale.
    """
    name: ClassVar[str] = ""
    latent_names: ClassVar[tuple[str, ...]] = ()
    step1_class: ClassVar[Step1Class] = Step1Class.PURE_GAUSSIAN
    location_support: ClassVar[LocationSupport] = "none"
    has_scale: ClassVar[bool] = False
    unbounded_params: ClassVar[frozenset[str]] = frozenset()

    def __post_init__(self) -> None:
        for f in fields(self):
            v = float(getattr(self, f.name))
            if not np.isfinite(v):
                raise InvalidParameterError(f"{self.name}: {f.name} must be finite")
            if f.name not in self.unbounded_params and not v > 0:
                raise InvalidParameterError(
                    f"{self.name}: {f.name} must be positive", context={f.name: v}
                )
            object.__setattr__(self, f.name, v)

    # parameters -----------------------------------------------------------

    @classmethod
    def param_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def params(self) -> dict[str, float]:
        return {n: float(getattr(self, n)) for n in self.param_names()}

    @property
    def n_params(self) -> int:
        return len(self.param_names())

    @property
    def latent_dim(self) -> int:
        return len(self.latent_names)

    def to_unconstrained(self) -> NDArray[np.float64]:
        return np.array(
            [v if n in self.unbounded_params else np.log(v) for n, v in self.params().items()],
            dtype=float,
        )

    def from_unconstrained(self, v: ArrayLike) -> MixingSpec:
        v = np.atleast_1d(np.asarray(v, dtype=float))
        names = self.param_names()
        if v.shape[0] != len(names):
            raise InvalidParameterError("parameter vector has the wrong length", context={"model": self.name})
        kw = {n: (float(x) if n in self.unbounded_params else float(np.exp(x))) for n, x in zip(names, v)}
        return type(self)(**kw)

    # construction ---------------------------------------------------------

    def latent_from_uniform(self, u: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.empty((u.shape[0], 0))

    def sr_from_latent(self, latent: NDArray[np.float64]) -> tuple[NDArray, NDArray]:
        n = latent.shape[0]
        return np.zeros(n), np.ones(n)

    def latent_logpdf_terms(self, latent: NDArray[np.float64]) -> float:
        return 0.0

    def sr_logpdf(self, s: float, r: float) -> float | None:
        return 0.0 if (s == 0.0 and r == 1.0) else -np.inf

    def initial_latent(self, s: float, r: float) -> tuple[float, ...]:
        """Latent coordinates mapping onto a given (s, r), used to start chains."""
        return ()

    def __str__(self) -> str:
        inner = ", ".join(f"{k}={v:g}" for k, v in self.params().items())
        return f"{self.name}({inner})"


@dataclass(frozen=True)
class Gaussian(MixingSpec):
    name: ClassVar[str] = "gaussian"


@dataclass(frozen=True)
class LM1(MixingSpec):
    lam: float = 1.0

    name: ClassVar[str] = "lm1"
    latent_names: ClassVar[tuple[str, ...]] = ("s",)
    step1_class: ClassVar[Step1Class] = Step1Class.LOCATION
    location_support: ClassVar[LocationSupport] = "positive"

    def latent_from_uniform(self, u):
        return _exp_quantile(u[:, :1], self.lam)

    def sr_from_latent(self, latent):
        return latent[:, 0].copy(), np.ones(latent.shape[0])

    def latent_logpdf_terms(self, latent):
        (s,) = latent
        return _check_nonneg(self, s) + _exp_logpdf(s, self.lam)

    def sr_logpdf(self, s, r):
        if r != 1.0 or s < 0.0:
            return -np.inf
        return _exp_logpdf(s, self.lam)

    def initial_latent(self, s, r):
        return (max(s, 1e-3),)


@dataclass(frozen=True)
class LM2(MixingSpec):
    lam1: float = 1.0
    lam2: float = 1.0

    name: ClassVar[str] = "lm2"
    latent_names: ClassVar[tuple[str, ...]] = ("e1", "e2")
    step1_class: ClassVar[Step1Class] = Step1Class.LOCATION
    location_support: ClassVar[LocationSupport] = "real"

    def latent_from_uniform(self, u):
        return np.column_stack([_exp_quantile(u[:, 0], self.lam1), _exp_quantile(u[:, 1], self.lam2)])

    def sr_from_latent(self, latent):
        return latent[:, 0] - latent[:, 1], np.ones(latent.shape[0])

    def latent_logpdf_terms(self, latent):
        e1, e2 = latent
        return (
            _check_nonneg(self, e1, e2)
            + _exp_logpdf(e1, self.lam1)
            + _exp_logpdf(e2, self.lam2)
        )

    def sr_logpdf(self, s, r):
        if r != 1.0:
            return -np.inf
        return _al_logpdf(s, self.lam1, self.lam2)

    def initial_latent(self, s, r):
        return (max(s, 0.0) + 1e-3, max(-s, 0.0) + 1e-3)


@dataclass(frozen=True)
class SM1(MixingSpec):
    """Laplace process: R = sqrt(E), E ~ E(1/2)."""
    name: ClassVar[str] = "sm1"
    latent_names: ClassVar[tuple[str, ...]] = ("e",)
    step1_class: ClassVar[Step1Class] = Step1Class.SCALE
    has_scale: ClassVar[bool] = True

    def latent_from_uniform(self, u):
        return np.maximum(_exp_quantile(u[:, :1], 0.5), _TINY)

    def sr_from_latent(self, latent):
        return np.zeros(latent.shape[0]), np.sqrt(latent[:, 0])

    def latent_logpdf_terms(self, latent):
        (e,) = latent
        return _check_pos(self, e) + _exp_logpdf(e, 0.5)

    def sr_logpdf(self, s, r):
        if s != 0.0:
            return -np.inf
        return float(np.log(r) - 0.5 * r * r)

    def initial_latent(self, s, r):
        return (r * r,)


@dataclass(frozen=True)
class SM2(MixingSpec):
    alpha: float = 1.0

    name: ClassVar[str] = "sm2"
    latent_names: ClassVar[tuple[str, ...]] = ("g",)
    step1_class: ClassVar[Step1Class] = Step1Class.SCALE
    has_scale: ClassVar[bool] = True

    def latent_from_uniform(self, u):
        return _gamma_quantile(u[:, :1], self.alpha, 1.0)

    def sr_from_latent(self, latent):
        return np.zeros(latent.shape[0]), np.sqrt(latent[:, 0])

    def latent_logpdf_terms(self, latent):
        (g,) = latent
        return _check_pos(self, g) + _gamma_logpdf(g, self.alpha, 1.0)

    def sr_logpdf(self, s, r):
        if s != 0.0:
            return -np.inf
        # G = R^2 with |dG/dR| = 2R
        return _gamma_logpdf(r * r, self.alpha, 1.0) + float(np.log(2.0 * r))

    def initial_latent(self, s, r):
        return (r * r,)


@dataclass(frozen=True)
class SM3(MixingSpec):
    """Student t process: R = 1/sqrt(G), G ~ Gamma(nu/2, nu/2)."""
    nu: float = 2.0

    name: ClassVar[str] = "sm3"
    latent_names: ClassVar[tuple[str, ...]] = ("g",)
    step1_class: ClassVar[Step1Class] = Step1Class.SCALE
    has_scale: ClassVar[bool] = True

    def latent_from_uniform(self, u):
        return _gamma_quantile(u[:, :1], 0.5 * self.nu, 0.5 * self.nu)

    def sr_from_latent(self, latent):
        return np.zeros(latent.shape[0]), 1.0 / np.sqrt(latent[:, 0])

    def latent_logpdf_terms(self, latent):
        (g,) = latent
        return _check_pos(self, g) + _gamma_logpdf(g, 0.5 * self.nu, 0.5 * self.nu)

    def sr_logpdf(self, s, r):
        if s != 0.0:
            return -np.inf
        # G = R^-2 with |dG/dR| = 2 R^-3
        return _gamma_logpdf(r**-2, 0.5 * self.nu, 0.5 * self.nu) + float(np.log(2.0) - 3.0 * np.log(r))

    def initial_latent(self, s, r):
        return (r**-2,)


@dataclass(frozen=True)
class SM4(MixingSpec):
    """R = sqrt(E)/G with E ~ E(1/2), G ~ Gamma(1/gamma, 1/gamma); no closed-form R density."""
    gamma: float = 1.0

    name: ClassVar[str] = "sm4"
    latent_names: ClassVar[tuple[str, ...]] = ("e", "g")
    step1_class: ClassVar[Step1Class] = Step1Class.SCALE
    has_scale: ClassVar[bool] = True

    def latent_from_uniform(self, u):
        a = 1.0 / self.gamma
        return np.column_stack([
            np.maximum(_exp_quantile(u[:, 0], 0.5), _TINY),
            _gamma_quantile(u[:, 1], a, a),
        ])

    def sr_from_latent(self, latent):
        return np.zeros(latent.shape[0]), np.sqrt(latent[:, 0]) / latent[:, 1]

    def latent_logpdf_terms(self, latent):
        e, g = latent
        a = 1.0 / self.gamma
        return _check_pos(self, e, g) + _exp_logpdf(e, 0.5) + _gamma_logpdf(g, a, a)

    def sr_logpdf(self, s, r):
        return None

    def initial_latent(self, s, r):
        return (r * r, 1.0)


@dataclass(frozen=True)
class SM5(MixingSpec):
    """R ~ GPD(1, gamma); gamma may take any real value."""
    gamma: float = 0.0

    name: ClassVar[str] = "sm5"
    latent_names: ClassVar[tuple[str, ...]] = ("r",)
    step1_class: ClassVar[Step1Class] = Step1Class.SCALE
    has_scale: ClassVar[bool] = True
    unbounded_params: ClassVar[frozenset[str]] = frozenset({"gamma"})

    def latent_from_uniform(self, u):
        return np.maximum(np.asarray(gpd_quantile(u[:, :1], 1.0, self.gamma)), _TINY)

    def sr_from_latent(self, latent):
        return np.zeros(latent.shape[0]), latent[:, 0].copy()

    def _log_r(self, r: float) -> float:
        if r <= 0.0 or (self.gamma < 0.0 and r >= -1.0 / self.gamma):
            return -np.inf
        if abs(self.gamma) < GPD_XI_ZERO:
            return -r
        return float(-(1.0 / self.gamma + 1.0) * np.log1p(self.gamma * r))

    def latent_logpdf_terms(self, latent):
        (r,) = latent
        val = self._log_r(r)
        if not np.isfinite(val):
            raise InvalidParameterError("sm5: latent scale outside the GPD support", context={"r": r})
        return val

    def sr_logpdf(self, s, r):
        if s != 0.0:
            return -np.inf
        return self._log_r(r)

    def initial_latent(self, s, r):
        if self.gamma < 0.0:
            r = min(r, -0.5 / self.gamma)
        return (r,)


@dataclass(frozen=True)
class LSM1(MixingSpec):
    """S ~ E(lam) and R = sqrt(E), E ~ E(1/2), independent."""
    lam: float = 1.0

    name: ClassVar[str] = "lsm1"
    latent_names: ClassVar[tuple[str, ...]] = ("s", "e")
    step1_class: ClassVar[Step1Class] = Step1Class.LOCATION_SCALE
    location_support: ClassVar[LocationSupport] = "positive"
    has_scale: ClassVar[bool] = True

    def latent_from_uniform(self, u):
        return np.column_stack([
            _exp_quantile(u[:, 0], self.lam),
            np.maximum(_exp_quantile(u[:, 1], 0.5), _TINY),
        ])

    def sr_from_latent(self, latent):
        return latent[:, 0].copy(), np.sqrt(latent[:, 1])

    def latent_logpdf_terms(self, latent):
        s, e = latent
        return _check_nonneg(self, s) + _check_pos(self, e) + _exp_logpdf(s, self.lam) + _exp_logpdf(e, 0.5)

    def sr_logpdf(self, s, r):
        if s < 0.0:
            return -np.inf
        return _exp_logpdf(s, self.lam) + float(np.log(r) - 0.5 * r * r)

    def initial_latent(self, s, r):
        return (max(s, 1e-3), r * r)


@dataclass(frozen=True)
class LSM2(MixingSpec):
    """S ~ AL(lam1, lam2) and R = sqrt(E), E ~ E(1/2), independent."""
    lam1: float = 1.0
    lam2: float = 1.0

    name: ClassVar[str] = "lsm2"
    latent_names: ClassVar[tuple[str, ...]] = ("e1", "e2", "e")
    step1_class: ClassVar[Step1Class] = Step1Class.LOCATION_SCALE
    location_support: ClassVar[LocationSupport] = "real"
    has_scale: ClassVar[bool] = True

    def latent_from_uniform(self, u):
        return np.column_stack([
            _exp_quantile(u[:, 0], self.lam1),
            _exp_quantile(u[:, 1], self.lam2),
            np.maximum(_exp_quantile(u[:, 2], 0.5), _TINY),
        ])

    def sr_from_latent(self, latent):
        return latent[:, 0] - latent[:, 1], np.sqrt(latent[:, 2])

    def latent_logpdf_terms(self, latent):
        e1, e2, e = latent
        return (
            _check_nonneg(self, e1, e2)
            + _check_pos(self, e)
            + _exp_logpdf(e1, self.lam1)
            + _exp_logpdf(e2, self.lam2)
            + _exp_logpdf(e, 0.5)
        )

    def sr_logpdf(self, s, r):
        return _al_logpdf(s, self.lam1, self.lam2) + float(np.log(r) - 0.5 * r * r)

    def initial_latent(self, s, r):
        return (max(s, 0.0) + 1e-3, max(-s, 0.0) + 1e-3, r * r)


def _al_logpdf(s: float, lam1: float, lam2: float) -> float:
    base = np.log(lam1) + np.log(lam2) - np.log(lam1 + lam2)
    return float(base - lam1 * s if s >= 0.0 else base + lam2 * s)


def _check_nonneg(spec: MixingSpec, *vals: float) -> float:
    if any(v < 0.0 for v in vals):
        raise InvalidParameterError(f"{spec.name}: latent component outside support", context={"latent": vals})
    return 0.0


def _check_pos(spec: MixingSpec, *vals: float) -> float:
    if any(v <= 0.0 for v in vals):
        raise InvalidParameterError(f"{spec.name}: latent component outside support", context={"latent": vals})
    return 0.0


MIXING_MODELS: dict[str, type[MixingSpec]] = {
    cls.name: cls for cls in (Gaussian, LM1, LM2, SM1, SM2, SM3, SM4, SM5, LSM1, LSM2)
}


def mixing_from_name(name: str, params: dict[str, float] | None = None) -> MixingSpec:
    """Build a variant from its config name and a flat parameter map."""
    key = (name or "").strip().lower()
    cls = MIXING_MODELS.get(key)
    if cls is None:
        raise ConfigError(f"Unknown model name: {name!r}", context={"known": sorted(MIXING_MODELS)})
    params = dict(params or {})
    unknown = set(params) - set(cls.param_names())
    if unknown:
        raise ConfigError(f"Unknown parameters for {key}", context={"unknown": sorted(unknown)})
    return cls(**{k: float(v) for k, v in params.items()})


# operations ------------------------------------------------------------------


def sr_from_uniform(spec: MixingSpec, u: NDArray[np.float64]) -> LatentBatch:
    """(S, R) and latent variables from an (n, latent_dim) matrix of open uniforms."""
    latent = spec.latent_from_uniform(u)
    s, r = spec.sr_from_latent(latent)
    return LatentBatch(s=np.asarray(s, dtype=float), r=np.asarray(r, dtype=float), latent=latent)


def sample_sr_batch(spec: MixingSpec, rng: np.random.Generator, size: int) -> LatentBatch:
    """`size` independent draws of (S, R) and their latent variables."""
    return sr_from_uniform(spec, open_uniform(rng, (int(size), spec.latent_dim)))


def sample_sr(spec: MixingSpec, rng: np.random.Generator) -> LatentDraw:
    return sample_sr_batch(spec, rng, 1).draw(0)


def logdensity_sr(spec: MixingSpec, s: float, r: float) -> float | None:
    """
    Joint log density of the non-degenerate components of (S, R) at (s, r).

    Returns None for SM4, whose R has no elementary density.
    """
    if not r > 0:
        raise InvalidParameterError("scale must be positive", context={"r": r})
    return spec.sr_logpdf(float(s), float(r))


def logdensity_latent(spec: MixingSpec, latent: ArrayLike) -> float:
    """Sum of the log densities of the independent base variables."""
    vec = tuple(float(v) for v in np.atleast_1d(np.asarray(latent, dtype=float)))
    if len(vec) != spec.latent_dim:
        raise InvalidParameterError(
            f"{spec.name}: latent vector has dimension {len(vec)}, expected {spec.latent_dim}"
        )
    return float(spec.latent_logpdf_terms(vec))


def latent_to_draw(spec: MixingSpec, latent: ArrayLike) -> LatentDraw:
    vec = np.atleast_2d(np.asarray(latent, dtype=float))
    s, r = spec.sr_from_latent(vec)
    return LatentDraw(float(s[0]), float(r[0]), tuple(float(v) for v in vec[0]))

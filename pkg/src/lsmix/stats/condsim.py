"""
Conditional simulation of X2 | X1 = x1.

(S, R) | X1 is sampled by random-walk Metropolis-Hastings; each retained pair
is completed by a draw of the standardized Gaussian field at the targets.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import solve_triangular

from ..core.errors import ConvergenceError, DataError, InvalidParameterError, SiteError
from ..core.limits import (
    MCMC_ACCEPT_HIGH,
    MCMC_ACCEPT_LOW,
    MCMC_BURNIN,
    MCMC_PROP_SD,
    MCMC_STEPS,
    MCMC_THIN,
)
from .correlation import SiteSet, build_corr_matrix, cholesky_with_jitter
from .marginal import EgpdParams, egpd_quantile
from .mixing import Gaussian, LatentDraw, MixingSpec, latent_to_draw, logdensity_latent, logdensity_sr
from .numkernel import mvn_logpdf
from .process import ModelParams, MonteCarloMarginal, mc_cdf

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CondSimConfig:
    """MCMC controls: `steps` total iterations of which the first `burnin` are discarded."""
    steps: int = MCMC_STEPS
    burnin: int = MCMC_BURNIN
    thin: int = MCMC_THIN
    prop_sd_s: float = MCMC_PROP_SD
    prop_sd_logr: float = MCMC_PROP_SD
    adapt: bool = False

    def __post_init__(self) -> None:
        if self.thin < 1:
            raise InvalidParameterError("thinning stride must be >= 1", context={"thin": self.thin})
        if not (0 <= self.burnin < self.steps):
            raise InvalidParameterError(
                "burn-in must be shorter than the chain", context={"burnin": self.burnin, "steps": self.steps}
            )
        if not (self.prop_sd_s > 0 and self.prop_sd_logr > 0):
            raise InvalidParameterError("proposal standard deviations must be positive")

    @classmethod
    def for_retained(cls, n_retained: int, **kw) -> CondSimConfig:
        """Chain length chosen so that `n_retained` draws survive burn-in and thinning."""
        burnin = kw.pop("burnin", MCMC_BURNIN)
        thin = kw.pop("thin", MCMC_THIN)
        return cls(steps=burnin + n_retained * thin, burnin=burnin, thin=thin, **kw)

    @property
    def n_retained(self) -> int:
        return (self.steps - self.burnin) // self.thin


@dataclass(frozen=True, eq=False)
class Chain:
    draws: tuple[LatentDraw, ...]
    acceptance_rate: float
    steps: int = 0

    def __len__(self) -> int:
        return len(self.draws)

    @property
    def s(self) -> NDArray[np.float64]:
        return np.array([d.s for d in self.draws])

    @property
    def r(self) -> NDArray[np.float64]:
        return np.array([d.r for d in self.draws])


@dataclass(frozen=True, eq=False)
class ConditionalDraws:
    """Retained draws of X2 (rows) with the chain that produced them."""
    values: NDArray[np.float64]
    chain: Chain
    sites: SiteSet | None = field(default=None)


def _uses_latent(spec: MixingSpec) -> bool:
    return spec.sr_logpdf(0.0, 1.0) is None


def mh_log_accept(
    spec: MixingSpec,
    cand: LatentDraw,
    cur: LatentDraw,
    x1: ArrayLike,
    chol11: NDArray[np.float64],
    *,
    log_location: bool = False,
) -> float:
    """
    Log Metropolis-Hastings acceptance probability for a random-walk move.

    With a closed-form (S, R) density the target is
    f(s, r) phi_m((x1 - s)/r) r^-m; the log-r walk contributes r'/r and,
    when `log_location` is set, the log-s walk contributes s'/s.
    Otherwise the ratio is taken on latent coordinates, all moved by log
    random walks.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    m = x1.shape[0]
    if chol11.shape[0] != m:
        raise InvalidParameterError("dimension mismatch between x1 and chol11")
    if isinstance(spec, Gaussian) or cand == cur:
        return 0.0

    def _lik(d: LatentDraw) -> float:
        return float(mvn_logpdf((x1 - d.s) / d.r, chol11)) - m * np.log(d.r)

    if _uses_latent(spec):
        try:
            lp_cand = logdensity_latent(spec, cand.latent)
        except InvalidParameterError:
            return -np.inf
        lp_cur = logdensity_latent(spec, cur.latent)
        jac = float(np.sum(np.log(cand.latent)) - np.sum(np.log(cur.latent)))
        val = lp_cand + _lik(cand) - lp_cur - _lik(cur) + jac
        return float(min(0.0, val))

    f_cand = logdensity_sr(spec, cand.s, cand.r)
    if not np.isfinite(f_cand):
        return -np.inf
    f_cur = logdensity_sr(spec, cur.s, cur.r)
    val = f_cand + _lik(cand) - f_cur - _lik(cur)
    if spec.has_scale:
        val += np.log(cand.r) - np.log(cur.r)
    if log_location:
        val += np.log(cand.s) - np.log(cur.s)
    return float(min(0.0, val))


class _Posterior:
    """
    Log target of (S, R) | X1 = x1 up to a constant, with L^{-1} x1 and L^{-1} 1
    precomputed so each evaluation costs O(m).
    """

    def __init__(self, spec: MixingSpec, x1: NDArray[np.float64], chol11: NDArray[np.float64]) -> None:
        self.spec = spec
        self.m = x1.shape[0]
        self.a = solve_triangular(chol11, x1, lower=True)
        self.b = solve_triangular(chol11, np.ones(self.m), lower=True)

    def loglik(self, s: float, r: float) -> float:
        resid = self.a - s * self.b
        return -0.5 * float(resid @ resid) / (r * r) - self.m * np.log(r)

    def start(self) -> LatentDraw:
        spec = self.spec
        bb = float(self.b @ self.b)
        s0 = float(self.a @ self.b) / bb if spec.location_support != "none" else 0.0
        if spec.location_support == "positive":
            s0 = max(s0, 1e-2)
        if spec.has_scale:
            resid = self.a - s0 * self.b
            r0 = max(float(np.sqrt(resid @ resid / self.m)), 1e-2)
        else:
            r0 = 1.0
        return latent_to_draw(spec, spec.initial_latent(s0, r0))


def mh_chain(
    params: ModelParams,
    x1: ArrayLike,
    sites1: SiteSet,
    cfg: CondSimConfig | None = None,
    seed: int = 0,
    *,
    chol11: NDArray[np.float64] | None = None,
) -> Chain:
    """
    Random-walk Metropolis-Hastings for (S, R) | X1 = x1.

    s moves additively (on the log scale when S > 0), log r additively; for
    variants without a closed-form (S, R) density every latent coordinate
    moves on the log scale.
    """
    cfg = cfg or CondSimConfig()
    spec = params.mixing
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    if x1.shape[0] != sites1.m:
        raise DataError("x1 length does not match the conditioning sites", context={"x1": x1.shape[0], "m": sites1.m})
    if not np.all(np.isfinite(x1)):
        raise DataError("conditioning values must be finite")

    if isinstance(spec, Gaussian):
        draw = LatentDraw(0.0, 1.0, ())
        return Chain(draws=(draw,) * cfg.n_retained, acceptance_rate=float("nan"), steps=0)

    if chol11 is None:
        chol11 = build_corr_matrix(sites1, params.corr).chol
    post = _Posterior(spec, x1, chol11)
    rng = np.random.default_rng(int(seed))
    latent_mode = _uses_latent(spec)
    log_s = spec.location_support == "positive"

    cur = post.start()
    if latent_mode:
        state = np.log(np.asarray(cur.latent, dtype=float))
        sds = np.full(state.shape[0], cfg.prop_sd_logr)
    else:
        state = np.array([np.log(cur.s) if log_s else cur.s, np.log(cur.r)])
        sds = np.array([cfg.prop_sd_s, cfg.prop_sd_logr])
        free = np.array([spec.location_support != "none", spec.has_scale])
        sds = np.where(free, sds, 0.0)

    def _logtarget(z: NDArray[np.float64]) -> float:
        # includes the random-walk Jacobian: log-scale coordinates add their own log
        if latent_mode:
            lat = np.exp(z)
            try:
                lp = logdensity_latent(spec, lat)
            except InvalidParameterError:
                return -np.inf
            d = latent_to_draw(spec, lat)
            return lp + post.loglik(d.s, d.r) + float(np.sum(z))
        s = float(np.exp(z[0])) if log_s else float(z[0])
        r = float(np.exp(z[1]))
        f = spec.sr_logpdf(s, r)
        if f is None or not np.isfinite(f):
            return -np.inf
        jac = (z[1] if spec.has_scale else 0.0) + (z[0] if log_s else 0.0)
        return f + post.loglik(s, r) + float(jac)

    lt = _logtarget(state)
    if not np.isfinite(lt):
        raise ConvergenceError("chain start has zero posterior density", context={"model": spec.name})

    retained: list[LatentDraw] = []
    accepted = 0
    window = 0
    for k in range(cfg.steps):
        prop = state + sds * rng.standard_normal(state.shape[0])
        lt_prop = _logtarget(prop)
        if np.log(rng.random()) < lt_prop - lt:
            state, lt = prop, lt_prop
            accepted += 1
            window += 1
        if cfg.adapt and k < cfg.burnin and (k + 1) % 100 == 0:
            rate = window / 100.0
            sds = sds * (1.1 if rate > 0.44 else 0.9 if rate < 0.23 else 1.0)
            window = 0
        if k >= cfg.burnin and (k - cfg.burnin + 1) % cfg.thin == 0:
            retained.append(_state_to_draw(spec, state, latent_mode, log_s))

    acc = accepted / cfg.steps
    if accepted == 0:
        raise ConvergenceError("no proposal accepted over the whole chain", context={"steps": cfg.steps})
    if not (MCMC_ACCEPT_LOW <= acc <= MCMC_ACCEPT_HIGH):
        logger.warning("acceptance rate %.3f outside [%.1f, %.1f]", acc, MCMC_ACCEPT_LOW, MCMC_ACCEPT_HIGH)
    logger.info("chain %s: %d retained, acceptance %.3f", spec.name, len(retained), acc)
    return Chain(draws=tuple(retained), acceptance_rate=float(acc), steps=cfg.steps)


def _state_to_draw(spec: MixingSpec, z: NDArray[np.float64], latent_mode: bool, log_s: bool) -> LatentDraw:
    if latent_mode:
        return latent_to_draw(spec, np.exp(z))
    s = float(np.exp(z[0])) if log_s else float(z[0])
    r = float(np.exp(z[1]))
    return LatentDraw(s, r, ())


class GaussianConditioner:
    """
    N(mu_{2|1}, Sigma_{2|1}) for the Gaussian block (W1, W2):
    mu = Sigma21 Sigma11^-1 w1, Sigma_{2|1} = Sigma22 - Sigma21 Sigma11^-1 Sigma12.
    """

    def __init__(self, sigma11: ArrayLike, sigma21: ArrayLike, sigma22: ArrayLike) -> None:
        s11 = np.atleast_2d(np.asarray(sigma11, dtype=float))
        s21 = np.atleast_2d(np.asarray(sigma21, dtype=float))
        s22 = np.atleast_2d(np.asarray(sigma22, dtype=float))
        if s21.shape != (s22.shape[0], s11.shape[0]):
            raise InvalidParameterError(
                "covariance blocks are not conformable",
                context={"s11": s11.shape, "s21": s21.shape, "s22": s22.shape},
            )
        L11, _ = cholesky_with_jitter(s11, what="Sigma11")
        # K = Sigma21 Sigma11^-1
        tmp = solve_triangular(L11, s21.T, lower=True)
        self.weights = solve_triangular(L11.T, tmp, lower=False).T
        cond = s22 - tmp.T @ tmp
        cond = 0.5 * (cond + cond.T)
        self.cov = cond
        self.chol, _ = cholesky_with_jitter(cond, what="conditional covariance")

    def mean(self, w1: ArrayLike) -> NDArray[np.float64]:
        return np.asarray(w1, dtype=float) @ self.weights.T

    def sample(self, w1: ArrayLike, rng: np.random.Generator) -> NDArray[np.float64]:
        """One draw per row of w1 (or a single draw for a vector)."""
        mu = self.mean(w1)
        z = rng.standard_normal(mu.shape)
        return mu + z @ self.chol.T


def gaussian_conditional(
    sigma11: ArrayLike,
    sigma21: ArrayLike,
    sigma22: ArrayLike,
    w1: ArrayLike,
    seed: int | np.random.Generator = 0,
) -> NDArray[np.float64]:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(int(seed))
    return GaussianConditioner(sigma11, sigma21, sigma22).sample(w1, rng)


def _check_disjoint(sites1: SiteSet, sites2: SiteSet) -> None:
    if sites2.m < 1:
        raise SiteError("no target sites")
    d = np.linalg.norm(sites1.coords[:, None, :] - sites2.coords[None, :, :], axis=2)
    if np.any(d == 0.0):
        raise SiteError("conditioning and target sites must be disjoint")


def conditional_simulate(
    params: ModelParams,
    sites1: SiteSet,
    x1: ArrayLike,
    sites2: SiteSet,
    cfg: CondSimConfig | None = None,
    seed: int = 0,
) -> ConditionalDraws:
    cfg = cfg or CondSimConfig()
    _check_disjoint(sites1, sites2)
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    m1 = sites1.m
    full = build_corr_matrix(sites1.concat(sites2), params.corr).sigma
    s11, s21, s22 = full[:m1, :m1], full[m1:, :m1], full[m1:, m1:]
    conditioner = GaussianConditioner(s11, s21, s22)
    chol11, _ = cholesky_with_jitter(np.array(s11), what="Sigma11")

    chain = mh_chain(params, x1, sites1, cfg, seed, chol11=chol11)
    s = chain.s[:, None]
    r = chain.r[:, None]
    w1 = (x1[None, :] - s) / r
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(1,)))
    w2 = conditioner.sample(w1, rng)
    return ConditionalDraws(values=s + r * w2, chain=chain, sites=sites2)


@dataclass(frozen=True, eq=False)
class PredictionSummary:
    median: NDArray[np.float64]
    uniform: NDArray[np.float64] | None = None
    observed: NDArray[np.float64] | None = None


def conditional_predict(
    draws: ConditionalDraws | ArrayLike,
    table: MonteCarloMarginal | None = None,
    egpd: Sequence[EgpdParams] | None = None,
) -> PredictionSummary:
    """
    Componentwise medians of conditional draws, optionally mapped to the
    uniform scale through `table` and then to the observed scale through one
    EGPD parameter set per target site.
    """
    values = draws.values if isinstance(draws, ConditionalDraws) else np.asarray(draws, dtype=float)
    values = np.atleast_2d(values)
    if values.size == 0 or values.shape[0] == 0:
        raise DataError("no conditional draws to summarize")
    med = np.median(values, axis=0)
    if table is None:
        return PredictionSummary(median=med)
    u = np.asarray(mc_cdf(table, med))
    if egpd is None:
        return PredictionSummary(median=med, uniform=u)
    if len(egpd) != med.shape[0]:
        raise DataError("one EGPD parameter set per target site is required")
    y = np.array([float(egpd_quantile(ui, p)) for ui, p in zip(u, egpd)])
    return PredictionSummary(median=med, uniform=u, observed=y)

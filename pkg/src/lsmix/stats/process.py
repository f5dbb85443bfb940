from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.stats import rankdata

from ..core.errors import DataError, InvalidParameterError
from ..core.limits import MC_TABLE_SIZE, MIN_MC_SAMPLE, SIM_CHUNK_ROWS
from ..core.workers import WorkerConfig, chunk_bounds, derive_rng, map_indexed
from .correlation import CorrMatrix, MaternParams, SiteSet, build_corr_matrix
from .mixing import MixingSpec, open_uniform, sample_sr_batch, sr_from_uniform

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set: mixing law and Matern correlation."""
    mixing: MixingSpec
    corr: MaternParams

    def to_dict(self) -> dict:
        return {"model": self.mixing.name, "mixing": self.mixing.params(), "matern": self.corr.to_dict()}


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """n replications (rows) observed at m sites (columns)."""
    values: NDArray[np.float64]
    sites: SiteSet

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or v.shape[0] < 1:
            raise DataError("data must be a non-empty (n, m) matrix", context={"shape": v.shape})
        if v.shape[1] != self.sites.m:
            raise DataError(
                "column count does not match the number of sites",
                context={"columns": v.shape[1], "sites": self.sites.m},
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def m(self) -> int:
        return int(self.values.shape[1])

    def with_values(self, values: NDArray[np.float64]) -> DataMatrix:
        return DataMatrix(values, self.sites)


@dataclass(frozen=True, eq=False)
class MonteCarloMarginal:
    """Sorted Monte Carlo sample of S + R W, approximating F_X and its inverse."""
    draws: NDArray[np.float64]

    def __post_init__(self) -> None:
        d = np.sort(np.asarray(self.draws, dtype=float).ravel())
        if d.shape[0] < MIN_MC_SAMPLE:
            raise InvalidParameterError(
                "Monte Carlo table too small", context={"N": int(d.shape[0]), "min": MIN_MC_SAMPLE}
            )
        d.setflags(write=False)
        object.__setattr__(self, "draws", d)

    @property
    def N(self) -> int:
        return int(self.draws.shape[0])

    def knots(self) -> NDArray[np.float64]:
        return (np.arange(1, self.N + 1) - 0.5) / self.N


def simulate(
    params: ModelParams,
    sites: SiteSet,
    n: int,
    seed: int,
    workers: WorkerConfig | None = None,
    corr: CorrMatrix | None = None,
) -> DataMatrix:
    """
    n replications of X = S + R W at the sites.

    Row i draws its mixing uniforms and its Gaussian vector from stream i, so
    the output is identical for any worker count and rows do not depend on n.
    Rows are dispatched to the workers in fixed-size chunks.
    """
    if n < 1:
        raise InvalidParameterError("replication count must be positive", context={"n": n})
    corr = corr or build_corr_matrix(sites, params.corr)
    L = corr.chol
    m = sites.m
    k = params.mixing.latent_dim
    bounds = chunk_bounds(int(n), SIM_CHUNK_ROWS)

    def _chunk(j: int) -> NDArray[np.float64]:
        a, b = bounds[j]
        u = np.empty((b - a, k))
        g = np.empty((b - a, m))
        for i in range(a, b):
            rng = derive_rng(seed, i)
            u[i - a] = open_uniform(rng, k)
            g[i - a] = rng.standard_normal(m)
        batch = sr_from_uniform(params.mixing, u)
        return batch.s[:, None] + batch.r[:, None] * (g @ L.T)

    rows = map_indexed(_chunk, len(bounds), workers)
    logger.debug("simulated %d x %d from %s", n, m, params.mixing)
    return DataMatrix(np.vstack(rows), sites)


def marginal_table(spec: MixingSpec, N: int = MC_TABLE_SIZE, seed: int = 0) -> MonteCarloMarginal:
    if N < MIN_MC_SAMPLE:
        raise InvalidParameterError("Monte Carlo table too small", context={"N": N, "min": MIN_MC_SAMPLE})
    rng = np.random.default_rng(int(seed))
    batch = sample_sr_batch(spec, rng, int(N))
    g = rng.standard_normal(int(N))
    return MonteCarloMarginal(batch.s + batch.r * g)


def mc_cdf(table: MonteCarloMarginal, x: ArrayLike) -> NDArray[np.float64] | float:
    """
    Empirical cdf with order statistic i at (i - 1/2)/N, linear in between and
    clamped to [1/(2N), 1 - 1/(2N)] outside the sample range.
    """
    out = np.interp(np.asarray(x, dtype=float), table.draws, table.knots())
    return float(out) if np.ndim(out) == 0 else out


def mc_quantile(table: MonteCarloMarginal, u: ArrayLike) -> NDArray[np.float64] | float:
    """Linear interpolation between order statistics; clamps to the extreme draws."""
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0.0) | (u >= 1.0)) or np.any(~np.isfinite(u)):
        raise InvalidParameterError("probabilities must lie in (0, 1)")
    out = np.interp(u, table.knots(), table.draws)
    return float(out) if np.ndim(out) == 0 else out


def to_uniform(data: DataMatrix, table: MonteCarloMarginal) -> DataMatrix:
    return data.with_values(np.asarray(mc_cdf(table, data.values)))


def from_uniform(udata: DataMatrix, table: MonteCarloMarginal) -> DataMatrix:
    u = udata.values
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise DataError("uniform data must lie strictly inside (0, 1)")
    return udata.with_values(np.asarray(mc_quantile(table, u)))


def rank_transform(data: DataMatrix) -> DataMatrix:
    """Column-wise ranks scaled by 1/(n+1)."""
    ranks = rankdata(data.values, axis=0, method="average")
    return data.with_values(ranks / (data.n + 1.0))

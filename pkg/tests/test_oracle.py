from __future__ import annotations

import numpy as np
import pytest
from scipy import stats


def _data(values, coords):
    from lsmix.stats.correlation import SiteSet
    from lsmix.stats.process import DataMatrix

    return DataMatrix(np.asarray(values, dtype=float), SiteSet(np.asarray(coords, dtype=float)))


def test_gaussian_oracle_is_the_mvn_likelihood(line_sites, matern):
    from lsmix.stats.correlation import build_corr_matrix
    from lsmix.stats.mixing import Gaussian
    from lsmix.stats.oracle import quad_negloglik_oracle
    from lsmix.stats.process import DataMatrix, ModelParams

    x = np.random.default_rng(0).standard_normal((5, 3))
    sigma = build_corr_matrix(line_sites, matern).sigma
    expected = -stats.multivariate_normal(np.zeros(3), sigma).logpdf(x).sum()
    got = quad_negloglik_oracle(ModelParams(Gaussian(), matern), DataMatrix(x, line_sites))
    assert got == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("x", [-1.5, 0.3, 2.0, 4.5])
def test_lm1_single_site_closed_form(x, matern):
    from lsmix.stats.mixing import LM1
    from lsmix.stats.oracle import quad_negloglik_oracle
    from lsmix.stats.process import ModelParams

    lam = 1.3
    dens = lam * np.exp(0.5 * lam * lam - lam * x) * stats.norm.cdf(x - lam)
    got = quad_negloglik_oracle(ModelParams(LM1(lam=lam), matern), _data([[x]], [[0.0, 0.0]]))
    assert got == pytest.approx(-np.log(dens), abs=1e-7)


def test_sm3_two_sites_is_bivariate_t(matern):
    from lsmix.stats.correlation import SiteSet, build_corr_matrix
    from lsmix.stats.mixing import SM3
    from lsmix.stats.oracle import quad_negloglik_oracle
    from lsmix.stats.process import ModelParams

    coords = [[0.0, 0.0], [30.0, 0.0]]
    nu = 3.0
    sigma = build_corr_matrix(SiteSet(np.asarray(coords)), matern).sigma
    x = np.array([[0.4, -0.3], [2.5, 1.8], [-4.0, 0.1]])
    expected = -stats.multivariate_t(np.zeros(2), sigma, df=nu).logpdf(x).sum()
    got = quad_negloglik_oracle(ModelParams(SM3(nu=nu), matern), _data(x, coords))
    assert got == pytest.approx(expected, abs=1e-6)


def test_oracle_rejects_more_than_three_sites(study10, matern):
    from lsmix.core.errors import InvalidParameterError
    from lsmix.stats.mixing import SM1
    from lsmix.stats.oracle import quad_negloglik_oracle
    from lsmix.stats.process import DataMatrix, ModelParams

    with pytest.raises(InvalidParameterError, match="at most 3 sites"):
        quad_negloglik_oracle(ModelParams(SM1(), matern), DataMatrix(np.zeros((2, 10)), study10))

from __future__ import annotations

import logging

import numpy as np
import pytest
from scipy import stats


def _params(name: str, **kw):
    from lsmix.stats.correlation import MaternParams
    from lsmix.stats.mixing import mixing_from_name
    from lsmix.stats.process import ModelParams

    return ModelParams(mixing_from_name(name, kw), MaternParams(50.0, 0.5))


def _short(**kw):
    from lsmix.stats.condsim import CondSimConfig

    base = {"steps": 3000, "burnin": 500, "thin": 5}
    base.update(kw)
    return CondSimConfig(**base)


def test_mh_log_accept_location_example():
    from lsmix.stats.condsim import mh_log_accept
    from lsmix.stats.mixing import LM1, LatentDraw

    cur = LatentDraw(1.0, 1.0, (1.0,))
    cand = LatentDraw(0.5, 1.0, (0.5,))
    val = mh_log_accept(LM1(lam=1.0), cand, cur, [2.0], np.eye(1))
    assert val == pytest.approx(-0.125, abs=1e-12)


def test_mh_log_accept_is_zero_for_identical_states():
    from lsmix.stats.condsim import mh_log_accept
    from lsmix.stats.mixing import SM1, LatentDraw

    d = LatentDraw(0.0, 1.3, (1.69,))
    assert mh_log_accept(SM1(), d, d, [0.4, -0.2], np.eye(2)) == 0.0


def test_mh_log_accept_scale_walk_includes_jacobian():
    from lsmix.stats.condsim import mh_log_accept
    from lsmix.stats.mixing import SM1, LatentDraw
    from lsmix.stats.numkernel import mvn_logpdf

    x1 = np.array([0.7])
    cur = LatentDraw(0.0, 1.0, (1.0,))
    cand = LatentDraw(0.0, 2.0, (4.0,))

    def target(r):
        return (np.log(r) - 0.5 * r * r) + mvn_logpdf(x1 / r, np.eye(1)) - np.log(r)

    expected = min(0.0, target(2.0) - target(1.0) + np.log(2.0))
    assert mh_log_accept(SM1(), cand, cur, x1, np.eye(1)) == pytest.approx(expected, abs=1e-12)


def test_mh_log_accept_latent_mode_for_sm4():
    from lsmix.stats.condsim import mh_log_accept
    from lsmix.stats.mixing import SM4, LatentDraw, logdensity_latent
    from lsmix.stats.numkernel import mvn_logpdf

    spec = SM4(gamma=1.0)
    x1 = np.array([0.5])
    cur = LatentDraw(0.0, 1.0, (1.0, 1.0))
    cand = LatentDraw(0.0, 2.0, (4.0, 1.0))

    def lik(r):
        return mvn_logpdf(x1 / r, np.eye(1)) - np.log(r)

    expected = (
        logdensity_latent(spec, cand.latent) + lik(2.0)
        - logdensity_latent(spec, cur.latent) - lik(1.0)
        + np.log(4.0)
    )
    assert mh_log_accept(spec, cand, cur, x1, np.eye(1)) == pytest.approx(min(0.0, expected), abs=1e-12)


def test_mh_log_accept_out_of_support_candidate():
    from lsmix.stats.condsim import mh_log_accept
    from lsmix.stats.mixing import LM1, LatentDraw

    cur = LatentDraw(1.0, 1.0, (1.0,))
    cand = LatentDraw(-0.5, 1.0, (-0.5,))
    assert mh_log_accept(LM1(lam=1.0), cand, cur, [2.0], np.eye(1)) == -np.inf


def test_mh_log_accept_dimension_mismatch():
    from lsmix.core.errors import InvalidParameterError
    from lsmix.stats.condsim import mh_log_accept
    from lsmix.stats.mixing import SM1, LatentDraw

    d = LatentDraw(0.0, 1.0, (1.0,))
    with pytest.raises(InvalidParameterError, match="dimension mismatch"):
        mh_log_accept(SM1(), d, d, [1.0, 2.0], np.eye(3))


def test_condsim_config_validation():
    from lsmix.core.errors import InvalidParameterError
    from lsmix.stats.condsim import CondSimConfig

    cfg = CondSimConfig()
    assert cfg.n_retained == 450
    assert CondSimConfig.for_retained(10, burnin=100, thin=5).steps == 150
    with pytest.raises(InvalidParameterError, match="thinning"):
        CondSimConfig(thin=0)
    with pytest.raises(InvalidParameterError, match="burn-in"):
        CondSimConfig(steps=100, burnin=100)
    with pytest.raises(InvalidParameterError, match="proposal"):
        CondSimConfig(prop_sd_s=0.0)


def test_gaussian_chain_is_a_no_op(line_sites):
    from lsmix.stats.condsim import mh_chain

    chain = mh_chain(_params("gaussian"), [0.1, 0.2, 0.3], line_sites, _short())
    assert len(chain) == 500
    assert np.isnan(chain.acceptance_rate)
    assert np.all(chain.s == 0.0) and np.all(chain.r == 1.0)


@pytest.mark.parametrize(
    "name, params",
    [("sm1", {}), ("lm1", {"lam": 1.0}), ("lm2", {"lam1": 1.0, "lam2": 2.0}), ("sm4", {"gamma": 0.5}), ("lsm1", {"lam": 2.0}), ("sm5", {"gamma": -0.2})],
)
def test_chain_runs_and_respects_support(line_sites, name, params):
    from lsmix.stats.condsim import mh_chain

    x1 = np.array([1.2, 0.8, 1.5])
    chain = mh_chain(_params(name, **params), x1, line_sites, _short(adapt=True), seed=4)
    assert len(chain) == 500
    assert 0.0 < chain.acceptance_rate < 1.0
    assert np.all(chain.r > 0.0)
    if name in ("lm1", "lsm1"):
        assert np.all(chain.s >= 0.0)
    if name == "sm5":
        assert np.all(chain.r < 5.0)


def test_chain_is_deterministic(line_sites):
    from lsmix.stats.condsim import mh_chain

    a = mh_chain(_params("sm3", nu=3.0), [0.3, -1.0, 2.0], line_sites, _short(), seed=9)
    b = mh_chain(_params("sm3", nu=3.0), [0.3, -1.0, 2.0], line_sites, _short(), seed=9)
    assert np.array_equal(a.r, b.r)
    assert a.acceptance_rate == b.acceptance_rate


def test_chain_rejects_mismatched_values(line_sites):
    from lsmix.core.errors import DataError
    from lsmix.stats.condsim import mh_chain

    with pytest.raises(DataError, match="does not match"):
        mh_chain(_params("sm1"), [1.0, 2.0], line_sites, _short())
    with pytest.raises(DataError, match="finite"):
        mh_chain(_params("sm1"), [1.0, np.nan, 2.0], line_sites, _short())


def test_gaussian_conditional_single_site():
    from lsmix.stats.condsim import GaussianConditioner, gaussian_conditional

    rho = 0.6
    cond = GaussianConditioner([[1.0]], [[rho]], [[1.0]])
    assert cond.mean([1.5])[0] == pytest.approx(rho * 1.5)
    assert cond.cov[0, 0] == pytest.approx(1.0 - rho * rho)

    w1 = np.full((100_000, 1), 1.5)
    draws = gaussian_conditional([[1.0]], [[rho]], [[1.0]], w1, seed=3)
    assert draws.mean() == pytest.approx(rho * 1.5, abs=0.01)
    assert draws.var() == pytest.approx(1.0 - rho * rho, abs=0.01)


def test_gaussian_conditional_rejects_non_conformable_blocks():
    from lsmix.core.errors import InvalidParameterError
    from lsmix.stats.condsim import GaussianConditioner

    with pytest.raises(InvalidParameterError, match="conformable"):
        GaussianConditioner(np.eye(2), np.ones((1, 3)), np.eye(1))


def test_conditional_simulate_gaussian_median_is_kriging_mean(line_sites):
    from lsmix.stats.condsim import CondSimConfig, conditional_predict, conditional_simulate
    from lsmix.stats.correlation import SiteSet, build_corr_matrix

    params = _params("gaussian")
    targets = SiteSet(np.array([[5.0, 0.0], [20.0, 5.0]]))
    x1 = np.array([1.0, 0.5, -0.5])
    cfg = CondSimConfig(steps=4100, burnin=100, thin=1)
    draws = conditional_simulate(params, line_sites, x1, targets, cfg, seed=5)
    assert draws.values.shape == (4000, 2)

    full = build_corr_matrix(line_sites.concat(targets), params.corr).sigma
    krig = full[3:, :3] @ np.linalg.solve(full[:3, :3], x1)
    med = conditional_predict(draws).median
    assert np.allclose(med, krig, atol=0.06)


def test_conditional_simulate_lm1_shapes_and_sites(line_sites):
    from lsmix.core.errors import SiteError
    from lsmix.stats.condsim import conditional_simulate
    from lsmix.stats.correlation import SiteSet

    params = _params("lm1", lam=1.0)
    targets = SiteSet(np.array([[15.0, 0.0]]))
    draws = conditional_simulate(params, line_sites, [2.0, 1.5, 2.5], targets, _short(), seed=6)
    assert draws.values.shape == (500, 1)
    assert np.all(np.isfinite(draws.values))
    with pytest.raises(SiteError, match="disjoint"):
        conditional_simulate(params, line_sites, [2.0, 1.5, 2.5], line_sites.subset([1]), _short())


def test_conditional_predict_maps_through_table_and_egpd():
    from lsmix.core.errors import DataError
    from lsmix.stats.condsim import conditional_predict
    from lsmix.stats.marginal import EgpdParams
    from lsmix.stats.mixing import SM1
    from lsmix.stats.process import marginal_table

    values = np.random.default_rng(7).standard_normal((300, 2))
    table = marginal_table(SM1(), 20_000, seed=8)
    egpd = [EgpdParams(1.0, 0.1), EgpdParams(2.0, 0.0, 0.5, 0.8, 2.0)]
    out = conditional_predict(values, table, egpd)
    assert np.allclose(out.median, np.median(values, axis=0))
    assert np.all((out.uniform > 0.0) & (out.uniform < 1.0))
    assert np.all(out.observed > 0.0)
    assert conditional_predict(values, table).observed is None
    with pytest.raises(DataError, match="one EGPD parameter set"):
        conditional_predict(values, table, egpd[:1])
    with pytest.raises(DataError, match="no conditional draws"):
        conditional_predict(np.empty((0, 2)))


def test_lm1_single_site_posterior_is_truncated_normal():
    from lsmix.stats.condsim import CondSimConfig, mh_chain
    from lsmix.stats.correlation import SiteSet

    # prior Exp(1) times N(2 - s, 1) gives N(1, 1) truncated to s >= 0
    site = SiteSet(np.array([[0.0, 0.0]]))
    cfg = CondSimConfig.for_retained(8000, burnin=5000, thin=25)
    chain = mh_chain(_params("lm1", lam=1.0), [2.0], site, cfg, seed=13)
    assert len(chain) == 8000
    post = stats.truncnorm(a=-1.0, b=np.inf, loc=1.0, scale=1.0)
    assert stats.kstest(chain.s, post.cdf).statistic < 0.05
    exact = 1.0 + stats.norm.pdf(1.0) / stats.norm.cdf(1.0)
    assert chain.s.mean() == pytest.approx(exact, rel=0.02)
    assert np.all(chain.r == 1.0)


def test_gaussian_conditional_draws_match_kriging_moments():
    from lsmix.stats.condsim import CondSimConfig, conditional_simulate
    from lsmix.stats.correlation import build_corr_matrix, study_sites

    params = _params("gaussian")
    sites = study_sites(15, seed=21)
    sites1, sites2 = sites.subset(range(10)), sites.subset(range(10, 15))
    x1 = np.random.default_rng(22).standard_normal(10)
    n = 20_000
    draws = conditional_simulate(params, sites1, x1, sites2, CondSimConfig(steps=n + 100, burnin=100, thin=1), seed=23)
    assert draws.values.shape == (n, 5)

    full = build_corr_matrix(sites1.concat(sites2), params.corr).sigma
    s11, s21, s22 = full[:10, :10], full[10:, :10], full[10:, 10:]
    mean = s21 @ np.linalg.solve(s11, x1)
    cov = s22 - s21 @ np.linalg.solve(s11, s21.T)

    var = np.diag(cov)
    mean_se = np.sqrt(var / n)
    cov_se = np.sqrt((np.outer(var, var) + cov * cov) / n)
    # 3.5 standard errors over 20 distinct moments
    assert np.all(np.abs(draws.values.mean(axis=0) - mean) < 3.5 * mean_se)
    assert np.all(np.abs(np.cov(draws.values, rowvar=False) - cov) < 3.5 * cov_se)


def test_acceptance_outside_band_is_logged(line_sites, caplog):
    from lsmix.stats.condsim import mh_chain

    caplog.set_level(logging.WARNING, logger="lsmix.stats.condsim")
    chain = mh_chain(_params("sm1"), [0.4, 0.1, -0.3], line_sites, _short(prop_sd_s=1e-6, prop_sd_logr=1e-6), seed=2)
    assert chain.acceptance_rate > 0.6
    assert "acceptance rate" in caplog.text and "outside" in caplog.text


def test_zero_acceptance_raises(line_sites):
    from lsmix.core.errors import ConvergenceError
    from lsmix.stats.condsim import mh_chain

    cfg = _short(steps=600, burnin=100, prop_sd_logr=1e12)
    with np.errstate(all="ignore"):
        with pytest.raises(ConvergenceError, match="no proposal accepted"):
            mh_chain(_params("sm1"), [0.4, 0.1, -0.3], line_sites, cfg, seed=3)

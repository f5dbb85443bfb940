from __future__ import annotations

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import dblquad, quad


def test_gaussian_draws_are_degenerate():
    from lsmix.stats.mixing import Gaussian, sample_sr, sample_sr_batch

    rng = np.random.default_rng(0)
    d = sample_sr(Gaussian(), rng)
    assert (d.s, d.r, d.latent) == (0.0, 1.0, ())
    batch = sample_sr_batch(Gaussian(), rng, 100)
    assert np.all(batch.s == 0.0) and np.all(batch.r == 1.0)


def test_sm1_second_moment_and_lm1_mean():
    from lsmix.stats.mixing import LM1, SM1, sample_sr_batch

    rng = np.random.default_rng(1)
    r = sample_sr_batch(SM1(), rng, 200_000).r
    assert np.mean(r * r) == pytest.approx(2.0, abs=0.03)
    s = sample_sr_batch(LM1(lam=2.0), rng, 200_000).s
    assert np.mean(s) == pytest.approx(0.5, abs=0.006)


def test_common_random_numbers_scale_with_the_rate():
    from lsmix.stats.mixing import LM1, sample_sr_batch

    a = sample_sr_batch(LM1(lam=1.0), np.random.default_rng(7), 1000).s
    b = sample_sr_batch(LM1(lam=2.0), np.random.default_rng(7), 1000).s
    assert np.allclose(b, a / 2.0, rtol=1e-14)


def test_open_uniform_never_hits_the_bounds():
    from lsmix.stats.mixing import open_uniform

    u = open_uniform(np.random.default_rng(3), (1000, 3))
    assert u.shape == (1000, 3)
    assert np.all((u > 0.0) & (u < 1.0))


class _ExtremeRng:
    """Returns the lowest and highest integers the generator can produce."""

    def integers(self, low, high, size, dtype):
        out = np.full(size, high - 1, dtype=dtype)
        out.flat[0] = low
        return out


def test_open_uniform_extreme_integers_stay_inside():
    from lsmix.stats.mixing import LM1, gpd_quantile, open_uniform

    u = open_uniform(_ExtremeRng(), (4, 1))
    assert np.all((u > 0.0) & (u < 1.0))
    assert np.all(np.isfinite(gpd_quantile(u, 1.0, 0.5)))
    assert np.all(np.isfinite(LM1(lam=1.0).latent_from_uniform(u)))


@pytest.mark.parametrize(
    "spec_name, params",
    [("sm2", {"alpha": 2.0}), ("sm3", {"nu": 3.0}), ("sm4", {"gamma": 0.5}), ("sm5", {"gamma": -0.3}), ("lsm2", {"lam1": 0.5, "lam2": 3.0})],
)
def test_draws_have_positive_scale(spec_name, params):
    from lsmix.stats.mixing import mixing_from_name, sample_sr_batch

    batch = sample_sr_batch(mixing_from_name(spec_name, params), np.random.default_rng(2), 5000)
    assert np.all(batch.r > 0.0)
    assert np.all(np.isfinite(batch.s))


def test_sm5_negative_shape_respects_upper_endpoint():
    from lsmix.stats.mixing import SM5, sample_sr_batch

    r = sample_sr_batch(SM5(gamma=-0.5), np.random.default_rng(4), 20_000).r
    assert np.all(r < 2.0)


def test_sm2_squared_scale_is_gamma():
    from lsmix.stats.mixing import SM2, sample_sr_batch

    r = sample_sr_batch(SM2(alpha=1.7), np.random.default_rng(5), 100_000).r
    res = stats.kstest(r * r, stats.gamma(a=1.7).cdf)
    assert res.pvalue > 0.001


def test_sm3_gives_gamma_precision():
    from lsmix.stats.mixing import SM3, sample_sr_batch

    r = sample_sr_batch(SM3(nu=3.0), np.random.default_rng(6), 100_000).r
    res = stats.kstest(r**-2, stats.gamma(a=1.5, scale=1.0 / 1.5).cdf)
    assert res.pvalue > 0.001


def test_lsm2_with_huge_lower_rate_behaves_like_lsm1():
    from lsmix.stats.mixing import LSM2, sample_sr_batch

    s = sample_sr_batch(LSM2(lam1=1.5, lam2=1e6), np.random.default_rng(8), 100_000).s
    res = stats.kstest(s, stats.expon(scale=1.0 / 1.5).cdf)
    assert res.pvalue > 0.001


def test_logdensity_sr_values():
    from lsmix.stats.mixing import LM1, SM1, SM4, logdensity_sr

    assert logdensity_sr(SM1(), 0.0, 1.0) == pytest.approx(-0.5)
    assert logdensity_sr(LM1(lam=1.0), 0.0, 1.0) == pytest.approx(0.0)
    assert logdensity_sr(SM4(gamma=1.0), 0.0, 1.0) is None


def test_logdensity_sr_rejects_non_positive_scale():
    from lsmix.core.errors import InvalidParameterError
    from lsmix.stats.mixing import SM1, logdensity_sr

    with pytest.raises(InvalidParameterError, match="scale must be positive"):
        logdensity_sr(SM1(), 0.0, 0.0)


@pytest.mark.parametrize(
    "spec_name, params",
    [("sm1", {}), ("sm2", {"alpha": 2.5}), ("sm3", {"nu": 3.0}), ("sm5", {"gamma": 0.3}), ("sm5", {"gamma": 0.0}), ("sm5", {"gamma": -0.5})],
)
def test_scale_densities_integrate_to_one(spec_name, params):
    from lsmix.stats.mixing import logdensity_sr, mixing_from_name

    spec = mixing_from_name(spec_name, params)
    hi = np.inf
    if spec_name == "sm5" and params["gamma"] < 0:
        hi = -1.0 / params["gamma"]
    val, _ = quad(lambda r: np.exp(logdensity_sr(spec, 0.0, r)), 0.0, hi, limit=200)
    assert val == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("spec_name, params", [("lm1", {"lam": 0.7}), ("lm2", {"lam1": 0.4, "lam2": 2.5})])
def test_location_densities_integrate_to_one(spec_name, params):
    from lsmix.stats.mixing import logdensity_sr, mixing_from_name

    spec = mixing_from_name(spec_name, params)
    neg, _ = quad(lambda s: np.exp(logdensity_sr(spec, s, 1.0)), -np.inf, 0.0)
    pos, _ = quad(lambda s: np.exp(logdensity_sr(spec, s, 1.0)), 0.0, np.inf)
    assert neg + pos == pytest.approx(1.0, abs=1e-4)


def test_lsm1_joint_density_integrates_to_one():
    from lsmix.stats.mixing import LSM1, logdensity_sr

    spec = LSM1(lam=2.0)
    val, _ = dblquad(lambda r, s: np.exp(logdensity_sr(spec, s, r)), 0.0, 40.0, 1e-12, 15.0)
    assert val == pytest.approx(1.0, abs=1e-4)


def test_logdensity_latent_values():
    from lsmix.stats.mixing import LM1, SM1, SM4, logdensity_latent

    assert logdensity_latent(SM4(gamma=1.0), [2.0, 1.0]) == pytest.approx(-2.6931, abs=1e-4)
    assert logdensity_latent(LM1(lam=1.0), [0.0]) == pytest.approx(0.0)
    assert logdensity_latent(SM1(), [1.0]) == pytest.approx(-1.1931, abs=1e-4)


def test_logdensity_latent_checks_dimension_and_support():
    from lsmix.core.errors import InvalidParameterError
    from lsmix.stats.mixing import LSM1, SM4, logdensity_latent

    with pytest.raises(InvalidParameterError, match="dimension"):
        logdensity_latent(SM4(gamma=1.0), [1.0])
    with pytest.raises(InvalidParameterError, match="outside support"):
        logdensity_latent(LSM1(lam=1.0), [-1.0, 1.0])


def test_latent_to_draw_matches_construction():
    from lsmix.stats.mixing import SM4, latent_to_draw

    d = latent_to_draw(SM4(gamma=1.0), [4.0, 2.0])
    assert d.s == 0.0
    assert d.r == pytest.approx(1.0)
    assert d.latent == (4.0, 2.0)


def test_al_cdf_values_and_shape():
    from lsmix.stats.mixing import al_cdf

    assert al_cdf(0.0, 1.0, 1.0) == pytest.approx(0.5)
    assert al_cdf(0.0, 0.4, 2.5) == pytest.approx(0.13793, abs=1e-5)
    x = np.linspace(-30.0, 30.0, 601)
    f = al_cdf(x, 0.4, 2.5)
    assert np.all(np.diff(f) >= 0.0)
    assert f[0] < 1e-6 and f[-1] > 1.0 - 1e-5
    # continuous at zero
    assert al_cdf(-1e-12, 0.4, 2.5) == pytest.approx(al_cdf(0.0, 0.4, 2.5), abs=1e-10)


def test_al_cdf_rejects_bad_rates():
    from lsmix.core.errors import InvalidParameterError
    from lsmix.stats.mixing import al_cdf

    with pytest.raises(InvalidParameterError):
        al_cdf(0.0, 0.0, 1.0)


@pytest.mark.parametrize(
    "u, sigma, gamma, expected",
    [(0.5, 1.0, 0.0, 0.69315), (0.5, 1.0, 1.0, 1.0), (1.0, 1.0, -0.5, 2.0), (0.0, 3.0, 0.2, 0.0)],
)
def test_gpd_quantile_values(u, sigma, gamma, expected):
    from lsmix.stats.mixing import gpd_quantile

    assert gpd_quantile(u, sigma, gamma) == pytest.approx(expected, abs=1e-5)


def test_gpd_quantile_infinite_endpoint_is_an_error():
    from lsmix.core.errors import InvalidParameterError
    from lsmix.stats.mixing import gpd_quantile

    with pytest.raises(InvalidParameterError, match="infinite"):
        gpd_quantile(1.0, 1.0, 0.1)


def test_unconstrained_round_trip():
    from lsmix.stats.mixing import LSM2, SM5

    spec = LSM2(lam1=0.4, lam2=2.5)
    v = spec.to_unconstrained()
    assert np.allclose(v, np.log([0.4, 2.5]))
    back = spec.from_unconstrained(v)
    assert back.lam1 == pytest.approx(0.4) and back.lam2 == pytest.approx(2.5)
    # the SM5 shape is searched on its own scale
    assert SM5(gamma=-0.3).to_unconstrained()[0] == -0.3


def test_mixing_from_name_errors():
    from lsmix.core.errors import ConfigError, InvalidParameterError
    from lsmix.stats.mixing import SM3, mixing_from_name

    assert mixing_from_name(" SM3 ", {"nu": 4}) == SM3(nu=4.0)
    with pytest.raises(ConfigError, match="Unknown model name"):
        mixing_from_name("sm9")
    with pytest.raises(ConfigError, match="Unknown parameters"):
        mixing_from_name("sm3", {"lam": 1.0})
    with pytest.raises(InvalidParameterError, match="must be positive"):
        mixing_from_name("lm1", {"lam": -1.0})

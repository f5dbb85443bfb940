from __future__ import annotations

import numpy as np
import pytest


def _gaussian_fit(sites, n=60, seed=12):
    from lsmix.stats.correlation import MaternParams
    from lsmix.stats.estimate import fit_two_step
    from lsmix.stats.mixing import Gaussian
    from lsmix.stats.process import ModelParams, simulate

    data = simulate(ModelParams(Gaussian(), MaternParams(50.0, 0.5)), sites, n, seed=seed)
    return fit_two_step(data, Gaussian())


@pytest.mark.parametrize("B", [0, 10, 49])
def test_config_rejects_too_few_replicates(B):
    from lsmix.core.errors import InvalidParameterError
    from lsmix.stats.bootstrap import BootstrapConfig

    with pytest.raises(InvalidParameterError, match="too few bootstrap replicates"):
        BootstrapConfig(B=B)


def test_config_validation_and_mode_coercion():
    from lsmix.core.errors import InvalidParameterError
    from lsmix.stats.bootstrap import BootstrapConfig, BootstrapMode

    assert BootstrapConfig(mode="standard").mode is BootstrapMode.STANDARD
    with pytest.raises(InvalidParameterError, match="confidence level"):
        BootstrapConfig(level=1.0)
    with pytest.raises(ValueError):
        BootstrapConfig(mode="turbo")


def test_fast_gaussian_bootstrap(study10):
    from lsmix.core.workers import WorkerConfig
    from lsmix.stats.bootstrap import BootstrapConfig, bootstrap_ci

    fit = _gaussian_fit(study10)
    res = bootstrap_ci(fit, study10, 60, BootstrapConfig(B=50, seed=3), workers=WorkerConfig(2))
    assert res.names == ("phi", "eta")
    assert res.replicates.shape == (50, 2)
    assert res.n_failed == 0
    assert np.all(res.lower <= res.upper)
    assert np.all(res.replicates > 0.0)
    ivs = res.intervals()
    assert set(ivs) == {"phi", "eta"}
    assert [row[0] for row in res.to_rows()] == ["phi", "eta"]


def test_bootstrap_is_reproducible_across_worker_counts(line_sites):
    from lsmix.core.workers import WorkerConfig
    from lsmix.stats.bootstrap import BootstrapConfig, bootstrap_ci

    fit = _gaussian_fit(line_sites, n=40)
    cfg = BootstrapConfig(B=50, seed=8)
    a = bootstrap_ci(fit, line_sites, 40, cfg)
    b = bootstrap_ci(fit, line_sites, 40, cfg, workers=WorkerConfig(3))
    assert np.array_equal(a.replicates, b.replicates)


def test_failed_replicates_are_dropped(monkeypatch, line_sites):
    from lsmix.core.errors import NumericalError
    from lsmix.stats import bootstrap
    from lsmix.stats.bootstrap import BootstrapConfig, bootstrap_ci

    fit = _gaussian_fit(line_sites, n=40)

    def flaky(fit, sites, n, b, *rest):
        if b % 10 == 0:
            raise NumericalError("synthetic failure")
        return fit

    monkeypatch.setattr(bootstrap, "_refit", flaky)
    res = bootstrap_ci(fit, line_sites, 40, BootstrapConfig(B=50))
    assert res.n_failed == 5
    assert res.replicates.shape == (45, 2)
    assert np.allclose(res.lower, res.estimate) and np.allclose(res.upper, res.estimate)


def test_too_many_failures_raise(monkeypatch, line_sites):
    from lsmix.core.errors import ConvergenceError, NumericalError
    from lsmix.stats import bootstrap
    from lsmix.stats.bootstrap import BootstrapConfig, bootstrap_ci

    fit = _gaussian_fit(line_sites, n=40)

    def flaky(fit, sites, n, b, *rest):
        if b % 5 == 0:
            raise NumericalError("synthetic failure")
        return fit

    monkeypatch.setattr(bootstrap, "_refit", flaky)
    with pytest.raises(ConvergenceError, match="too many bootstrap replicates failed"):
        bootstrap_ci(fit, line_sites, 40, BootstrapConfig(B=50))

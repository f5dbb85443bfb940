from __future__ import annotations

import pytest


def test_parse_config_lines_basic():
    from lsmix.core.parsers import parse_config_lines

    raw = "\n".join(
        [
            "# simulation study",
            "model = sm3",
            "model.nu = 2   # heavy tails",
            "",
            "matern.phi = 50",
        ]
    )
    out = parse_config_lines(raw.splitlines())
    assert out == {"model": "sm3", "model.nu": "2", "matern.phi": "50"}


@pytest.mark.parametrize(
    "lines, match",
    [
        (["model sm3"], "key = value"),
        (["= 3"], "empty key"),
        (["model = sm1", "model = sm3"], "duplicate key"),
        (["matern.range = 3"], "unknown config key"),
    ],
)
def test_parse_config_lines_errors(lines, match):
    from lsmix.core.errors import ConfigError
    from lsmix.core.parsers import parse_config_lines

    with pytest.raises(ConfigError, match=match):
        parse_config_lines(lines)


def test_canonical_text_is_order_independent():
    from lsmix.core.parsers import canonical_config_text

    a = canonical_config_text({"seed": "1", "model": "lm1"})
    b = canonical_config_text({"model": "lm1", "seed": "1"})
    assert a == b == "model=lm1\nseed=1"


def test_build_run_config_types_and_paths(tmp_path):
    from lsmix.core.parsers import build_run_config

    cfg = build_run_config(
        {
            "model": "lsm2",
            "model.lam1": "2",
            "model.lam2": "0.5",
            "data.file": "data.csv",
            "fit.copula": "yes",
            "chi.thresholds": "0.9; 0.95",
            "chi.side": "Lower",
            "condsim.thin": "10",
            "condsim.adapt": "off",
            "seed": "7",
        },
        tmp_path,
    )
    assert cfg.model == "lsm2"
    assert cfg.model_params == {"lam1": 2.0, "lam2": 0.5}
    assert cfg.data_file == tmp_path.resolve() / "data.csv"
    assert cfg.copula is True
    assert cfg.chi_thresholds == (0.9, 0.95)
    assert cfg.chi_side == "lower"
    assert cfg.condsim == {"thin": 10, "adapt": False}
    assert cfg.seed == 7
    assert cfg.reference == 0 and cfg.reference2 == 1


@pytest.mark.parametrize(
    "raw, match",
    [
        ({"study.n": "many"}, "must be an integer"),
        ({"matern.phi": "wide"}, "must be a number"),
        ({"fit.copula": "maybe"}, "must be a boolean"),
        ({"chi.side": "both"}, "upper or lower"),
        ({"chi.thresholds": "0.9,high"}, "comma separated"),
    ],
)
def test_build_run_config_errors(raw, match):
    from lsmix.core.errors import ConfigError
    from lsmix.core.parsers import build_run_config

    with pytest.raises(ConfigError, match=match):
        build_run_config(raw)


def test_load_run_config_with_overrides(write_config):
    from lsmix.core.parsers import load_run_config

    path = write_config(model="sm1", matern__phi="40", sites__file="sites.csv")
    cfg = load_run_config(path, {"matern.phi": "55", "model.nu": "3"})
    assert cfg.phi == 55.0
    assert cfg.model_params == {"nu": 3.0}
    assert cfg.sites_file == path.parent.resolve() / "sites.csv"
    assert "matern.phi=55" in cfg.text


def test_load_run_config_errors(tmp_path):
    from lsmix.core.errors import ConfigError
    from lsmix.core.parsers import load_run_config

    with pytest.raises(ConfigError, match="not found"):
        load_run_config(tmp_path / "missing.cfg")
    with pytest.raises(ConfigError, match="unknown config key"):
        load_run_config(None, {"colour": "blue"})
    assert load_run_config(None).model is None

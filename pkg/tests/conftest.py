from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest


@pytest.fixture()
def line_sites():
    """Three sites on a line: distances 10, 20 and 30."""
    from lsmix.stats.correlation import SiteSet

    return SiteSet(np.array([[0.0, 0.0], [10.0, 0.0], [30.0, 0.0]]))


@pytest.fixture()
def study10():
    """Ten uniform sites on the study domain, fixed seed."""
    from lsmix.stats.correlation import study_sites

    return study_sites(10, seed=11)


@pytest.fixture()
def matern():
    from lsmix.stats.correlation import MaternParams

    return MaternParams(phi=50.0, eta=0.5)


@pytest.fixture()
def write_config(tmp_path: Path):
    """
    Helper: write a run-config file from keyword entries (dots given as `__`).
    """
    def _writer(name: str = "run.cfg", **entries: object) -> Path:
        p = tmp_path / name
        lines = ["# test config"]
        lines += [f"{k.replace('__', '.')} = {v}" for k, v in entries.items()]
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return p
    return _writer


@pytest.fixture()
def simulated_run(tmp_path: Path):
    """
    Small simulated dataset on disk: 8 sites, 60 replications of SM1.
    Returns the output directory holding sites.csv and data.csv.
    """
    from lsmix.tools import simulate

    out = tmp_path / "sim"
    simulate(
        seed=5,
        out=out,
        overrides={
            "model": "sm1",
            "matern.phi": "50",
            "matern.eta": "0.5",
            "study.m": "8",
            "study.n": "60",
        },
    )
    return out

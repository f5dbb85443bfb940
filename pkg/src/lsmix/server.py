from __future__ import annotations

from mcp.server.fastmcp import FastMCP

from lsmix.resources import catalogue
from lsmix.tools import bootstrap, chi, condsim, fit, marginal_fit, simulate

mcp = FastMCP("lsmix")


@mcp.tool()
def simulate_tool(
    config: str | None = None,
    seed: int | None = None,
    out: str = ".",
    overrides: dict[str, str] | None = None,
) -> dict:
    """
    Purpose
    -------
    Simulate replications of a location-scale mixture process at a set of sites.

    When to use
    -----------
    - Produce synthetic data for a study configuration (A-D) or a given site file.
    - Generate inputs for `fit_tool`, `chi_tool` and `bootstrap_tool`.

    Parameters
    ----------
    config:
        Path to a run-config file (`key = value` lines). Optional when `overrides` carries every key.
    seed:
        Master seed; overrides the config's `seed`.
    out:
        Output directory for `sites.csv`, `data.csv` and `runs.jsonl`.
    overrides:
        Extra config keys, e.g. {"model": "sm3", "model.nu": "2", "study.config": "A"}.

    Returns
    -------
    dict:
        Command payload: output paths, config fingerprint, seed, summary (model, n, m).

    Example
    -------
    simulate_tool(overrides={"model": "sm1", "matern.phi": "50", "matern.eta": "0.5", "study.config": "A"}, seed=1)
    """
    return simulate(config, seed=seed, out=out, overrides=overrides)


@mcp.tool()
def fit_tool(
    config: str | None = None,
    out: str = ".",
    overrides: dict[str, str] | None = None,
) -> dict:
    """
    Purpose
    -------
    Estimate the Matern and mixing parameters from data at fixed sites.

    When to use
    -----------
    - After `simulate_tool`, to check parameter recovery.
    - On observed data; set `fit.copula = true` for the copula fit on uniform-scale data.

    Parameters
    ----------
    config:
        Run-config file naming `model`, `sites.file`, `data.file` and optional fit keys.
    overrides:
        Extra config keys applied on top of the file.

    Returns
    -------
    dict:
        Command payload; `summary.estimate` holds the parameter vector and `outputs.fit` the JSON result.

    Limits
    ------
    Wall time grows with the number of sites (one Cholesky per likelihood evaluation).

    Example
    -------
    fit_tool(overrides={"model": "sm1", "sites.file": "sites.csv", "data.file": "data.csv"})
    """
    return fit(config, out=out, overrides=overrides)


@mcp.tool()
def condsim_tool(
    config: str | None = None,
    seed: int | None = None,
    out: str = ".",
    overrides: dict[str, str] | None = None,
) -> dict:
    """
    Purpose
    -------
    Draw from the conditional law at target sites given values at conditioning sites.

    When to use
    -----------
    - Spatial prediction (per-site medians) at unobserved locations.

    Parameters
    ----------
    config:
        Run-config with the model, Matern parameters, `condsim.conditioning.file`
        (x, y, value) and `condsim.targets.file` (x, y).
    seed:
        Master seed for the chain and the Gaussian completion.

    Returns
    -------
    dict:
        Command payload with `draws.csv`, `medians.csv` and the chain acceptance rate.

    Limits
    ------
    Defaults are 50000 steps with burn-in 5000 and thinning 100 (450 retained draws).

    Example
    -------
    condsim_tool(config="condsim.cfg", seed=7)
    """
    return condsim(config, seed=seed, out=out, overrides=overrides)


@mcp.tool()
def chi_tool(
    config: str | None = None,
    seed: int | None = None,
    out: str = ".",
    overrides: dict[str, str] | None = None,
) -> dict:
    """
    Purpose
    -------
    Empirical tail dependence chi(p) by distance class (quartiles per bin).

    When to use
    -----------
    - Diagnose asymptotic dependence vs independence in data.
    - Compare data with a fitted model (add `model` and `matern.*` keys).

    Parameters
    ----------
    config:
        Run-config with `sites.file`, `data.file` and optional `chi.thresholds`, `chi.bin_width`, `chi.side`.

    Returns
    -------
    dict:
        Command payload with `chi.csv` (and `chi_model.csv` when a model is given).

    Example
    -------
    chi_tool(overrides={"sites.file": "sites.csv", "data.file": "data.csv"})
    """
    return chi(config, seed=seed, out=out, overrides=overrides)


@mcp.tool()
def bootstrap_tool(
    config: str | None = None,
    seed: int | None = None,
    out: str = ".",
    overrides: dict[str, str] | None = None,
) -> dict:
    """
    Purpose
    -------
    Parametric bootstrap percentile intervals around a fitted parameter vector.

    When to use
    -----------
    - After `fit_tool`: pass the estimates as `model.*` and `matern.*` keys.

    Parameters
    ----------
    config:
        Run-config with the estimate, `sites.file`, and `bootstrap.B`, `bootstrap.level`, `bootstrap.mode` (fast|standard).

    Returns
    -------
    dict:
        Command payload with `intervals.csv` and the number of failed replicates.

    Limits
    ------
    B >= 50; more than 10% failed refits is an error.

    Example
    -------
    bootstrap_tool(config="boot.cfg", seed=3)
    """
    return bootstrap(config, seed=seed, out=out, overrides=overrides)


@mcp.tool()
def marginal_fit_tool(
    config: str | None = None,
    out: str = ".",
    overrides: dict[str, str] | None = None,
) -> dict:
    """
    Purpose
    -------
    Fit one EGPD per site and transform the data to the uniform scale.

    When to use
    -----------
    - Pre-processing for the copula fit and for prediction on the observed scale.

    Parameters
    ----------
    config:
        Run-config with `data.file` (non-negative observations, one column per site).

    Returns
    -------
    dict:
        Command payload with `marginal.csv` (sigma, xi, p, kappa1, kappa2 per site) and `uniform.csv`.

    Example
    -------
    marginal_fit_tool(overrides={"data.file": "rain.csv"})
    """
    return marginal_fit(config, out=out, overrides=overrides)


# Resources (read-only, addressable by URI)


@mcp.resource("lsmix://catalogue")
def catalogue_resource() -> dict:
    """
    Resource
    --------
    The mixing catalogue: parameters with defaults, Step-1 class and tail classes.

    When to use
    -----------
    - Pick a model name and its `model.*` keys before writing a run-config.

    Example
    -------
    lsmix://catalogue
    """
    return catalogue()


def main() -> None:
    """Run the MCP server over stdio."""
    mcp.run()


if __name__ == "__main__":
    main()

from .commands import (
    bootstrap,
    chi,
    condsim,
    fit,
    marginal_fit,
    simulate,
)

__all__ = [
    "simulate",
    "fit",
    "condsim",
    "chi",
    "bootstrap",
    "marginal_fit",
]

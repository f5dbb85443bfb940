"""Gaussian location-scale mixture processes for spatial extremes."""

__version__ = "0.1.0"

"""Limit-hit microstructure econometrics: detection, features and per-event logit/probit fits."""

__version__ = "0.1.0"

"""Numerical engine for generalized Kropina metrics ``F = alpha^(m+1) / beta^m``.

Modules:

- :mod:`fcl.expr` coordinate expressions with exact second-order derivatives
- :mod:`fcl.riemann` Riemannian tensor calculus for the base metric
- :mod:`fcl.kropina` (alpha, beta) sprays and the (h, W) representation
- :mod:`fcl.curvature` spray curvature, constant-curvature verdicts, geodesics
- :mod:`fcl.metricfile`, :mod:`fcl.cli` file format and command line
"""
from .curvature import SampleConfig, berwald_curvature, constant_curvature_check, estimate_K
from .errors import DomainError, FclError, ParseError, ValidationError
from .kropina import KropinaMetric, spray_alpha_beta, to_hw
from .riemann import MetricField, OneFormField, RiemannianSpace

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "FclError",
    "KropinaMetric",
    "MetricField",
    "OneFormField",
    "ParseError",
    "RiemannianSpace",
    "SampleConfig",
    "ValidationError",
    "berwald_curvature",
    "constant_curvature_check",
    "estimate_K",
    "spray_alpha_beta",
    "to_hw",
]

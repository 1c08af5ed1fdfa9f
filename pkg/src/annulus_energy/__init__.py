"""Minimal rho-Dirichlet energy of homeomorphisms between circular annuli."""

__version__ = "0.1.0"

from .metric import RadialMetric, builtin, load_metric, metric_area  # noqa: E402
from .nitsche import NitscheMap, build_map, critical_data, solve_gamma  # noqa: E402
from .energy import EnergyModel, min_energy, profile  # noqa: E402

__all__ = [
    "RadialMetric",
    "builtin",
    "load_metric",
    "metric_area",
    "NitscheMap",
    "build_map",
    "critical_data",
    "solve_gamma",
    "EnergyModel",
    "min_energy",
    "profile",
]

"""Simulation and numerical verification of two-agent energy and wealth
redistribution processes, their dual chains, the associated diffusions and
the N-agent model on a graph."""

__version__ = "0.1.0"

from .errors import WealthDualError
from .exchange import ModelParams, WealthPair, simulate, simulate_endpoints
from .kernels import BACKEND
from .measures import Beta, CustomDensity, Density1D, ParetoType, Uniform, induce_from_density

__all__ = [
    "BACKEND",
    "Beta",
    "CustomDensity",
    "Density1D",
    "ModelParams",
    "ParetoType",
    "Uniform",
    "WealthDualError",
    "WealthPair",
    "induce_from_density",
    "simulate",
    "simulate_endpoints",
    "__version__",
]

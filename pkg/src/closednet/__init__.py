"""Closed networks of infinite-server and autonomous-service stations."""

from .model import NetworkSpec, DerivedParams, derive, classify, validate_spec, normalize_order
from .des import SimConfig, Trajectory, run_replication, replicate, BACKEND

__all__ = [
    "NetworkSpec", "DerivedParams", "derive", "classify", "validate_spec",
    "normalize_order", "SimConfig", "Trajectory", "run_replication", "replicate",
    "BACKEND",
]
__version__ = "0.1.0"

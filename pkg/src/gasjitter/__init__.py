"""Stationary gas flow, compressor dispatch and diffusive pressure jitter on
tree-shaped pipeline networks."""

from .dispatch import (
    DispatchResult,
    build_gp,
    compression_power,
    dispatch,
    greedy_dispatch,
    solve_gp,
    solve_sp,
)
from .errors import (
    BoundError,
    DomainError,
    GasJitterError,
    InfeasibleError,
    NetworkParseError,
    NetworkReferenceError,
    NonConvergenceError,
    OrientationError,
    SimulationError,
)
from .jitter import (
    diffusion_coefficient,
    edge_constants,
    exceedance_probability,
    fluctuation_strength,
    normalize_D,
    pressure_pdf,
    zeta_profile,
)
from .netfile import parse_network, read_network, serialize_network, write_network
from .network import Compressor, GasProperties, Network, Node, Pipe, validate
from .sim import discretize, ou_step, simulate, variance_growth
from .steady import check_bounds, compute_tree_flows, pressure_after, solve_steady
from .transforms import aggregate_branches, redistribute_load, scale_loads, shift_supply

__version__ = "0.1.0"

__all__ = [
    "BoundError",
    "Compressor",
    "DispatchResult",
    "DomainError",
    "GasJitterError",
    "GasProperties",
    "InfeasibleError",
    "Network",
    "NetworkParseError",
    "NetworkReferenceError",
    "Node",
    "NonConvergenceError",
    "OrientationError",
    "Pipe",
    "SimulationError",
    "aggregate_branches",
    "build_gp",
    "check_bounds",
    "compression_power",
    "compute_tree_flows",
    "diffusion_coefficient",
    "discretize",
    "dispatch",
    "edge_constants",
    "exceedance_probability",
    "fluctuation_strength",
    "greedy_dispatch",
    "normalize_D",
    "ou_step",
    "parse_network",
    "pressure_after",
    "pressure_pdf",
    "read_network",
    "redistribute_load",
    "scale_loads",
    "serialize_network",
    "shift_supply",
    "simulate",
    "solve_gp",
    "solve_sp",
    "solve_steady",
    "validate",
    "variance_growth",
    "write_network",
    "zeta_profile",
]

"""Exact discrete optimal transport: network simplex, block-coordinate variants and a Sinkhorn baseline."""

from .bcdns import BlockConfig, Certificate, OuterReport, certify_optimal, gs_bcdns, negative_set, rs_bcdns
from .core import (
    DEFAULT_SCALE,
    Objective,
    OTInstance,
    SamplePair,
    TransportPlan,
    check_feasibility,
    generate_samples,
    instance_from_matrix,
    make_instance,
    objective,
)
from .errors import (
    ExactnessViolation,
    ExactOTError,
    InvalidBasis,
    InvalidConfig,
    InvalidInput,
    InvalidInstance,
    InvalidPivot,
    NeedFullScan,
    OracleUnsupported,
    SuccessionViolation,
)
from .oracles import oracle_1d_monotone, oracle_lp_bruteforce
from .simplex import SimplexState, SolveReport, northwest_corner, pivot, solve_full, solve_restricted
from .sinkhorn import SinkhornConfig, gamma_from_eps, round_to_feasible, sinkhorn_solve

__version__ = "0.1.0"

__all__ = [
    "BlockConfig", "Certificate", "DEFAULT_SCALE", "ExactOTError", "ExactnessViolation", "InvalidBasis",
    "InvalidConfig", "InvalidInput", "InvalidInstance", "InvalidPivot", "NeedFullScan", "OTInstance",
    "Objective", "OracleUnsupported", "OuterReport", "SamplePair", "SimplexState", "SinkhornConfig",
    "SolveReport", "SuccessionViolation", "TransportPlan", "certify_optimal", "check_feasibility",
    "gamma_from_eps", "generate_samples", "gs_bcdns", "instance_from_matrix", "make_instance",
    "negative_set", "northwest_corner", "objective", "oracle_1d_monotone", "oracle_lp_bruteforce",
    "pivot", "round_to_feasible", "rs_bcdns", "sinkhorn_solve", "solve_full", "solve_restricted",
]

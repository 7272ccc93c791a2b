"""Controlled key distribution, conference keys and cooperative teleportation over GHZ-class states."""

from .confkey import (
    bell_I,
    conference_qber_analytic,
    conference_state,
    correlation_tables,
    optimal_violation,
    run_conference,
    stabilizer_group,
)
from .coqkd import (
    KEYRATE_ONLY,
    WITH_SECURITY,
    collapse_three,
    four_qubit_run,
    qber_analytic,
    relative_key_rate,
    run_branch,
    run_controlled,
    security_settings,
    supervise,
)
from .qcore import (
    DensityMatrix,
    JointBasis,
    Observable,
    QubitBasis,
    StateVector,
    concurrence,
    expectation,
    measure,
    partial_trace,
    von_neumann_entropy,
)
from .states import ResourceSpec, build, classify, nmm, tmes_construct
from .teleport import simulate_roundtrip, sweep

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix", "JointBasis", "KEYRATE_ONLY", "Observable", "QubitBasis", "ResourceSpec",
    "StateVector", "WITH_SECURITY", "bell_I", "build", "classify", "collapse_three", "concurrence",
    "conference_qber_analytic", "conference_state", "correlation_tables", "expectation",
    "four_qubit_run", "measure", "nmm", "optimal_violation", "partial_trace", "qber_analytic",
    "relative_key_rate", "run_branch", "run_conference", "run_controlled", "security_settings",
    "simulate_roundtrip", "stabilizer_group", "supervise", "sweep", "tmes_construct",
    "von_neumann_entropy",
]

"""Streaming sparse coding with automaton-controlled dictionary growth.

The package encodes a stream of patch vectors one at a time: FISTA solves
for each sparse code, online dictionary learning refreshes the basis, and a
deterministic interval automaton watches the running mean of the squared
reconstruction residuals. When that mean exceeds a threshold, the automaton
picks a growth amount and the dictionary gains that many random unit-norm
columns while all previous codes stay valid as zero-padded vectors.
"""

__version__ = "0.1.0"

from .automaton import AutomatonState, GrowthAutomaton
from .dictlearn import Dictionary, GrowthRecord, init_dictionary
from .linalg import lipschitz_bound, matvec, matvec_t, residual_sq, vdot
from .pipeline import (
    SampleRecord,
    Session,
    SessionConfig,
    SessionLedger,
    checkpoint_load,
    checkpoint_save,
    run_stream,
    write_series_csv,
)
from .solver import (
    Code,
    SolveOpts,
    SolverDivergenceError,
    dynamic_solve,
    energy,
    fista_solve,
    prox_two_l1,
    soft_threshold,
)

__all__ = [
    "AutomatonState",
    "Code",
    "Dictionary",
    "GrowthAutomaton",
    "GrowthRecord",
    "SampleRecord",
    "Session",
    "SessionConfig",
    "SessionLedger",
    "SolveOpts",
    "SolverDivergenceError",
    "checkpoint_load",
    "checkpoint_save",
    "dynamic_solve",
    "energy",
    "fista_solve",
    "init_dictionary",
    "lipschitz_bound",
    "matvec",
    "matvec_t",
    "prox_two_l1",
    "residual_sq",
    "run_stream",
    "soft_threshold",
    "vdot",
    "write_series_csv",
]

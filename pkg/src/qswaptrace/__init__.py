"""Classical simulation of the n-copy controlled-SWAP test and power-trace estimation."""
from .errors import (
    ConsistencyError,
    DivergenceError,
    InvalidArgument,
    InvalidState,
    NumericInstabilityWarning,
    QSwapTraceError,
    ResourceLimit,
)
from .qstate import DensityMatrix, MomentVector, PureState, builtin_state, moments, reduced_density
from .cswap import OutcomeDistribution, ShotCounts, exact_distribution, sample
from .estimate import plan_shots, traces_from_counts, traces_from_distribution

__version__ = "0.1.0"

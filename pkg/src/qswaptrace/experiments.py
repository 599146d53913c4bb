"""Seeded sampling experiments: distribution MSE and Hoeffding error studies."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from .cswap import (
    STATEVECTOR_AMP_CAP,
    STATEVECTOR_COPY_CAP,
    OutcomeDistribution,
    ShotCounts,
    exact_distribution,
    sample,
)
from .errors import ConsistencyError, InvalidArgument
from .estimate import plan_shots, traces_from_counts
from .qstate import PureState, State, builtin_state, moments, reduced_density

MSE_COPIES = range(3, 7)
CROSS_CHECK_TOL = 1e-10


@dataclass(frozen=True)
class MseReport:
    state_name: str
    n_copies: int
    shots: int
    seed: Optional[int]
    mse: float
    per_outcome: dict[str, tuple[float, float]]
    cross_check: str = "skipped"

    def to_json(self) -> dict:
        return {
            "state": self.state_name,
            "copies": self.n_copies,
            "shots": self.shots,
            "seed": self.seed,
            "mse": self.mse,
            "cross_check": self.cross_check,
            "per_outcome": {z: {"p_sim": s, "p_theo": t} for z, (s, t) in self.per_outcome.items()},
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["z", "p_sim", "p_theo"])
        for z, (s, t) in self.per_outcome.items():
            w.writerow([z, repr(s), repr(t)])
        return buf.getvalue()


@dataclass(frozen=True)
class HoeffdingReport:
    state_name: str
    n_copies: int
    epsilon: float
    delta: float
    M: int
    repetitions: int
    seed: Optional[int]
    true_traces: dict[int, float]
    per_k_errors: dict[int, list[float]] = field(repr=False)
    failure_fraction: float = 0.0

    def to_json(self) -> dict:
        return {
            "state": self.state_name,
            "copies": self.n_copies,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "M": self.M,
            "repetitions": self.repetitions,
            "seed": self.seed,
            "true_traces": {str(k): v for k, v in self.true_traces.items()},
            "failure_fraction": self.failure_fraction,
            "max_error": {str(k): max(v) for k, v in self.per_k_errors.items()},
            "per_k_errors": {str(k): v for k, v in self.per_k_errors.items()},
        }

    def to_csv(self) -> str:
        ks = sorted(self.per_k_errors)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["repetition"] + [f"err_k{k}" for k in ks])
        for i in range(self.repetitions):
            w.writerow([i] + [repr(self.per_k_errors[k][i]) for k in ks])
        return buf.getvalue()


def mse(sim: Union[OutcomeDistribution, ShotCounts], theo: OutcomeDistribution) -> float:
    """Mean over all ``2^{n-1}`` outcomes of the squared probability gap."""
    if sim.n_controls != theo.n_controls:
        raise InvalidArgument(
            f"outcome spaces differ: {sim.n_controls} vs {theo.n_controls} controls"
        )
    p_sim = sim.frequencies() if isinstance(sim, ShotCounts) else sim.probabilities
    return float(np.mean((p_sim - theo.probabilities) ** 2))


def expected_mse(theo: OutcomeDistribution, shots: int) -> float:
    """Multinomial expectation ``(1/m) sum p (1 - p) / M``."""
    p = theo.probabilities
    return float(np.mean(p * (1 - p)) / shots)


def _resolve(state: Union[str, State]) -> tuple[str, State]:
    if isinstance(state, str):
        return state, builtin_state(state)
    return "custom", state


@lru_cache(maxsize=64)
def _theoretical_cached(state_name: str, n_copies: int) -> tuple[OutcomeDistribution, str]:
    return theoretical_distribution(builtin_state(state_name), n_copies)


def theoretical_distribution(state: State, n_copies: int, target=(1,)) -> tuple[OutcomeDistribution, str]:
    """Moment-path distribution, cross-checked against the statevector path when feasible."""
    theo = exact_distribution(state, n_copies, target, "moments")
    feasible = (
        isinstance(state, PureState)
        and n_copies <= STATEVECTOR_COPY_CAP
        and 2 ** (n_copies - 1) * state.dim**n_copies <= STATEVECTOR_AMP_CAP
    )
    if not feasible:
        return theo, "skipped"
    sv = exact_distribution(state, n_copies, target, "statevector")
    gap = float(np.max(np.abs(sv.probabilities - theo.probabilities)))
    if gap > CROSS_CHECK_TOL:
        raise ConsistencyError(f"moment and statevector distributions differ by {gap:.3g}")
    return theo, "statevector"


def _theory(state: Union[str, State], n_copies: int) -> tuple[str, OutcomeDistribution, str]:
    name, obj = _resolve(state)
    if name != "custom":
        theo, check = _theoretical_cached(name, n_copies)
    else:
        theo, check = theoretical_distribution(obj, n_copies)
    return name, theo, check


def run_mse_experiment(
    state_name: Union[str, State], n_copies: int, shots: int = 2**15, seed: Optional[int] = 0
) -> MseReport:
    if n_copies not in MSE_COPIES:
        raise InvalidArgument(f"n_copies must be in 3..6, got {n_copies}")
    name, theo, check = _theory(state_name, n_copies)
    counts = sample(theo, shots, seed)
    freq = counts.frequencies()
    per_outcome = {
        z: (float(freq[i]), float(theo.probabilities[i])) for i, z in enumerate(theo.as_dict())
    }
    return MseReport(name, n_copies, shots, seed, mse(counts, theo), per_outcome, check)


def run_hoeffding_experiment(
    state_name: Union[str, State],
    n_copies: int,
    epsilon: float,
    delta: float,
    repetitions: int,
    seed: Optional[int] = 0,
) -> HoeffdingReport:
    """Repeat an ``M = plan_shots(eps, delta, n)`` run; repetition i uses ``seed + i``."""
    if repetitions < 1:
        raise InvalidArgument("repetitions must be >= 1")
    if epsilon >= 2:
        raise InvalidArgument("epsilon >= 2 is vacuous: |T_k - m_k| <= 2 always")
    plan = plan_shots(epsilon, delta, n_copies)
    name, theo, _ = _theory(state_name, n_copies)
    _, obj = _resolve(state_name)
    mv = moments(reduced_density(obj, [1]), n_copies)
    ks = list(range(2, n_copies + 1))
    truth = {k: mv.m(k) for k in ks}
    base = 0 if seed is None else seed
    errors: dict[int, list[float]] = {k: [] for k in ks}
    failures = 0
    for i in range(repetitions):
        est = traces_from_counts(sample(theo, plan.M, base + i), ks)
        errs = {k: abs(est.per_k[k].estimate - truth[k]) for k in ks}
        for k in ks:
            errors[k].append(errs[k])
        failures += any(e > epsilon for e in errs.values())
    return HoeffdingReport(
        name, n_copies, epsilon, delta, plan.M, repetitions, seed, truth, errors,
        failures / repetitions,
    )

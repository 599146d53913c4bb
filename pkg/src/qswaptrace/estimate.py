"""From control-register outcomes back to power traces.

``tr(rho_x^k) = 2 * P(z_1 + ... + z_{k-1} even) - 1`` for every
``k = 2..n``, so one distribution (or one batch of shots) yields all the
traces at once.  Shot budgets follow the Hoeffding/union bound, and traces
beyond the circuit size are extrapolated with Newton-Girard recurrences
once the rank is known.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

from .cswap import (
    OutcomeDistribution,
    ShotCounts,
    exact_distribution_moments,
    prefix_parity_mask,
    sample,
)
from .errors import InvalidArgument
from .qstate import DensityMatrix, MomentVector, moments

GIRARD_TOL = 1e-8


@dataclass(frozen=True)
class TraceEstimate:
    estimate: float
    p_k: float
    variance: Optional[float]
    extrapolated: bool = False


@dataclass(frozen=True)
class TraceEstimates:
    per_k: dict[int, TraceEstimate]
    shots: Optional[int]
    epsilon: Optional[float] = None
    delta: Optional[float] = None
    warnings: tuple[str, ...] = ()

    def values(self) -> dict[int, float]:
        return {k: e.estimate for k, e in sorted(self.per_k.items())}

    def to_json(self) -> dict:
        return {
            "shots": self.shots,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "per_k": {
                str(k): {
                    "estimate": e.estimate,
                    "p_k": e.p_k,
                    "variance": e.variance,
                    "extrapolated": e.extrapolated,
                }
                for k, e in sorted(self.per_k.items())
            },
            "warnings": list(self.warnings),
        }

    def moment_vector(self, source_dim: int) -> MomentVector:
        """``m_1 = 1`` followed by the estimated ``m_2..m_K`` (must be contiguous)."""
        ks = sorted(self.per_k)
        if ks != list(range(2, 2 + len(ks))):
            raise InvalidArgument(f"estimates for k={ks} are not contiguous from 2")
        return MomentVector([1.0] + [self.per_k[k].estimate for k in ks], source_dim)


@dataclass(frozen=True)
class ShotPlan:
    epsilon: float
    delta: float
    n_copies: int
    M: int
    derivation: str = ""

    def to_json(self) -> dict:
        return {
            "M": self.M,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "copies": self.n_copies,
            "derivation": self.derivation,
        }


@dataclass(frozen=True)
class CharPolyCoeffs:
    a: np.ndarray
    r: int
    warnings: tuple[str, ...] = field(default=())

    def roots(self) -> np.ndarray:
        # F(t) = sum_k (-1)^k a_k t^{r-k}, a_0 = 1
        poly = [1.0] + [(-1) ** k * self.a[k - 1] for k in range(1, self.r + 1)]
        return np.roots(poly)


def parse_k_range(ks_in: Union[str, Iterable[int]], n_copies: int) -> list[int]:
    """Accept ``"2..6"``, ``"2,4"`` or an iterable; default is every k."""
    if ks_in is None:
        return list(range(2, n_copies + 1))
    if isinstance(ks_in, str):
        ks: list[int] = []
        try:
            for part in ks_in.split(","):
                part = part.strip()
                if ".." in part:
                    lo, hi = part.split("..")
                    ks.extend(range(int(lo), int(hi) + 1))
                elif part:
                    ks.append(int(part))
        except ValueError:
            raise InvalidArgument(f"cannot parse k range {ks_in!r}") from None
        ks_in = ks
    ks = sorted(set(int(k) for k in ks_in))
    bad = [k for k in ks if not 2 <= k <= n_copies]
    if bad or not ks:
        raise InvalidArgument(f"k values {bad or ks} outside 2..{n_copies}")
    return ks


def trace_from_distribution(dist: OutcomeDistribution, k: int) -> float:
    if not 2 <= k <= dist.n_controls + 1:
        raise InvalidArgument(f"k={k} outside 2..{dist.n_controls + 1}")
    even = prefix_parity_mask(dist.n_controls, k)
    return 2.0 * math.fsum(dist.probabilities[even]) - 1.0


def estimator_variance(p_k: float, M: int) -> float:
    if not 0.0 <= p_k <= 1.0:
        raise InvalidArgument(f"p_k={p_k} outside [0, 1]")
    if M < 1:
        raise InvalidArgument("M must be >= 1")
    return 4.0 * p_k * (1.0 - p_k) / M


def traces_from_counts(
    counts: ShotCounts,
    k_range: Union[str, Iterable[int], None] = None,
    epsilon: Optional[float] = None,
    delta: Optional[float] = None,
) -> TraceEstimates:
    """All requested ``T_k`` from a single batch of shots."""
    M = counts.total
    if M < 1:
        raise InvalidArgument("counts are empty")
    nc = counts.n_controls
    ks = parse_k_range(k_range, nc + 1)
    # even-parity tallies for every k in one sweep over the outcome bins
    z = np.arange(2**nc)
    parity = np.zeros(2**nc, dtype=np.int64)
    even_counts = {}
    for k in range(2, max(ks) + 1):
        parity ^= (z >> (nc - (k - 1))) & 1
        if k in ks:
            even_counts[k] = int(counts.counts[parity == 0].sum())
    per_k = {}
    for k in ks:
        p_hat = even_counts[k] / M
        per_k[k] = TraceEstimate(2.0 * p_hat - 1.0, p_hat, estimator_variance(p_hat, M))
    return TraceEstimates(per_k, M, epsilon, delta)


def traces_from_distribution(
    dist: OutcomeDistribution, k_range: Union[str, Iterable[int], None] = None
) -> TraceEstimates:
    """Exact inversion of a full distribution; variances are not defined."""
    ks = parse_k_range(k_range, dist.n_controls + 1)
    per_k = {}
    for k in ks:
        t = trace_from_distribution(dist, k)
        per_k[k] = TraceEstimate(t, (t + 1.0) / 2.0, None)
    return TraceEstimates(per_k, None)


def plan_shots(epsilon: float, delta: float, n_copies: int) -> ShotPlan:
    """Smallest M with ``2 (n-1) exp(-M eps^2 / 2) <= delta``."""
    if not epsilon > 0:
        raise InvalidArgument("epsilon must be > 0")
    if not 0 < delta < 1:
        raise InvalidArgument("delta must lie in (0, 1)")
    if n_copies < 2:
        raise InvalidArgument("n_copies must be >= 2")
    n_est = n_copies - 1
    bound = (2.0 / epsilon**2) * math.log(2 * n_est / delta)
    M = math.ceil(bound)
    derivation = (
        f"M = ceil((2/eps^2) * ln(2*(n-1)/delta)) = ceil({2.0 / epsilon**2:.10g} * "
        f"ln({2 * n_est / delta:.10g})) = ceil({bound:.10g}) = {M}"
    )
    return ShotPlan(epsilon, delta, n_copies, M, derivation)


def newton_girard_coeffs(mv: MomentVector, r: int) -> CharPolyCoeffs:
    """Elementary symmetric polynomials ``a_1..a_r`` of the spectrum."""
    if r < 1:
        raise InvalidArgument("rank r must be >= 1")
    if mv.k_max < r:
        raise InvalidArgument(f"need m_1..m_{r}, have m_1..m_{mv.k_max}")
    a = [1.0]
    for k in range(1, r + 1):
        terms = [(-1) ** (i - 1) * a[k - i] * mv.m(i) for i in range(1, k + 1)]
        a.append(math.fsum(terms) / k)
    coeffs = np.array(a[1:])
    notes = []
    roots = CharPolyCoeffs(coeffs, r).roots()
    if np.any(np.abs(roots.imag) > 1e-6) or np.any(roots.real < -1e-6) or np.any(roots.real > 1 + 1e-6):
        notes.append("fitted characteristic polynomial has roots outside [0, 1]")
    # power sums of the fitted roots against every moment supplied
    for k in range(2, mv.k_max + 1):
        recon = float(np.sum(roots**k).real)
        if abs(recon - mv.m(k)) > GIRARD_TOL:
            notes.append(
                f"m_{k} reconstructed from the rank-{r} fit is {recon:.12g}, "
                f"supplied {mv.m(k):.12g}; declared rank may be wrong"
            )
            break
    return CharPolyCoeffs(coeffs, r, tuple(notes))


def extend_moments(coeffs: CharPolyCoeffs, mv: MomentVector, l_max: int) -> MomentVector:
    """Append ``m_{r+1}..m_{r+l_max}`` via ``m_{r+l} = sum_j (-1)^{j-1} a_j m_{r+l-j}``."""
    r = coeffs.r
    if mv.k_max < r:
        raise InvalidArgument(f"need m_1..m_{r}, have m_1..m_{mv.k_max}")
    if l_max < 0:
        raise InvalidArgument("l_max must be >= 0")
    vals = [mv.m(k) for k in range(1, r + 1)]
    notes = list(coeffs.warnings)
    cap = vals[-1] * (1 + 1e-6)
    for l in range(1, l_max + 1):
        n = r + l
        terms = [(-1) ** (j - 1) * coeffs.a[j - 1] * vals[n - j - 1] for j in range(1, r + 1)]
        value = math.fsum(terms)
        if not 0.0 <= value <= cap:
            notes.append(f"extrapolated m_{n} = {value:.6g} leaves [0, m_{r}]; numerically unstable")
        vals.append(value)
    return MomentVector(vals, mv.source_dim, tuple(notes))


def hybrid_estimate(
    source: Union[DensityMatrix, ShotCounts, OutcomeDistribution],
    r: int,
    n_target: int,
    plan: Optional[ShotPlan] = None,
    seed: Optional[int] = 0,
    source_dim: Optional[int] = None,
) -> TraceEstimates:
    """Measure ``m_2..m_r`` on an r-copy circuit, then extrapolate to ``n_target``.

    ``source`` is the target reduced state (simulated exactly, or sampled
    with ``plan.M`` shots when a plan is given), or data already taken on an
    r-copy circuit.  Extrapolated entries carry no variance.
    """
    if r < 1:
        raise InvalidArgument("r must be >= 1")
    if n_target < 2:
        raise InvalidArgument("n_target must be >= 2")
    if isinstance(source, DensityMatrix):
        source_dim = source.dim
    elif source_dim is None:
        source_dim = 0

    shots = None
    measured: dict[int, TraceEstimate] = {}
    if r >= 2:
        if isinstance(source, DensityMatrix):
            dist = exact_distribution_moments(moments(source, r), r)
            if plan is not None:
                source = sample(dist, plan.M, seed)
            else:
                source = dist
        if source.n_controls != r - 1:
            raise InvalidArgument(f"data has {source.n_controls + 1} copies, expected r={r}")
        if isinstance(source, ShotCounts):
            est = traces_from_counts(source)
            shots = est.shots
        else:
            est = traces_from_distribution(source)
        measured = dict(est.per_k)

    mv = MomentVector([1.0] + [measured[k].estimate for k in range(2, r + 1)], source_dim)
    coeffs = newton_girard_coeffs(mv, r)
    extended = extend_moments(coeffs, mv, max(0, n_target - r))
    per_k = {}
    for k in range(2, n_target + 1):
        if k in measured:
            per_k[k] = measured[k]
        else:
            t = extended.m(k)
            per_k[k] = TraceEstimate(t, (t + 1.0) / 2.0, None, extrapolated=True)
    return TraceEstimates(
        per_k,
        shots,
        plan.epsilon if plan else None,
        plan.delta if plan else None,
        extended.warnings,
    )

"""Nonlinear functionals and entanglement measures built from power traces.

Every quantity here is a function of ``m_k = tr(rho^k)``.  The ``*_from_distribution``
variants evaluate the same quantity directly from control-register
probabilities, using ``1 - m_k = 2 * P(prefix of length k-1 has odd parity)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cswap import OutcomeDistribution, prefix_parity_mask
from .errors import DivergenceError, InvalidArgument
from .qstate import DensityMatrix, MomentVector

FULL_RANK_TOL = 1e-9


@dataclass(frozen=True)
class TruncationSpec:
    N: int
    tolerance_report: Optional[float] = None

    def __post_init__(self):
        if int(self.N) < 1:
            raise InvalidArgument("truncation order N must be >= 1")
        object.__setattr__(self, "N", int(self.N))


def _need(mv: MomentVector, k: int) -> None:
    if mv.k_max < k:
        raise InvalidArgument(f"need moments up to m_{k}, have m_1..m_{mv.k_max}")


def _guard_full_rank(dm: Optional[DensityMatrix]) -> None:
    if dm is None:
        return
    lam = np.linalg.eigvalsh(dm.entries)[0]
    if lam <= FULL_RANK_TOL:
        raise DivergenceError(
            f"smallest eigenvalue {lam:.3g} <= {FULL_RANK_TOL:g}; the logarithm series "
            "needs a full-rank state"
        )


def _sum_even(dist: OutcomeDistribution, k: int) -> float:
    return math.fsum(dist.probabilities[prefix_parity_mask(dist.n_controls, k)])


def _sum_odd(dist: OutcomeDistribution, k: int) -> float:
    return math.fsum(dist.probabilities[~prefix_parity_mask(dist.n_controls, k)])


# -- nonlinear functionals -----------------------------------------------------

def exp_tail_bound(N: int) -> float:
    """Upper bound on the dropped Taylor tail of ``tr(e^rho)``, since ``m_n <= 1``."""
    return max(0.0, math.e - math.fsum(1.0 / math.factorial(n) for n in range(N + 1)))


def exp_trace(mv: MomentVector, dim: int, trunc: TruncationSpec, beta: float = 1.0) -> float:
    """Truncated ``tr(e^{beta rho}) ~ dim + beta + sum_{n=2}^{N} beta^n m_n / n!``.

    ``m_0 = dim`` and ``m_1 = 1`` are fixed by the declared dimension and
    normalization, so only ``m_2..m_N`` are read from ``mv``.
    """
    N = trunc.N
    if N >= 2:
        _need(mv, N)
    terms = [float(dim), float(beta)]
    terms += [beta**n * mv.m(n) / math.factorial(n) for n in range(2, N + 1)]
    return math.fsum(terms)


def _log_terms(mv: MomentVector, N: int) -> list[float]:
    # tr(rho (rho - I)^n) = sum_s C(n, s) (-1)^(n-s) m_{s+1}
    _need(mv, N + 1)
    out = []
    for n in range(1, N + 1):
        out.append(math.fsum(math.comb(n, s) * (-1) ** (n - s) * mv.m(s + 1) for s in range(n + 1)))
    return out


def log_trace_series(mv: MomentVector, N: int) -> float:
    """Truncated Mercator series for ``tr(rho ln rho)``."""
    return math.fsum((-1) ** (n + 1) / n * t for n, t in enumerate(_log_terms(mv, N), start=1))


def von_neumann_entropy(
    mv: MomentVector, dim: int, trunc: TruncationSpec, dm: Optional[DensityMatrix] = None
) -> float:
    """``-tr(rho ln rho)`` from ``m_1..m_{N+1}``.

    Pass ``dm`` to enforce the full-rank guard; with moments alone the
    caller is responsible for the convergence domain.
    """
    _guard_full_rank(dm)
    return -log_trace_series(mv, trunc.N)


def gibbs_cost(mv: MomentVector, K: int, dm: Optional[DensityMatrix] = None) -> float:
    """``sum_{k=1}^{K} (-1)^k / k * tr((rho - I)^k rho)``, term by term."""
    if K < 1:
        raise InvalidArgument("K must be >= 1")
    _guard_full_rank(dm)
    return math.fsum((-1) ** k / k * t for k, t in enumerate(_log_terms(mv, K), start=1))


# -- entanglement measures -----------------------------------------------------

def _check_purity(m2: float) -> None:
    if not -1e-12 <= m2 <= 1 + 1e-12:
        raise InvalidArgument(f"purity {m2!r} outside [0, 1]")


def concurrence(m2: float) -> float:
    _check_purity(m2)
    return math.sqrt(max(0.0, 2.0 * (1.0 - m2)))


def concurrence_from_p0(p0: float) -> float:
    """Two-copy form ``2 sqrt(1 - p(0))``."""
    if not -1e-12 <= p0 <= 1 + 1e-12:
        raise InvalidArgument(f"p(0)={p0!r} outside [0, 1]")
    return 2.0 * math.sqrt(max(0.0, 1.0 - p0))


def concurrence_from_distribution(dist: OutcomeDistribution) -> float:
    # p(z_1 = 0) marginal plays the role of the two-copy p(0)
    return concurrence_from_p0(_sum_even(dist, 2))


def icem(mv: MomentVector, R: int) -> float:
    """``1 - 2^{-R} sum_{i=0}^{R} C(R, i) m_{i+1}`` for Schmidt rank R+1."""
    if R < 0:
        raise InvalidArgument("R must be >= 0")
    _need(mv, R + 1)
    return 1.0 - math.fsum(math.comb(R, i) * mv.m(i + 1) for i in range(R + 1)) / 2**R


def icem_from_distribution(dist: OutcomeDistribution, R: int) -> float:
    if R < 0:
        raise InvalidArgument("R must be >= 0")
    if R > dist.n_controls:
        raise InvalidArgument(f"R={R} needs at least {R + 1} copies")
    q = math.fsum(math.comb(R, i) * _sum_even(dist, i + 1) for i in range(1, R + 1))
    return 2.0 - q / 2 ** (R - 1) - 1.0 / 2 ** (R - 1)


def _check_q(q: int) -> int:
    if int(q) != q or q < 2:
        raise InvalidArgument(f"q must be an integer >= 2, got {q!r}")
    return int(q)


def tsallis_q(mv: MomentVector, q: int) -> float:
    q = _check_q(q)
    _need(mv, q)
    return (1.0 - mv.m(q)) / (q - 1)


def tsallis_q_from_distribution(dist: OutcomeDistribution, q: int) -> float:
    q = _check_q(q)
    return 2.0 * _sum_odd(dist, q) / (q - 1)


def q_concurrence(mv: MomentVector, q: int) -> float:
    q = _check_q(q)
    _need(mv, q)
    return 1.0 - mv.m(q)


def q_concurrence_from_distribution(dist: OutcomeDistribution, q: int) -> float:
    q = _check_q(q)
    return 2.0 * _sum_odd(dist, q)

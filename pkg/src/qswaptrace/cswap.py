"""The n-copy controlled-SWAP test.

``n`` copies of a state are prepared next to ``n - 1`` control qubits.  Each
control is put into superposition, control ``k`` swaps the target
subsystems of copies ``k`` and ``k + 1`` (``S_1`` first, then ``S_2``, ...),
and the controls are rotated back with Hadamards and measured.

Outcome strings are written ``z_1 z_2 ... z_{n-1}`` with ``z_1`` (the
control of ``S_1``) leftmost.  Probability arrays are indexed by
``int(z, 2)``, so ``z_1`` is the most significant bit.

Three independent routes to ``p(z)`` are provided:

* :func:`exact_distribution_moments` -- expand ``K_z^dag K_z`` into
  permutation words and evaluate each through its cycle type.  Needs only
  the power traces of the target reduced state.
* :func:`exact_distribution_dense` -- build ``K_z`` as a dense matrix on
  the ``d^n`` copy space and contract with ``rho^{(x)n}``.
* :func:`exact_distribution_statevector` -- simulate the circuit on the
  full register for a pure global state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np

from .errors import ConsistencyError, InvalidArgument, ResourceLimit
from .qstate import (
    DensityMatrix,
    MomentVector,
    PureState,
    State,
    moments,
    reduced_density,
)

MOMENT_COPY_CAP = 10
DENSE_DIM_CAP = 2**12
STATEVECTOR_COPY_CAP = 6
STATEVECTOR_AMP_CAP = 2**24
NEG_TOL = 1e-12
NORM_TOL = 1e-9


def bitstring(index: int, width: int) -> str:
    return format(index, f"0{width}b") if width else ""


def prefix_parity_mask(n_controls: int, k: int) -> np.ndarray:
    """Boolean mask over outcomes: True where ``z_1 + ... + z_{k-1}`` is even."""
    if not 2 <= k <= n_controls + 1:
        raise InvalidArgument(f"k={k} outside 2..{n_controls + 1}")
    prefix = np.arange(2**n_controls) >> (n_controls - (k - 1))
    parity = np.zeros_like(prefix)
    while np.any(prefix):
        parity ^= prefix & 1
        prefix >>= 1
    return parity == 0


@dataclass(frozen=True)
class OutcomeDistribution:
    probabilities: np.ndarray
    n_controls: int

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float).reshape(-1)
        n = int(self.n_controls)
        if p.size != 2**n:
            raise InvalidArgument(f"{p.size} probabilities for {n} controls")
        if np.any(p < -NEG_TOL):
            raise InvalidArgument("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > NORM_TOL:
            raise InvalidArgument(f"probabilities sum to {p.sum()!r}")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "n_controls", n)

    @property
    def n_copies(self) -> int:
        return self.n_controls + 1

    def __getitem__(self, z: str) -> float:
        if len(z) != self.n_controls:
            raise KeyError(z)
        return float(self.probabilities[int(z, 2)])

    def as_dict(self) -> dict[str, float]:
        return {bitstring(i, self.n_controls): float(p) for i, p in enumerate(self.probabilities)}

    def to_json(self) -> dict:
        return {"n_controls": self.n_controls, "probabilities": self.as_dict()}

    @classmethod
    def from_json(cls, obj: dict) -> "OutcomeDistribution":
        n, table = _parse_table(obj, "probabilities")
        p = np.zeros(2**n)
        for z, v in table.items():
            p[int(z, 2)] = float(v)
        return cls(p, n)


@dataclass(frozen=True)
class ShotCounts:
    counts: np.ndarray
    n_controls: int

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64).reshape(-1)
        n = int(self.n_controls)
        if c.size != 2**n:
            raise InvalidArgument(f"{c.size} count bins for {n} controls")
        if np.any(c < 0):
            raise InvalidArgument("counts must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "n_controls", n)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def frequencies(self) -> np.ndarray:
        if self.total == 0:
            raise InvalidArgument("no shots recorded")
        return self.counts / self.total

    def as_dict(self) -> dict[str, int]:
        return {bitstring(i, self.n_controls): int(c) for i, c in enumerate(self.counts)}

    def to_json(self) -> dict:
        return {"n_controls": self.n_controls, "counts": self.as_dict(), "total": self.total}

    @classmethod
    def from_json(cls, obj: dict) -> "ShotCounts":
        n, table = _parse_table(obj, "counts")
        c = np.zeros(2**n, dtype=np.int64)
        for z, v in table.items():
            c[int(z, 2)] = int(v)
        out = cls(c, n)
        if "total" in obj and int(obj["total"]) != out.total:
            raise InvalidArgument(f"total {obj['total']} does not match summed counts {out.total}")
        return out


def _parse_table(obj: dict, key: str) -> tuple[int, dict]:
    try:
        n = int(obj["n_controls"])
        table = dict(obj[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgument(f"malformed {key} object: {exc}") from None
    for z in table:
        if len(z) != n or set(z) - {"0", "1"}:
            raise InvalidArgument(f"outcome {z!r} is not a {n}-bit string")
    return n, table


@dataclass(frozen=True)
class CircuitSpec:
    n_copies: int
    target: tuple[int, ...]
    state_dims: tuple[int, ...]
    gate_count: int
    qubit_count_formula: dict


def build_circuit(n_copies: int, target: Iterable[int], state_dims: Iterable[int]) -> CircuitSpec:
    """Resource summary: one H, one controlled-SWAP and one H per control."""
    if n_copies < 2:
        raise InvalidArgument("the test needs at least 2 copies")
    dims = tuple(state_dims)
    target = tuple(sorted(set(target)))
    d_total = math.prod(dims)
    d_target = math.prod(dims[i - 1] for i in target)
    data = n_copies * math.ceil(math.log2(d_total)) if d_total > 1 else 0
    return CircuitSpec(
        n_copies=n_copies,
        target=target,
        state_dims=dims,
        gate_count=3 * (n_copies - 1),
        qubit_count_formula={
            "control_qubits": n_copies - 1,
            "data_qubits": data,
            "total_qubits": n_copies - 1 + data,
            "target_dim": d_target,
        },
    )


def _finalize(p: np.ndarray, n_controls: int) -> OutcomeDistribution:
    lo = p.min()
    if lo < -NEG_TOL:
        raise ConsistencyError(f"computed probability {lo!r} is negative beyond roundoff")
    p = np.where(p < 0, 0.0, p)
    return OutcomeDistribution(p / p.sum(), n_controls)


def _check_copies(n_copies: int, cap: int) -> None:
    if n_copies < 2:
        raise InvalidArgument("the test needs at least 2 copies")
    if n_copies > cap:
        raise ResourceLimit(f"n_copies={n_copies} exceeds the cap of {cap}")


# -- moment path ---------------------------------------------------------------

def _ladder_permutations(n: int) -> np.ndarray:
    """Copy permutations of ``S_{n-1}^{x_{n-1}} ... S_1^{x_1}`` for every x.

    Row ``x`` (``x_1`` most significant) maps copy position -> copy position,
    0-based.
    """
    nc = n - 1
    perms = np.tile(np.arange(n, dtype=np.int8), (2**nc, 1))
    for k in range(1, n):
        on = (np.arange(2**nc) >> (nc - k)) & 1 == 1
        a, b = k - 1, k
        sel = perms[on]
        swapped = sel.copy()
        swapped[sel == a] = b
        swapped[sel == b] = a
        perms[on] = swapped
    return perms


def _cycle_counts(perms: np.ndarray) -> np.ndarray:
    """Per-row count of cycles of each length; column L holds length L."""
    rows, n = perms.shape
    ident = np.arange(n, dtype=perms.dtype)
    length = np.zeros((rows, n), dtype=np.int8)
    cur = perms.copy()
    for t in range(1, n + 1):
        hit = (cur == ident) & (length == 0)
        length[hit] = t
        cur = np.take_along_axis(perms, cur.astype(np.intp), axis=1)
    counts = np.zeros((rows, n + 1), dtype=np.int64)
    for L in range(1, n + 1):
        counts[:, L] = np.count_nonzero(length == L, axis=1) // L
    return counts


def _walsh(a: np.ndarray, axis: int) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform, ``H[z, x] = (-1)^{popcount(z & x)}``."""
    a = np.moveaxis(a, axis, 0)
    size = a.shape[0]
    bits = size.bit_length() - 1
    rest = a.shape[1:]
    t = a.reshape((2,) * bits + rest)
    for ax in range(bits):
        t0 = np.take(t, 0, axis=ax)
        t1 = np.take(t, 1, axis=ax)
        t = np.stack([t0 + t1, t0 - t1], axis=ax)
    return np.moveaxis(t.reshape((size,) + rest), 0, axis)


def exact_distribution_moments(
    mv: MomentVector, n_copies: int, cap: int = MOMENT_COPY_CAP
) -> OutcomeDistribution:
    """``p(z)`` from the power traces of the target reduced state.

    With ``P_x = S_{n-1}^{x_{n-1}} ... S_1^{x_1}`` the Kraus operator is
    ``K_z = 2^{1-n} sum_x (-1)^{z.x} P_x``, hence

        p(z) = 4^{1-n} sum_{x,y} (-1)^{z.x + z.y} tr(P_x^{-1} P_y rho^{(x)n})

    and every trace is a product of power traces over the cycles of
    ``P_x^{-1} P_y``.  The double sum is a two-sided Walsh transform.
    """
    _check_copies(n_copies, cap)
    if mv.k_max < n_copies:
        raise InvalidArgument(f"need moments m_1..m_{n_copies}, have m_1..m_{mv.k_max}")
    nc = n_copies - 1
    size = 2**nc
    perms = _ladder_permutations(n_copies)
    inv = np.argsort(perms, axis=1).astype(np.int8)
    # (P_x^{-1} P_y)(c) = P_x^{-1}(P_y(c))
    pairs = np.take_along_axis(
        np.repeat(inv, size, axis=0),
        np.tile(perms, (size, 1)).astype(np.intp),
        axis=1,
    )
    counts = _cycle_counts(pairs)
    types, inverse = np.unique(counts, axis=0, return_inverse=True)
    m = [1.0] + [mv.m(L) for L in range(1, n_copies + 1)]
    values = np.array([math.prod(m[L] ** int(c) for L, c in enumerate(row) if L and c) for row in types])
    trace = values[inverse.reshape(-1)].reshape(size, size)
    transformed = _walsh(_walsh(trace, 0), 1)
    p = np.diagonal(transformed) / 4.0**nc
    return _finalize(p.copy(), nc)


# -- dense path ----------------------------------------------------------------

def _copy_swap_map(d: int, n: int, k: int) -> np.ndarray:
    idx = np.arange(d**n).reshape((d,) * n)
    return np.swapaxes(idx, k - 1, k).reshape(-1)


def kraus_operator(z: str, d: int) -> np.ndarray:
    """Dense ``K_z = prod_k (I + (-1)^{z_k} S_k) / 2`` with ``S_1`` applied first."""
    n = len(z) + 1
    size = d**n
    if size > DENSE_DIM_CAP:
        raise ResourceLimit(f"dense Kraus operator needs d^n = {size} > {DENSE_DIM_CAP}")
    K = np.eye(size)
    for k in range(1, n):
        sigma = _copy_swap_map(d, n, k)
        sign = -1.0 if z[k - 1] == "1" else 1.0
        K = (K + sign * K[sigma, :]) / 2
    return K


def tensor_power(rho: np.ndarray, n: int) -> np.ndarray:
    out = rho
    for _ in range(n - 1):
        out = np.kron(out, rho)
    return out


def exact_distribution_dense(dm: DensityMatrix, n_copies: int) -> OutcomeDistribution:
    """``p(z) = tr(K_z^dag K_z rho^{(x)n})`` by explicit matrices."""
    _check_copies(n_copies, MOMENT_COPY_CAP)
    d = dm.dim
    if d**n_copies > DENSE_DIM_CAP:
        raise ResourceLimit(f"dense path needs d^n = {d**n_copies} > {DENSE_DIM_CAP}")
    nc = n_copies - 1
    X = tensor_power(dm.entries, n_copies)
    p = np.empty(2**nc)
    for i in range(2**nc):
        K = kraus_operator(bitstring(i, nc), d)
        p[i] = np.sum((K.T @ K) * X.T).real
    return _finalize(p, nc)


# -- statevector path ----------------------------------------------------------

def _hadamard(t: np.ndarray, axis: int) -> None:
    idx0 = [slice(None)] * t.ndim
    idx1 = [slice(None)] * t.ndim
    idx0[axis], idx1[axis] = 0, 1
    a, b = t[tuple(idx0)], t[tuple(idx1)]
    diff = a - b
    a += b
    b[...] = diff
    t *= 1 / math.sqrt(2)


def normalize_target(target: Union[str, Iterable[int], None], n_sub: int) -> tuple[int, ...]:
    if target is None:
        return (1,)
    if isinstance(target, str):
        if target.strip().lower() == "all":
            return tuple(range(1, n_sub + 1))
        try:
            target = [int(t) for t in target.split(",") if t.strip()]
        except ValueError:
            raise InvalidArgument(f"cannot parse target {target!r}") from None
    tgt = tuple(sorted(set(int(i) for i in target)))
    if not tgt or any(not 1 <= i <= n_sub for i in tgt):
        raise InvalidArgument(f"target {list(tgt)} must be a nonempty subset of 1..{n_sub}")
    return tgt


def exact_distribution_statevector(
    state: PureState, n_copies: int, target: Iterable[int] = (1,)
) -> OutcomeDistribution:
    """Simulate the circuit amplitude by amplitude and marginalize the controls."""
    if not isinstance(state, PureState):
        raise InvalidArgument("the statevector path requires a pure global state")
    _check_copies(n_copies, STATEVECTOR_COPY_CAP)
    dims = state.dims
    tgt = normalize_target(target, len(dims))
    nc = n_copies - 1
    n_amp = 2**nc * state.dim**n_copies
    if n_amp > STATEVECTOR_AMP_CAP:
        raise ResourceLimit(f"statevector needs {n_amp} amplitudes > {STATEVECTOR_AMP_CAP}")
    N = len(dims)
    t = np.zeros((2,) * nc + dims * n_copies, dtype=complex)
    t[(0,) * nc] = tensor_power(state.amplitudes.reshape(-1, 1), n_copies).reshape(dims * n_copies)
    for c in range(nc):
        _hadamard(t, c)
    for k in range(1, n_copies):
        sub = t[(slice(None),) * (k - 1) + (1,)]
        # axes of sub: remaining nc-1 controls, then copy-major data axes
        base = nc - 1
        perm = list(range(sub.ndim))
        for s in tgt:
            a = base + (k - 1) * N + (s - 1)
            b = base + k * N + (s - 1)
            perm[a], perm[b] = perm[b], perm[a]
        sub[...] = np.transpose(sub, perm).copy()
    for c in range(nc):
        _hadamard(t, c)
    probs = np.sum(np.abs(t.reshape(2**nc, -1)) ** 2, axis=1)
    return _finalize(probs, nc)


# -- dispatch and sampling -----------------------------------------------------

METHODS = ("moments", "dense", "statevector")


def exact_distribution(
    state: State,
    n_copies: int,
    target: Union[str, Iterable[int], None] = (1,),
    method: str = "moments",
) -> OutcomeDistribution:
    tgt = normalize_target(target, len(state.dims))
    if method == "moments":
        rho_x = reduced_density(state, tgt)
        return exact_distribution_moments(moments(rho_x, n_copies), n_copies)
    if method == "dense":
        return exact_distribution_dense(reduced_density(state, tgt), n_copies)
    if method == "statevector":
        return exact_distribution_statevector(state, n_copies, tgt)
    raise InvalidArgument(f"unknown method {method!r}; expected one of {METHODS}")


def sample(dist: OutcomeDistribution, shots: int, seed: Optional[int] = 0) -> ShotCounts:
    if shots < 1:
        raise InvalidArgument("shots must be >= 1")
    rng = np.random.default_rng(seed)
    return ShotCounts(rng.multinomial(shots, dist.probabilities), dist.n_controls)


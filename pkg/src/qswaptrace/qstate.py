"""Multipartite states, partial traces and exact power traces.

Subsystems are numbered from 1.  Basis ordering is row-major over ``dims``
with the first subsystem as the most significant index, so a pure state of
dims ``[2, 3]`` is stored as ``psi.reshape(2, 3)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import InvalidArgument, InvalidState

PSD_TOL = 1e-10
NORM_TOL = 1e-10


def _check_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise InvalidArgument("dims must be a nonempty list")
    if any(d < 1 for d in dims):
        raise InvalidArgument(f"all dims must be >= 1, got {list(dims)}")
    return dims


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = _check_dims(self.dims)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != math.prod(dims):
            raise InvalidState(
                f"amplitude vector has length {amps.size}, expected {math.prod(dims)}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidState(f"state is not normalized (norm={norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> "DensityMatrix":
        psi = self.amplitudes
        return DensityMatrix(np.outer(psi, psi.conj()), self.dims)


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = _check_dims(self.dims)
        rho = np.array(self.entries, dtype=complex)
        side = math.prod(dims)
        if rho.shape != (side, side):
            raise InvalidState(f"matrix shape {rho.shape} does not match dims {list(dims)}")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > PSD_TOL:
            raise InvalidState("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > PSD_TOL:
            raise InvalidState(f"density matrix trace is {tr!r}, expected 1")
        rho = (rho + rho.conj().T) / 2
        if np.linalg.eigvalsh(rho)[0] < -PSD_TOL:
            raise InvalidState("density matrix is not positive semidefinite")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """Ascending spectrum with roundoff negatives clamped to zero."""
        lam = np.linalg.eigvalsh(self.entries)
        if lam[0] < -PSD_TOL:
            raise InvalidState(f"negative eigenvalue {lam[0]!r}")
        return np.where(lam < 0, 0.0, lam)

    def rank(self, tol: float = 1e-12) -> int:
        return int(np.sum(self.eigenvalues() > tol))


@dataclass(frozen=True)
class MomentVector:
    """Power traces ``m_1 .. m_K`` of a density matrix of side ``source_dim``.

    ``values[0]`` is ``m_1``.  Use :meth:`m` for 1-based access; ``m(0)``
    returns ``tr(I) = source_dim``.  Estimated moments are allowed to break
    the physical invariants, so the constructor only checks shape; call
    :meth:`validate` when exactness is expected.
    """

    values: np.ndarray
    source_dim: int
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.size == 0:
            raise InvalidArgument("a moment vector needs at least m_1")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "source_dim", int(self.source_dim))
        object.__setattr__(self, "warnings", tuple(self.warnings))

    @property
    def k_max(self) -> int:
        return self.values.size

    def m(self, k: int) -> float:
        if k == 0:
            return float(self.source_dim)
        if not 1 <= k <= self.k_max:
            raise InvalidArgument(f"moment m_{k} not available (have m_1..m_{self.k_max})")
        return float(self.values[k - 1])

    def validate(self, tol: float = PSD_TOL) -> "MomentVector":
        v = self.values
        if abs(v[0] - 1.0) > tol:
            raise InvalidState(f"m_1 = {v[0]!r}, expected 1")
        if np.any(np.diff(v) > tol) or np.any(v <= 0):
            raise InvalidState("power traces must be positive and nonincreasing in k")
        k = np.arange(1, v.size + 1)
        floor = float(self.source_dim) ** (1.0 - k)
        if np.any(v < floor - tol):
            raise InvalidState("power traces fall below the maximally mixed bound d^(1-k)")
        return self


State = Union[PureState, DensityMatrix]


def make_ghz(num_qubits: int) -> PureState:
    if num_qubits < 2:
        raise InvalidArgument("GHZ state needs at least 2 qubits")
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[0] = amps[-1] = 1 / math.sqrt(2)
    return PureState(amps, (2,) * num_qubits)


def make_w(num_qubits: int) -> PureState:
    if num_qubits < 2:
        raise InvalidArgument("W state needs at least 2 qubits")
    amps = np.zeros(2**num_qubits, dtype=complex)
    for q in range(num_qubits):
        amps[1 << q] = 1 / math.sqrt(num_qubits)
    return PureState(amps, (2,) * num_qubits)


def product_zero(dims: Sequence[int]) -> PureState:
    dims = _check_dims(dims)
    amps = np.zeros(math.prod(dims), dtype=complex)
    amps[0] = 1.0
    return PureState(amps, dims)


def maximally_mixed(dim: int) -> DensityMatrix:
    if dim < 1:
        raise InvalidArgument("dim must be >= 1")
    return DensityMatrix(np.eye(dim, dtype=complex) / dim, (dim,))


def random_pure(dims: Sequence[int], seed: int) -> PureState:
    dims = _check_dims(dims)
    rng = np.random.default_rng(seed)
    n = math.prod(dims)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return PureState(v / np.linalg.norm(v), dims)


def random_mixed(dim: int, rank: int, seed: int) -> DensityMatrix:
    if dim < 1 or not 1 <= rank <= dim:
        raise InvalidArgument(f"need 1 <= rank <= dim, got rank={rank}, dim={dim}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return DensityMatrix(rho / np.trace(rho).real, (dim,))


def _normalize_keep(keep: Iterable[int], n_sub: int) -> list[int]:
    keep = sorted(set(int(i) for i in keep))
    if not keep:
        raise InvalidArgument("keep must name at least one subsystem")
    bad = [i for i in keep if not 1 <= i <= n_sub]
    if bad:
        raise InvalidArgument(f"subsystem indices {bad} out of range 1..{n_sub}")
    return keep


def reduced_density(state: State, keep: Iterable[int]) -> DensityMatrix:
    """Partial trace over every subsystem not listed in ``keep`` (1-based)."""
    dims = state.dims
    keep = _normalize_keep(keep, len(dims))
    kept = [i - 1 for i in keep]
    traced = [i for i in range(len(dims)) if i not in kept]
    kdims = tuple(dims[i] for i in kept)
    side = math.prod(kdims)
    if isinstance(state, PureState):
        psi = state.amplitudes.reshape(dims)
        psi = np.transpose(psi, kept + traced).reshape(side, -1)
        rho = psi @ psi.conj().T
    else:
        n = len(dims)
        t = state.entries.reshape(dims + dims)
        rows = kept + traced
        t = np.transpose(t, rows + [n + i for i in rows])
        rest = math.prod(dims[i] for i in traced)
        t = t.reshape(side, rest, side, rest)
        rho = np.einsum("ajbj->ab", t)
    return DensityMatrix(rho, kdims)


def as_density(state: State) -> DensityMatrix:
    return state.density() if isinstance(state, PureState) else state


def moments(dm: DensityMatrix, k_max: int) -> MomentVector:
    """Exact power traces ``tr(dm^k)``, k = 1..k_max, from the spectrum."""
    if k_max < 1:
        raise InvalidArgument("k_max must be >= 1")
    lam = dm.eigenvalues()
    vals = [math.fsum(lam**k) for k in range(1, k_max + 1)]
    return MomentVector(np.array(vals), dm.dim)


# -- built-in fixtures -------------------------------------------------------

_BUILTIN = {f"ghz{n}": (make_ghz, n) for n in range(2, 7)}
_BUILTIN.update({f"w{n}": (make_w, n) for n in range(3, 7)})
_BUILTIN.update({"bell": (make_ghz, 2), "maxmix2": (maximally_mixed, 2), "maxmix3": (maximally_mixed, 3)})
BUILTIN_STATES = tuple(_BUILTIN)


def builtin_state(name: str) -> State:
    """Resolve names like ``ghz3``, ``w4``, ``bell``, ``maxmix2``."""
    try:
        maker, n = _BUILTIN[name.strip().lower()]
    except KeyError:
        raise InvalidArgument(
            f"unknown state {name!r}; expected one of {', '.join(BUILTIN_STATES)}"
        ) from None
    return maker(n)


# -- state files ---------------------------------------------------------------

def state_to_json(state: State) -> dict:
    if isinstance(state, PureState):
        data = state.amplitudes
        kind = "pure"
    else:
        data = state.entries.reshape(-1)
        kind = "mixed"
    return {
        "dims": list(state.dims),
        "kind": kind,
        "data": [[float(z.real), float(z.imag)] for z in data],
    }


def state_from_json(obj: dict) -> State:
    try:
        dims = _check_dims(obj["dims"])
        kind = obj["kind"]
        raw = np.asarray(obj["data"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgument(f"malformed state object: {exc}") from None
    if raw.shape[-1] != 2:
        raise InvalidArgument("state data entries must be [re, im] pairs")
    z = raw[..., 0] + 1j * raw[..., 1]
    if kind == "pure":
        return PureState(z.reshape(-1), dims)
    if kind == "mixed":
        side = math.prod(dims)
        if z.size != side * side:
            raise InvalidArgument(f"mixed data has {z.size} entries, expected {side * side}")
        return DensityMatrix(z.reshape(side, side), dims)
    raise InvalidArgument(f"unknown state kind {kind!r}")


def load_state(path: Union[str, Path]) -> State:
    with open(path) as fh:
        return state_from_json(json.load(fh))


def save_state(state: State, path: Union[str, Path]) -> None:
    with open(path, "w") as fh:
        json.dump(state_to_json(state), fh)

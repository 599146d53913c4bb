"""Traces of adjacent-SWAP words acting on ``k`` identical copies.

A word ``[i1, i2, ..., im]`` denotes the operator product
``S_i1 S_i2 ... S_im`` where ``S_i`` swaps copies ``i`` and ``i+1``.  The
trace ``tr(S_i1 ... S_im rho^{(x)k})`` factorizes over the cycles of the
underlying permutation: each cycle of length ``L`` contributes
``tr(rho^L)``.  :func:`eval_trace_cycles` uses that factorization;
:func:`eval_trace_dense` contracts the operator on the full ``d^k``
dimensional space and serves as an independent check.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, ResourceLimit
from .qstate import DensityMatrix, MomentVector, moments

DENSE_CAP = 2**14

_SUPERSCRIPT = str.maketrans("0123456789", "⁰¹²³⁴⁵⁶⁷⁸⁹")


@dataclass(frozen=True)
class PermutationWord:
    transpositions: tuple[int, ...]
    num_copies: int

    def __post_init__(self):
        word = tuple(int(i) for i in self.transpositions)
        k = int(self.num_copies)
        if k < 1:
            raise InvalidArgument("num_copies must be >= 1")
        bad = [i for i in word if not 1 <= i <= k - 1]
        if bad:
            raise InvalidArgument(f"transposition indices {bad} outside 1..{k - 1}")
        object.__setattr__(self, "transpositions", word)
        object.__setattr__(self, "num_copies", k)

    @classmethod
    def parse(cls, text: str, num_copies: int) -> "PermutationWord":
        text = text.strip().strip("[]")
        try:
            word = [int(t) for t in text.replace(" ", "").split(",") if t]
        except ValueError:
            raise InvalidArgument(f"cannot parse word {text!r}") from None
        return cls(tuple(word), num_copies)


@dataclass(frozen=True)
class CycleType:
    lengths: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(sorted(self.lengths, reverse=True)))

    @property
    def num_copies(self) -> int:
        return sum(self.lengths)

    def expression(self) -> str:
        """Symbolic product such as ``tr(ρ²)·tr(ρ³)``."""
        counts = Counter(L for L in self.lengths if L > 1)
        if not counts:
            return "1"
        parts = []
        for L in sorted(counts):
            term = "tr(ρ)" if L == 1 else f"tr(ρ{str(L).translate(_SUPERSCRIPT)})"
            if counts[L] > 1:
                term += str(counts[L]).translate(_SUPERSCRIPT)
            parts.append(term)
        return "·".join(parts)


def compose_word(word: PermutationWord) -> tuple[int, ...]:
    """Permutation of ``{1..k}`` as a tuple ``perm`` with ``perm[x-1] = π(x)``.

    The rightmost transposition is applied first.
    """
    k = word.num_copies
    perm = list(range(1, k + 1))
    for i in reversed(word.transpositions):
        for x in range(k):
            if perm[x] == i:
                perm[x] = i + 1
            elif perm[x] == i + 1:
                perm[x] = i
    return tuple(perm)


def cycles(perm: Sequence[int]) -> list[tuple[int, ...]]:
    k = len(perm)
    seen = [False] * (k + 1)
    out = []
    for start in range(1, k + 1):
        if seen[start]:
            continue
        cyc = []
        x = start
        while not seen[x]:
            seen[x] = True
            cyc.append(x)
            x = perm[x - 1]
        out.append(tuple(cyc))
    return out


def cycle_type(perm: Sequence[int]) -> CycleType:
    return CycleType(tuple(len(c) for c in cycles(perm)))


def trace_from_cycle_type(ct: CycleType, mv: MomentVector) -> float:
    # fixed points contribute m_1 explicitly
    return math.prod(mv.m(L) for L in ct.lengths)


def eval_trace_cycles(word: PermutationWord, dm: DensityMatrix) -> float:
    ct = cycle_type(compose_word(word))
    return trace_from_cycle_type(ct, moments(dm, word.num_copies))


def swap_index_map(d: int, k: int, i: int) -> np.ndarray:
    """Basis permutation of ``(C^d)^{(x)k}`` implementing ``S_i`` (1-based).

    ``S_i |b> = |sigma(b)>`` with ``sigma`` returned as an index array.
    """
    idx = np.arange(d**k).reshape((d,) * k)
    return np.swapaxes(idx, i - 1, i).reshape(-1)


def word_operator_map(word: PermutationWord, d: int) -> np.ndarray:
    """Index array ``sigma`` with ``P |b> = |sigma[b]>`` for the word's operator."""
    k = word.num_copies
    sigma = np.arange(d**k)
    # P = S_i1 ... S_im acts on a basis vector rightmost factor first
    for i in reversed(word.transpositions):
        sigma = swap_index_map(d, k, i)[sigma]
    return sigma


def eval_trace_dense(word: PermutationWord, dm: DensityMatrix) -> float:
    """``tr(P rho^{(x)k})`` contracted over the full ``d^k`` basis.

    ``P`` is a permutation operator, so ``tr(P X) = sum_b X[b, sigma(b)]``
    and only the needed entries of ``rho^{(x)k}`` are formed.
    """
    d, k = dm.dim, word.num_copies
    if d**k > DENSE_CAP:
        raise ResourceLimit(f"dense trace needs d^k = {d**k} > {DENSE_CAP}")
    sigma = word_operator_map(word, d)
    rows = np.array(np.unravel_index(np.arange(d**k), (d,) * k))
    cols = np.array(np.unravel_index(sigma, (d,) * k))
    rho = dm.entries
    terms = np.ones(d**k, dtype=complex)
    for j in range(k):
        terms *= rho[rows[j], cols[j]]
    return float(math.fsum(terms.real))


def describe_word(word: PermutationWord) -> dict:
    perm = compose_word(word)
    ct = cycle_type(perm)
    return {
        "word": list(word.transpositions),
        "copies": word.num_copies,
        "permutation": list(perm),
        "cycles": [list(c) for c in cycles(perm)],
        "cycle_type": list(ct.lengths),
        "expression": ct.expression(),
    }

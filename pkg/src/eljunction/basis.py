"""Fock basis of N bosons on L sites.

States are ordered ascending-lexicographically on (n_1, ..., n_L), so for
N=3, L=12 the first state is (0, ..., 0, 3) and the last is (3, 0, ..., 0).
Indices are 1-based everywhere outside this module's internals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from .errors import NotInBasisError, ValidationError
from .io import write_csv


def dimension(N: int, L: int) -> int:
    """Number of ways to put N bosons on L sites, C(L+N-1, N)."""
    if L < 1:
        raise ValidationError("L", f"need at least one site, got {L}")
    if N < 0:
        raise ValidationError("N", f"particle count must be >= 0, got {N}")
    return comb(L + N - 1, N)


def _compositions(N: int, L: int):
    # lexicographic ascending: smallest n_1 first, recursing left to right
    if L == 1:
        yield (N,)
        return
    for first in range(N + 1):
        for rest in _compositions(N - first, L - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class FockBasis:
    N: int
    L: int
    states: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.states.shape[0]

    def state(self, l: int) -> tuple[int, ...]:
        """Occupation vector of the 1-based configuration ``l``."""
        if not 1 <= l <= len(self):
            raise IndexError(f"configuration index {l} outside 1..{len(self)}")
        return tuple(int(x) for x in self.states[l - 1])

    def index_of(self, v) -> int:
        return index_of(v, self)

    def label(self, l: int) -> str:
        return "|" + ",".join(str(x) for x in self.state(l)) + ">"

    def to_csv(self, path) -> Path:
        header = ["l"] + [f"n_{j}" for j in range(1, self.L + 1)]
        rows = ((l, *row.tolist()) for l, row in enumerate(self.states, start=1))
        return write_csv(path, header, rows, kind="basis")


def enumerate_basis(N: int, L: int) -> FockBasis:
    D = dimension(N, L)
    states = np.array(list(_compositions(N, L)), dtype=np.int64).reshape(D, L)
    states.setflags(write=False)
    return FockBasis(N=N, L=L, states=states)


def index_of(v, basis: FockBasis) -> int:
    """Combinatorial rank of occupation vector ``v`` (1-based).

    Counts the configurations that precede ``v`` lexicographically: at each
    site, every smaller occupation x leaves ``remaining - x`` particles to be
    spread over the sites to the right.
    """
    v = [int(x) for x in v]
    if len(v) != basis.L or any(x < 0 for x in v) or sum(v) != basis.N:
        raise NotInBasisError(f"{tuple(v)} not in basis (N={basis.N}, L={basis.L})")
    rank = 0
    remaining = basis.N
    for i, n in enumerate(v[:-1]):
        sites_right = basis.L - i - 1
        for x in range(n):
            rank += comb(remaining - x + sites_right - 1, sites_right - 1)
        remaining -= n
    return rank + 1

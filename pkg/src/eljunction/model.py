"""Driven Bose-Hubbard chain split into a disordered and a driven half.

Sites are numbered 1..L with L = 2M. Sites 1..M carry the disorder and
static bonds; bond M (the interface) and bonds M+1..L-1 carry the drive
g(t) = g0 + g1 cos(omega t). Energies are in units of g0 with hbar = 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import FockBasis, enumerate_basis, index_of
from .errors import ValidationError


def resonant_omega(h: float, g0: float, M: int) -> float:
    """Twice the small-oscillation frequency of the classical limit."""
    return 2.0 * np.sqrt(8.0 * np.pi**2 * h * g0) / M


@dataclass(frozen=True)
class ModelParams:
    L: int = 12
    M: int = 6
    N: int = 2
    h: float = 1.0
    g0: float = 1.0
    g1: float = 0.9
    U: float = 3.5
    omega: float | None = None
    W: float = 1.0

    def __post_init__(self):
        if self.omega is None:
            object.__setattr__(self, "omega", resonant_omega(self.h, self.g0, self.M))
        if self.M < 2:
            raise ValidationError("M", f"domain size must be >= 2, got {self.M}")
        if self.L != 2 * self.M:
            raise ValidationError("L", f"must equal 2*M = {2 * self.M}, got {self.L}")
        if self.N < 0:
            raise ValidationError("N", f"must be >= 0, got {self.N}")
        # g0 = 0 is allowed as the decoupled limit (all-zero hopping)
        if self.g0 < 0:
            raise ValidationError("g0", f"must be >= 0, got {self.g0}")
        if self.g1 < 0:
            raise ValidationError("g1", f"must be >= 0, got {self.g1}")
        if self.W < 0:
            raise ValidationError("W", f"must be >= 0, got {self.W}")
        if not self.omega > 0:
            raise ValidationError("omega", f"must be > 0, got {self.omega}")

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    def replace(self, **changes) -> "ModelParams":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return ModelParams(**values)


@dataclass(frozen=True)
class DisorderRealization:
    delta: np.ndarray
    seed: int
    W: float

    @classmethod
    def draw(cls, seed: int, W: float, M: int) -> "DisorderRealization":
        """i.i.d. uniform offsets on [-W, W] from a Philox stream keyed by ``seed``."""
        rng = np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))
        delta = W * rng.uniform(-1.0, 1.0, size=M)
        delta.setflags(write=False)
        return cls(delta=delta, seed=int(seed), W=float(W))

    @classmethod
    def clean(cls, M: int) -> "DisorderRealization":
        return cls(delta=np.zeros(M), seed=0, W=0.0)


def onsite_profile(params: ModelParams, disorder: DisorderRealization | None = None) -> np.ndarray:
    """On-site energies h_j for j = 1..L; disorder only on the first M sites."""
    j = np.arange(1, params.L + 1)
    hj = params.h * np.cos(2.0 * np.pi * j / params.M)
    if disorder is not None:
        delta = np.asarray(disorder.delta, dtype=float)
        if delta.shape != (params.M,):
            raise ValidationError("disorder", f"expected {params.M} offsets, got {delta.shape}")
        hj[: params.M] += delta
    return hj


def coupling_at(j: int, t: float, params: ModelParams) -> float:
    """Hopping amplitude on bond (j, j+1) at time ``t``."""
    if not 1 <= j <= params.L - 1:
        raise ValidationError("bond", f"index {j} outside 1..{params.L - 1}")
    if j < params.M:
        return params.g0
    return params.g0 + params.g1 * np.cos(params.omega * t)


def bragg_branches(j: int, params: ModelParams) -> tuple[float, float]:
    """(E_+(j), E_-(j)) = h/2 cos(2 pi j/M) -/+ 2 g0.

    The h/2 prefactor is deliberate even though the on-site term
    itself uses h cos(2 pi j/M); the branches are a diagnostic only.
    """
    if not 1 <= j <= params.M:
        raise ValidationError("j", f"site {j} outside 1..{params.M}")
    centre = 0.5 * params.h * np.cos(2.0 * np.pi * j / params.M)
    return centre - 2.0 * params.g0, centre + 2.0 * params.g0


@dataclass(frozen=True)
class _Bond:
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray


@dataclass(frozen=True)
class LatticeOperators:
    """Per-bond hopping structure of one particle-number sector.

    Built once per (N, L) and reused across disorder draws; only the
    diagonal changes between realizations.
    """

    basis: FockBasis
    bonds: tuple = field(repr=False)
    _sums: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def build(cls, basis: FockBasis) -> "LatticeOperators":
        states = basis.states
        bonds = []
        for b in range(basis.L - 1):
            rows, cols, vals = [], [], []
            for col, s in enumerate(states):
                if s[b + 1] == 0:
                    continue
                target = s.copy()
                target[b + 1] -= 1
                target[b] += 1
                row = index_of(target, basis) - 1
                rows.append(row)
                cols.append(col)
                # <target| a_b^dag a_{b+1} |s>
                vals.append(np.sqrt(s[b + 1] * (s[b] + 1.0)))
            bonds.append(
                _Bond(np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp), np.array(vals))
            )
        return cls(basis=basis, bonds=tuple(bonds))

    def hop(self, j: int) -> np.ndarray:
        """Dense matrix of a_j^dag a_{j+1} + h.c. for 1-based bond ``j``."""
        D = len(self.basis)
        out = np.zeros((D, D))
        bond = self.bonds[j - 1]
        out[bond.rows, bond.cols] += bond.vals
        out[bond.cols, bond.rows] += bond.vals
        return out

    def diagonal(self, hj: np.ndarray, U: float) -> np.ndarray:
        n = self.basis.states.astype(float)
        return n @ hj + 0.5 * U * np.sum(n * (n - 1.0), axis=1)

    def hop_sum(self, first: int, last: int) -> np.ndarray:
        """Sum of bond hopping matrices for bonds first..last (inclusive, 1-based)."""
        key = (first, last)
        cache = self._sums
        if key not in cache:
            D = len(self.basis)
            out = np.zeros((D, D))
            for j in range(first, last + 1):
                bond = self.bonds[j - 1]
                np.add.at(out, (bond.rows, bond.cols), bond.vals)
                np.add.at(out, (bond.cols, bond.rows), bond.vals)
            out.setflags(write=False)
            cache[key] = out
        return cache[key]


_OPERATOR_CACHE: dict[tuple[int, int], LatticeOperators] = {}


def lattice_operators(N: int, L: int) -> LatticeOperators:
    key = (N, L)
    if key not in _OPERATOR_CACHE:
        _OPERATOR_CACHE[key] = LatticeOperators.build(enumerate_basis(N, L))
    return _OPERATOR_CACHE[key]


def _check_basis(basis: FockBasis, params: ModelParams):
    if basis.N != params.N or basis.L != params.L:
        raise ValidationError(
            "basis", f"built for N={basis.N}, L={basis.L} but params have N={params.N}, L={params.L}"
        )


def hamiltonian_matrix(
    t: float,
    basis: FockBasis,
    params: ModelParams,
    disorder: DisorderRealization | None = None,
) -> np.ndarray:
    """Dense H(t) in the Fock basis, assembled bond by bond."""
    _check_basis(basis, params)
    ops = lattice_operators(basis.N, basis.L)
    H = np.diag(ops.diagonal(onsite_profile(params, disorder), params.U))
    for j in range(1, params.L):
        g = coupling_at(j, t, params)
        if g != 0.0:
            H += g * ops.hop(j)
    return H


@dataclass(frozen=True)
class DrivenHamiltonian:
    """H(t) = static + cos(omega t) * drive, the form the propagator consumes."""

    static: np.ndarray
    drive: np.ndarray
    omega: float

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    def at(self, t: float) -> np.ndarray:
        return self.static + np.cos(self.omega * t) * self.drive


def driven_hamiltonian(
    params: ModelParams,
    disorder: DisorderRealization | None = None,
    basis: FockBasis | None = None,
) -> DrivenHamiltonian:
    if basis is None:
        ops = lattice_operators(params.N, params.L)
    else:
        _check_basis(basis, params)
        ops = lattice_operators(basis.N, basis.L)
    static = np.diag(ops.diagonal(onsite_profile(params, disorder), params.U))
    if params.g0 != 0.0:
        static = static + params.g0 * ops.hop_sum(1, params.L - 1)
    drive = params.g1 * ops.hop_sum(params.M, params.L - 1)
    return DrivenHamiltonian(static=static, drive=drive, omega=params.omega)

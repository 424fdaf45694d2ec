"""Hardcore-boson limit through the Jordan-Wigner map.

Hardcore bosons on the chain map to free fermions with single-particle
matrix diag(h) plus hopping g_l(t) on bond (l, l+1). The one-period
effective matrix M fixes the stroboscopic many-body Hamiltonian

    H_eff = sum_l M_ll n_l + sum_{l != l'} M_ll' f^dag_l f_l'

which in spin language, with n_l = (1 + Z_l)/2, is a sum of XX+YY terms
joined by Z strings over the sites strictly between l and l'. The constant
part of M_ll n_l only shifts the global phase.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .floquet import PropagatorSettings, effective_hamiltonian, floquet_from_hamiltonian, unitarity_error
from .errors import NumericalToleranceError
from .model import DisorderRealization, DrivenHamiltonian, ModelParams, onsite_profile


def single_particle_hamiltonian(params: ModelParams, disorder: DisorderRealization | None = None) -> DrivenHamiltonian:
    """L x L hopping matrix in site order, split into static and driven parts."""
    L, M = params.L, params.M
    static = np.diag(onsite_profile(params, disorder))
    drive = np.zeros((L, L))
    for l in range(L - 1):
        static[l, l + 1] = static[l + 1, l] = params.g0
        # bonds M..L-1 (1-based) carry the drive
        if l + 1 >= M:
            drive[l, l + 1] = drive[l + 1, l] = params.g1
    return DrivenHamiltonian(static=static, drive=drive, omega=params.omega)


def fermion_floquet_effective(
    params: ModelParams,
    disorder: DisorderRealization | None = None,
    settings: PropagatorSettings | None = None,
) -> np.ndarray:
    """Effective single-particle matrix M (site order, Hermitian)."""
    settings = settings or PropagatorSettings()
    ham = single_particle_hamiltonian(params, disorder)
    F = floquet_from_hamiltonian(ham, settings.K)
    err = unitarity_error(F)
    if err > settings.unitarity_tol:
        raise NumericalToleranceError(f"single-particle Floquet operator not unitary ({err:.3e})")
    return effective_hamiltonian(F, params.period, settings.unitarity_tol)


def boson_to_site_order(H_boson_n1: np.ndarray) -> np.ndarray:
    """Reorder an N=1 Fock-basis matrix to site order.

    The N=1 Fock basis lists the particle on site L first, so configuration
    l sits on site L + 1 - l.
    """
    return np.asarray(H_boson_n1)[::-1, ::-1]


@dataclass(frozen=True)
class SpinCouplingTable:
    fields: np.ndarray  # Z-field strengths M_ll, site order
    rows: list  # (l, l_tilde, magnitude, phase, string_len) with l < l_tilde

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(-1, 5)


def spin_coupling_report(M: np.ndarray, atol: float = 0.0) -> SpinCouplingTable:
    """One XX+YY coupling per site pair with its Jordan-Wigner string length."""
    M = np.asarray(M)
    L = M.shape[0]
    rows = []
    for l in range(L):
        for lt in range(l + 1, L):
            mag = abs(M[l, lt])
            if mag > atol:
                rows.append((l + 1, lt + 1, float(mag), float(np.angle(M[l, lt])), lt - l - 1))
    return SpinCouplingTable(fields=np.real(np.diag(M)).copy(), rows=rows)


_I2 = np.eye(2)
_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_Y = np.array([[0.0, -1j], [1j, 0.0]])
_Z = np.diag([1.0, -1.0])
# basis (|1>, |0>): Z = 2n - 1 puts the occupied state first
_SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]])


def _kron_chain(ops) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for o in ops:
        out = np.kron(out, o)
    return out


def _check_small(L):
    if L > 10:
        raise ValueError("dense 2^L construction limited to L <= 10")


def fermion_hamiltonian_dense(M: np.ndarray) -> np.ndarray:
    """sum_{l,l'} M_ll' f^dag_l f_l' on 2^L, with f_l = prod_{j<l}(-Z_j) sigma^-_l.

    Debug oracle for small L.
    """
    M = np.asarray(M)
    L = M.shape[0]
    _check_small(L)
    f = [_kron_chain([-_Z] * l + [_SIGMA_MINUS] + [_I2] * (L - l - 1)) for l in range(L)]
    H = np.zeros((2**L, 2**L), dtype=complex)
    for l in range(L):
        for lt in range(L):
            if M[l, lt] != 0:
                H += M[l, lt] * f[l].conj().T @ f[lt]
    return H


def spin_hamiltonian_dense(M: np.ndarray) -> np.ndarray:
    """The same operator written with Pauli strings, built from the coupling table.

    Diagonal entries give M_ll (1 + Z_l)/2. A pair l < l' with string S =
    prod_{l<j<l'} (-Z_j) contributes Re M (X S X + Y S Y)/2 + Im M (X S Y - Y S X)/2;
    for real M this is the XX+YY form with the string sign (-1)^len folded
    into S.
    """
    M = np.asarray(M)
    L = M.shape[0]
    _check_small(L)
    table = spin_coupling_report(M)
    H = np.zeros((2**L, 2**L), dtype=complex)
    for l, hz in enumerate(table.fields):
        H += hz * 0.5 * (np.eye(2**L) + _kron_chain([_I2] * l + [_Z] + [_I2] * (L - l - 1)))
    for l, lt, mag, phase, length in table.rows:
        a, b = int(l) - 1, int(lt) - 1
        assert length == b - a - 1
        coupling = mag * np.exp(1j * phase)

        def pauli(pa, pb):
            return _kron_chain([_I2] * a + [pa] + [-_Z] * int(length) + [pb] + [_I2] * (L - b - 1))

        H += coupling.real * 0.5 * (pauli(_X, _X) + pauli(_Y, _Y))
        H += coupling.imag * 0.5 * (pauli(_X, _Y) - pauli(_Y, _X))
    return H

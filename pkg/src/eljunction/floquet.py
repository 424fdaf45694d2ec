"""One-period propagator, quasienergies and the effective Hamiltonian.

The propagator is piecewise constant: each of the K substeps of a period
is the exact exponential of H at the substep midpoint, computed from an
eigendecomposition. That keeps every substep unitary and the scheme second
order in T/K.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .basis import FockBasis
from .errors import NumericalToleranceError, ValidationError
from .model import DisorderRealization, DrivenHamiltonian, ModelParams, driven_hamiltonian

# phase gap below which Floquet eigenvalues count as one degenerate cluster
DEGENERACY_GAP = 1e-10
# eigenphases this close to -pi are moved to +pi
BRANCH_EPS = 1e-12


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PropagatorSettings:
    K: int = 256
    unitarity_tol: float = 1e-10
    convergence_tol: float = 1e-3

    def __post_init__(self):
        if self.K < 8 or self.K % 2:
            raise ValidationError("K", f"must be even and >= 8, got {self.K}")
        if not (self.unitarity_tol > 0 and self.convergence_tol > 0):
            raise ValidationError("tolerances", "must be positive")


@dataclass(frozen=True)
class FloquetResult:
    F: np.ndarray
    quasienergies: np.ndarray
    modes: np.ndarray
    H_eff: np.ndarray
    omega: float

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega

    @property
    def dimension(self) -> int:
        return self.F.shape[0]


def _eigh(H):
    return sla.eigh(H, driver="evd", check_finite=False)


def step_unitary(H: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i H dt) for Hermitian ``H`` via its eigendecomposition."""
    e, v = _eigh(H)
    phases = np.exp(-1j * e * dt)
    if np.isrealobj(v):
        return (v * phases) @ v.T
    return (v * phases) @ v.conj().T


def unitarity_error(U: np.ndarray) -> float:
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def _is_time_symmetric(ham: DrivenHamiltonian) -> bool:
    return np.isrealobj(ham.static) and np.isrealobj(ham.drive)


def propagator(ham: DrivenHamiltonian, t0: float, t1: float, n_steps: int) -> np.ndarray:
    """Time-ordered product of midpoint exponentials from t0 to t1."""
    dt = (t1 - t0) / n_steps
    D = ham.static.shape[0]
    if not _is_time_symmetric(ham):
        U = np.eye(D, dtype=complex)
        for k in range(n_steps):
            U = step_unitary(ham.at(t0 + (k + 0.5) * dt), dt) @ U
        return U
    # real H: apply v diag(exp(-i e dt)) v^T with real matmuls on (Re U, Im U)
    re = np.eye(D)
    im = np.zeros((D, D))
    for k in range(n_steps):
        e, v = _eigh(ham.at(t0 + (k + 0.5) * dt))
        c = np.cos(e * dt)[:, None]
        s = -np.sin(e * dt)[:, None]
        x = v.T @ np.hstack((re, im))
        xr, xi = x[:, :D], x[:, D:]
        y = np.hstack((c * xr - s * xi, c * xi + s * xr))
        out = v @ y
        re, im = out[:, :D], out[:, D:]
    return re + 1j * im


def floquet_from_hamiltonian(
    ham: DrivenHamiltonian, K: int = 256, use_symmetry: bool = True
) -> np.ndarray:
    """F = U(T, 0) with K midpoint substeps.

    With a real H(t) = S + cos(omega t) B the second half-period steps
    repeat the first half in reverse, and each step exp(-iH dt) is a
    symmetric matrix, so U(T, T/2) = P^T with P = U(T/2, 0). Then
    F = P^T P at half the cost; the result is the same product.
    """
    T = ham.period
    if use_symmetry and K % 2 == 0 and _is_time_symmetric(ham):
        P = propagator(ham, 0.0, T / 2, K // 2)
        return P.T @ P
    return propagator(ham, 0.0, T, K)


def evolve_state(
    psi0,
    t0: float,
    t1: float,
    params: ModelParams,
    disorder: DisorderRealization | None = None,
    settings: PropagatorSettings | None = None,
    basis: FockBasis | None = None,
    check_convergence: bool = False,
) -> np.ndarray:
    """Apply the time-ordered evolution from t0 to t1 to ``psi0``."""
    settings = settings or PropagatorSettings()
    psi0 = np.asarray(psi0, dtype=complex)
    if not t1 > t0:
        raise ValidationError("t1", f"must exceed t0={t0}, got {t1}")
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > settings.unitarity_tol:
        warnings.warn(f"initial state not normalized (|psi| = {norm:.6g}); proceeding", stacklevel=2)
    ham = driven_hamiltonian(params, disorder, basis)
    n_steps = max(1, math.ceil(settings.K * (t1 - t0) / ham.period - 1e-9))

    def run(n):
        dt = (t1 - t0) / n
        psi = psi0.copy()
        for k in range(n):
            e, v = _eigh(ham.at(t0 + (k + 0.5) * dt))
            psi = v @ (np.exp(-1j * e * dt) * (v.conj().T @ psi))
        return psi

    psi = run(n_steps)
    drift = abs(np.linalg.norm(psi) - norm)
    if drift > settings.unitarity_tol:
        raise NumericalToleranceError(f"norm drifted by {drift:.3e} during evolution")
    if check_convergence:
        change = float(np.max(np.abs(run(2 * n_steps) - psi)))
        if change >= settings.convergence_tol:
            warnings.warn(
                f"step halving changed the state by {change:.3e} "
                f"(tolerance {settings.convergence_tol:.1e}); increase K",
                ConvergenceWarning,
                stacklevel=2,
            )
    return psi


def floquet_operator(
    params: ModelParams,
    disorder: DisorderRealization | None = None,
    settings: PropagatorSettings | None = None,
    basis: FockBasis | None = None,
    check_convergence: bool = False,
) -> np.ndarray:
    settings = settings or PropagatorSettings()
    ham = driven_hamiltonian(params, disorder, basis)
    F = floquet_from_hamiltonian(ham, settings.K)
    err = unitarity_error(F)
    if err > settings.unitarity_tol:
        raise NumericalToleranceError(
            f"Floquet operator not unitary: max|F^dag F - I| = {err:.3e} > {settings.unitarity_tol:.1e}"
        )
    if check_convergence:
        change = float(np.max(np.abs(floquet_from_hamiltonian(ham, 2 * settings.K) - F)))
        if change >= settings.convergence_tol:
            raise NumericalToleranceError(
                f"step halving changed F by {change:.3e} (tolerance {settings.convergence_tol:.1e})"
            )
    return F


def _orthonormalize_clusters(phases: np.ndarray, modes: np.ndarray) -> np.ndarray:
    # phases sorted ascending; QR inside each near-degenerate run of columns
    D = len(phases)
    start = 0
    for stop in range(1, D + 1):
        if stop == D or phases[stop] - phases[stop - 1] >= DEGENERACY_GAP:
            if stop - start > 1:
                q, r = np.linalg.qr(modes[:, start:stop])
                # keep column phases aligned with the input
                q = q * np.sign(np.diag(r)).conj()
                modes[:, start:stop] = q
            start = stop
    return modes


def quasienergy_spectrum(F: np.ndarray, omega: float, unitarity_tol: float = 1e-10):
    """Quasienergies in (-omega/2, omega/2], ascending, with matching modes.

    Eigenvalues are written exp(-i eps T); the eigenphase theta = eps T is
    taken in (-pi, pi]. Returns ``(eps, modes)`` with the Floquet states as
    columns of ``modes``.
    """
    F = np.asarray(F, dtype=complex)
    err = unitarity_error(F)
    if err > unitarity_tol:
        raise NumericalToleranceError(f"input is not unitary: max|F^dag F - I| = {err:.3e}")
    T = 2.0 * np.pi / omega
    # complex Schur form of a unitary is diagonal; Z is orthonormal even
    # across degeneracies
    Tm, Z = sla.schur(F, output="complex")
    theta = -np.angle(np.diag(Tm))
    theta[theta <= -np.pi + BRANCH_EPS] = np.pi
    order = np.argsort(theta, kind="stable")
    theta = theta[order]
    modes = _orthonormalize_clusters(theta, np.ascontiguousarray(Z[:, order]))
    return theta / T, modes


def effective_hamiltonian(F: np.ndarray, T: float, unitarity_tol: float = 1e-10) -> np.ndarray:
    """Hermitian H_eff with exp(-i H_eff T) = F, principal branch."""
    eps, modes = quasienergy_spectrum(F, 2.0 * np.pi / T, unitarity_tol)
    return _heff_from_modes(eps, modes)


def _heff_from_modes(eps, modes):
    H = (modes * eps) @ modes.conj().T
    return 0.5 * (H + H.conj().T)


def audit(result: FloquetResult) -> dict:
    """Measured deviations for the FloquetResult invariants."""
    T = result.period
    D = result.dimension
    eps = result.quasienergies
    recon = sla.expm(-1j * result.H_eff * T)
    H = result.H_eff
    scale = max(float(np.max(np.abs(H))), 1e-300)
    return {
        "unitarity": unitarity_error(result.F),
        "reconstruction": float(np.max(np.abs(recon - result.F))),
        "modes_orthonormality": float(np.max(np.abs(result.modes.conj().T @ result.modes - np.eye(D)))),
        "heff_hermiticity": float(np.max(np.abs(H - H.conj().T))) / scale,
        "zone_ok": bool(np.all(eps > -result.omega / 2) and np.all(eps <= result.omega / 2)),
    }


def check_invariants(result: FloquetResult, tol: float = 1e-10) -> dict:
    report = audit(result)
    failures = [
        name
        for name in ("unitarity", "reconstruction", "modes_orthonormality")
        if report[name] > tol
    ]
    if report["heff_hermiticity"] > 1e-12:
        failures.append("heff_hermiticity")
    if not report["zone_ok"]:
        failures.append("zone")
    if failures:
        details = ", ".join(f"{k}={report[k]}" for k in failures if k in report)
        raise NumericalToleranceError(f"Floquet invariants violated: {failures} ({details})")
    return report


def floquet_analysis(
    params: ModelParams,
    disorder: DisorderRealization | None = None,
    settings: PropagatorSettings | None = None,
    basis: FockBasis | None = None,
    check: bool = True,
) -> FloquetResult:
    """Propagate one period, diagonalize F and take its logarithm."""
    settings = settings or PropagatorSettings()
    F = floquet_operator(params, disorder, settings, basis)
    eps, modes = quasienergy_spectrum(F, params.omega, settings.unitarity_tol)
    result = FloquetResult(
        F=F, quasienergies=eps, modes=modes, H_eff=_heff_from_modes(eps, modes), omega=params.omega
    )
    if check:
        check_invariants(result, settings.unitarity_tol)
    return result

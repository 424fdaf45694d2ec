import warnings

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from eljunction.errors import NumericalToleranceError, ValidationError
from eljunction.floquet import (
    ConvergenceWarning,
    PropagatorSettings,
    audit,
    effective_hamiltonian,
    evolve_state,
    floquet_analysis,
    floquet_from_hamiltonian,
    floquet_operator,
    quasienergy_spectrum,
)
from eljunction.model import DisorderRealization, ModelParams, driven_hamiltonian
from eljunction.spectroscopy import fold


def folded_oracle(H, omega):
    e, v = np.linalg.eigh(H)
    return (v * fold(e, omega)) @ v.conj().T


@pytest.mark.parametrize("N,L", [(1, 4), (1, 8), (2, 4), (2, 6), (2, 8)])
def test_constant_hamiltonian_oracle(N, L):
    p = ModelParams(L=L, M=L // 2, N=N, g1=0.0, W=0.0)
    res = floquet_analysis(p)
    H = driven_hamiltonian(p).static
    np.testing.assert_allclose(res.F, sla.expm(-1j * H * p.period), atol=1e-11)
    np.testing.assert_allclose(res.H_eff, folded_oracle(H, p.omega), atol=1e-9)


def test_high_frequency_log_is_identity_map():
    # with omega above the bandwidth nothing folds and H_eff = H
    p = ModelParams(L=6, M=3, N=1, g1=0.0, W=0.0, omega=20.0)
    res = floquet_analysis(p)
    np.testing.assert_allclose(res.H_eff, driven_hamiltonian(p).static, atol=1e-10)


def test_reference_point_invariants():
    p = ModelParams(W=1.0)
    res = floquet_analysis(p, DisorderRealization.draw(1, 1.0, 6))
    rep = audit(res)
    assert rep["unitarity"] <= 1e-10
    assert rep["reconstruction"] <= 1e-10
    assert rep["zone_ok"]
    assert np.all(res.quasienergies > -p.omega / 2) and np.all(res.quasienergies <= p.omega / 2)
    assert np.all(np.diff(res.quasienergies) >= 0)


def test_symmetric_product_equals_plain_product(small_params):
    ham = driven_hamiltonian(small_params, DisorderRealization.draw(2, 1.0, small_params.M))
    np.testing.assert_allclose(
        floquet_from_hamiltonian(ham, 64, use_symmetry=True),
        floquet_from_hamiltonian(ham, 64, use_symmetry=False),
        atol=1e-12,
    )


def test_evolve_state_matches_floquet_columns(small_params):
    d = DisorderRealization.draw(4, 1.0, small_params.M)
    F = floquet_operator(small_params, d)
    psi0 = np.zeros(F.shape[0], complex)
    psi0[3] = 1.0
    psi = evolve_state(psi0, 0.0, small_params.period, small_params, d)
    np.testing.assert_allclose(psi, F[:, 3], atol=1e-10)


def test_evolve_state_warns_when_unconverged(small_params):
    psi0 = np.zeros(36, complex)
    psi0[0] = 1.0
    with pytest.warns(ConvergenceWarning):
        evolve_state(psi0, 0.0, small_params.period, small_params, settings=PropagatorSettings(K=8), check_convergence=True)


def test_evolve_state_warns_on_unnormalized_input(small_params):
    psi0 = np.zeros(36, complex)
    psi0[0] = 2.0
    with pytest.warns(UserWarning, match="normalized"):
        evolve_state(psi0, 0.0, 0.1, small_params)


def test_step_doubling_converged_at_default_k():
    p = ModelParams(W=10.0)
    d = DisorderRealization.draw(9, 10.0, 6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        floquet_operator(p, d, check_convergence=True)


def test_nonunitary_input_rejected():
    with pytest.raises(NumericalToleranceError):
        quasienergy_spectrum(np.diag([1.0, 1.1]), 1.0)


def test_branch_convention_minus_identity():
    omega = 2.0
    eps, modes = quasienergy_spectrum(-np.eye(3), omega)
    np.testing.assert_allclose(eps, omega / 2)
    np.testing.assert_allclose(modes.conj().T @ modes, np.eye(3), atol=1e-14)


def test_degenerate_spectrum_gives_orthonormal_modes(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
    F = Q @ np.diag(np.exp(-1j * np.array([0.3, 0.3, 0.3, -1.0, -1.0, 2.0]))) @ Q.conj().T
    eps, modes = quasienergy_spectrum(F, 1.0)
    np.testing.assert_allclose(modes.conj().T @ modes, np.eye(6), atol=1e-12)
    np.testing.assert_allclose((modes * np.exp(-1j * eps * 2 * np.pi)) @ modes.conj().T, F, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.floats(0.3, 5.0), st.integers(0, 2**32 - 1))
def test_log_reconstructs_random_unitaries(D, T, seed):
    r = np.random.default_rng(seed)
    A = r.normal(size=(D, D)) + 1j * r.normal(size=(D, D))
    H = (A + A.conj().T) / 2
    F = sla.expm(-1j * H * T)
    Heff = effective_hamiltonian(F, T)
    np.testing.assert_allclose(Heff, Heff.conj().T, atol=1e-12)
    np.testing.assert_allclose(sla.expm(-1j * Heff * T), F, atol=1e-10)
    assert np.all(np.abs(np.linalg.eigvalsh(Heff)) <= np.pi / T + 1e-12)


def test_settings_validation():
    with pytest.raises(ValidationError):
        PropagatorSettings(K=7)
    with pytest.raises(ValidationError):
        PropagatorSettings(unitarity_tol=0.0)

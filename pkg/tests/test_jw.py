import numpy as np
import pytest
import scipy.linalg as sla

from eljunction.floquet import floquet_analysis
from eljunction.jw import (
    boson_to_site_order,
    fermion_floquet_effective,
    fermion_hamiltonian_dense,
    single_particle_hamiltonian,
    spin_coupling_report,
    spin_hamiltonian_dense,
)
from eljunction.model import DisorderRealization, ModelParams, driven_hamiltonian


@pytest.mark.parametrize("W", [1.0, 10.0])
def test_matches_single_boson_sector(W):
    p = ModelParams(N=1, W=W)
    d = DisorderRealization.draw(17, W, p.M)
    M = fermion_floquet_effective(p, d)
    np.testing.assert_allclose(M, boson_to_site_order(floquet_analysis(p, d).H_eff), atol=1e-10)


def test_single_particle_hamiltonian_matches_boson_n1():
    p = ModelParams(N=1, W=2.0)
    d = DisorderRealization.draw(2, 2.0, p.M)
    fermion = single_particle_hamiltonian(p, d)
    boson = driven_hamiltonian(p, d)
    np.testing.assert_allclose(fermion.static, boson_to_site_order(boson.static))
    np.testing.assert_allclose(fermion.drive, boson_to_site_order(boson.drive))


def test_all_couplings_zero():
    p = ModelParams(N=1, h=0.0, g0=0.0, g1=0.0, W=0.0, omega=3.0)
    np.testing.assert_array_equal(fermion_floquet_effective(p), np.zeros((12, 12)))


def test_undriven_clean_decay_without_folding():
    # with the whole band inside one zone the log returns the tridiagonal H
    p = ModelParams(N=1, g1=0.0, W=0.0, omega=8.0)
    M = fermion_floquet_effective(p)
    for l in range(p.L - 3):
        assert abs(M[l, l + 3]) < abs(M[l, l + 1])


def test_undriven_clean_matches_direct_log():
    p = ModelParams(N=1, g1=0.0, W=0.0)
    H = single_particle_hamiltonian(p).static
    F = sla.expm(-1j * H * p.period)
    e, v = np.linalg.eig(F)
    theta = -np.angle(e)
    oracle = (v * (theta / p.period)) @ np.linalg.inv(v)
    np.testing.assert_allclose(fermion_floquet_effective(p), oracle, atol=1e-9)


def test_table_bookkeeping():
    p = ModelParams(N=1, W=1.0)
    M = fermion_floquet_effective(p, DisorderRealization.draw(3, 1.0, p.M))
    table = spin_coupling_report(M)
    arr = table.as_array()
    assert np.all(arr[:, 0] < arr[:, 1])
    np.testing.assert_array_equal(arr[:, 4], arr[:, 1] - arr[:, 0] - 1)
    assert len(table.rows) == 66
    nn = arr[arr[:, 1] == arr[:, 0] + 1]
    assert np.all(nn[:, 4] == 0)
    np.testing.assert_allclose(table.fields, np.diag(M).real)


def test_table_from_hermitian_conjugate_identical():
    p = ModelParams(N=1, W=10.0)
    M = fermion_floquet_effective(p, DisorderRealization.draw(4, 10.0, p.M))
    a = spin_coupling_report(M).as_array()
    b = spin_coupling_report(M.conj().T).as_array()
    np.testing.assert_allclose(a, b, atol=1e-13)


@pytest.mark.parametrize("L", [2, 3, 4, 5, 6])
def test_pauli_string_form_equals_fermion_form(L, rng):
    A = rng.normal(size=(L, L)) + 1j * rng.normal(size=(L, L))
    M = A + A.conj().T
    np.testing.assert_allclose(spin_hamiltonian_dense(M), fermion_hamiltonian_dense(M), atol=1e-12)


def test_fermion_dense_single_particle_block():
    # the one-fermion block of the 2^L operator is M itself
    L = 4
    r = np.random.default_rng(0)
    A = r.normal(size=(L, L))
    M = A + A.T
    H = fermion_hamiltonian_dense(M)
    # basis (|1>, |0>) per site: site l occupied alone has index sum 2^(L-1-j) over j != l
    idx = [sum(1 << (L - 1 - j) for j in range(L) if j != l) for l in range(L)]
    np.testing.assert_allclose(H[np.ix_(idx, idx)], M, atol=1e-13)


def test_dense_size_guard():
    with pytest.raises(ValueError):
        spin_hamiltonian_dense(np.zeros((11, 11)))

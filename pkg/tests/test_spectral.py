import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from eljunction.errors import NumericalToleranceError, ValidationError
from eljunction.spectral import (
    GOE_MEAN_R,
    PER_CONFIGURATION,
    PER_STATE,
    POISSON_MEAN_R,
    RHistogram,
    p_goe,
    p_poisson,
    participation_ratio,
    r_histogram,
    r_statistics,
)


def test_pr_identity_and_fourier_limits():
    D = 8
    np.testing.assert_allclose(participation_ratio(np.eye(D)), 1.0)
    F = np.fft.fft(np.eye(D)) / np.sqrt(D)
    np.testing.assert_allclose(participation_ratio(F, PER_CONFIGURATION), D)
    np.testing.assert_allclose(participation_ratio(F, PER_STATE), D)


def test_pr_conventions_differ_on_rows_and_columns():
    c, s = np.cos(0.3), np.sin(0.3)
    U = np.eye(3, dtype=complex)
    U[:2, :2] = [[c, -s], [s, c]]
    per_conf = participation_ratio(U, PER_CONFIGURATION)
    per_state = participation_ratio(U, PER_STATE)
    assert per_conf[2] == pytest.approx(1.0)
    np.testing.assert_allclose(per_conf[:2], 1 / (c**4 + s**4))
    np.testing.assert_allclose(per_state, per_conf)  # orthogonal 2x2 block is symmetric in this sense


def test_pr_bounds_random_unitary(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(20, 20)) + 1j * rng.normal(size=(20, 20)))
    pr = participation_ratio(Q)
    assert np.all(pr >= 1 - 1e-12) and np.all(pr <= 20 + 1e-9)


def test_pr_rejects_nonunitary():
    with pytest.raises(NumericalToleranceError):
        participation_ratio(np.ones((3, 3)))
    with pytest.raises(ValidationError):
        participation_ratio(np.eye(3), mode="bogus")


def test_r_statistics_hand_values():
    r = r_statistics([0.0, 1.0, 3.0, 4.0])
    np.testing.assert_allclose(r, [0.5, 0.5])
    # zero spacing next to a finite one gives r = 0, a double zero is dropped
    np.testing.assert_allclose(r_statistics([0.0, 0.0, 1.0]), [0.0])
    assert r_statistics([1.0, 1.0, 1.0]).size == 0


def test_r_statistics_validation():
    with pytest.raises(ValidationError):
        r_statistics([0.0, 1.0])
    with pytest.raises(ValidationError):
        r_statistics([0.0, 2.0, 1.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=40, unique=True))
def test_r_in_unit_interval(levels):
    r = r_statistics(np.sort(levels))
    assert np.all((r >= 0) & (r <= 1))


def test_surmises_normalized():
    assert quad(p_goe, 0, 1)[0] == pytest.approx(1.0, abs=1e-4)
    assert quad(p_poisson, 0, 1)[0] == pytest.approx(1.0, abs=1e-12)


def test_mean_r_oracles_by_quadrature():
    assert quad(lambda r: r * p_poisson(r), 0, 1)[0] == pytest.approx(POISSON_MEAN_R, abs=1e-12)
    assert POISSON_MEAN_R == pytest.approx(0.3863, abs=1e-4)
    # the normalized surmise mean sits at 0.536 to the quoted accuracy
    norm = quad(p_goe, 0, 1)[0]
    assert quad(lambda r: r * p_goe(r), 0, 1)[0] / norm == pytest.approx(0.536, abs=1e-3)
    assert GOE_MEAN_R == pytest.approx(0.536, abs=1e-3)


def test_poisson_sampling_mean_r(rng):
    levels = np.cumsum(rng.exponential(size=200_000))
    assert r_statistics(levels).mean() == pytest.approx(POISSON_MEAN_R, abs=0.005)


def test_goe_sampling_mean_r(rng):
    rs = []
    for _ in range(40):
        A = rng.normal(size=(200, 200))
        e = np.linalg.eigvalsh(A + A.T)
        rs.append(r_statistics(e[50:150]))
    assert np.concatenate(rs).mean() == pytest.approx(0.5307, abs=0.01)


def test_surmise_domain():
    with pytest.raises(ValidationError):
        p_goe(1.5)


def test_histogram_merge_associative(rng):
    chunks = [rng.uniform(size=n) for n in (10, 37, 5, 100)]
    parts = [RHistogram.empty(10).add(c) for c in chunks]
    left = parts[0].merge(parts[1]).merge(parts[2].merge(parts[3]))
    right = parts[3].merge(parts[2]).merge(parts[1]).merge(parts[0])
    np.testing.assert_array_equal(left.counts, right.counts)
    whole = r_histogram(chunks, 10)
    np.testing.assert_array_equal(whole.counts, left.counts)
    assert whole.n == left.n == 152
    assert whole.mean == pytest.approx(np.concatenate(chunks).mean())
    assert np.sum(whole.density * np.diff(whole.edges)) == pytest.approx(1.0)


def test_histogram_bins_must_match():
    with pytest.raises(ValidationError):
        RHistogram.empty(10).merge(RHistogram.empty(20))

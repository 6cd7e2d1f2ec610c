import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laserclock.fock import (
    FockSpace,
    TruncationError,
    canonical_phase_distribution,
    check_density_matrix,
    coherent_state,
    mode_operators,
    number_state,
    overcompleteness_check,
    wrap_phase,
)


def test_space_rejects_small_dimension():
    with pytest.raises(ValueError):
        FockSpace(1)
    with pytest.raises(ValueError):
        FockSpace(2.5)


def test_vacuum_is_exact():
    st_ = coherent_state(0, FockSpace(10))
    assert np.array_equal(st_.amplitudes, FockSpace(10).basis(0))


def test_coherent_moments():
    space = FockSpace(40)
    ops = mode_operators(space)
    psi = coherent_state(2, space)
    assert abs(np.linalg.norm(psi.amplitudes) - 1) < 1e-10
    assert abs(psi.expect(ops.n) - 4) < 1e-8
    assert abs(psi.expect(ops.a) - 2) < 1e-8


def test_truncation_rejected():
    with pytest.raises(TruncationError):
        coherent_state(5, FockSpace(30))


def test_large_cutoff_does_not_overflow():
    psi = coherent_state(40, FockSpace.for_amplitude(40))
    assert np.all(np.isfinite(psi.amplitudes))
    assert psi.tail_weight < 1e-8


def test_commutator_and_number():
    space = FockSpace(12)
    ops = mode_operators(space)
    comm = ops.a @ ops.a_dagger - ops.a_dagger @ ops.a
    assert np.allclose(comm[:-1, :-1], np.eye(11), atol=1e-14)
    three = space.basis(3)
    assert np.allclose(ops.n @ three, 3 * three)


def test_quadrature_mean():
    space = FockSpace(40)
    ops = mode_operators(space)
    psi = coherent_state(1 + 1j, space)
    assert abs(psi.expect(ops.q) - np.sqrt(2)) < 1e-10
    assert abs(psi.expect(ops.p) - np.sqrt(2)) < 1e-10


def test_check_density_matrix():
    rho = coherent_state(1.5, FockSpace(30)).density_matrix()
    check_density_matrix(rho)
    with pytest.raises(ValueError, match="trace"):
        check_density_matrix(2 * rho)
    with pytest.raises(ValueError, match="Hermitian"):
        bad = rho.copy()
        bad[0, 1] += 1e-6
        check_density_matrix(bad)
    with pytest.raises(ValueError, match="negative"):
        check_density_matrix(np.diag([1.5, -0.5]))


def test_wrap_phase_range():
    x = np.array([np.pi, -np.pi, 3 * np.pi, 0.1, -7.0])
    w = wrap_phase(x)
    assert np.all(w > -np.pi) and np.all(w <= np.pi)
    assert np.allclose(np.exp(1j * w), np.exp(1j * x))
    assert w[0] == np.pi and w[1] == np.pi


def test_number_state_phase_is_uniform():
    pd = canonical_phase_distribution(number_state(5, FockSpace(10)).density_matrix())
    assert np.allclose(pd.values, 1 / (2 * np.pi), atol=1e-12)
    assert abs(pd.integral() - 1) < 1e-6


def test_coherent_phase_variance():
    pd = canonical_phase_distribution(coherent_state(5, FockSpace.for_amplitude(5)).density_matrix())
    assert abs(pd.variance / 0.01 - 1) < 0.05
    assert abs(pd.mean) < 1e-12
    assert pd.values.min() > -1e-10
    # frozen: first-order correction above the large-amplitude law
    assert pd.variance == pytest.approx(0.010208, rel=1e-3)


def test_phase_grid_too_coarse():
    with pytest.raises(ValueError):
        canonical_phase_distribution(np.eye(10) / 10, K=30)


@settings(max_examples=25, deadline=None)
@given(r=st.floats(1.0, 6.0), j=st.integers(-200, 200))
def test_phase_distribution_rotates_with_alpha(r, j):
    # a rotation by j grid steps shifts P(theta) by j samples
    space = FockSpace.for_amplitude(r)
    K = 8 * space.dim
    phi = 2 * np.pi * j / K
    pd = canonical_phase_distribution(coherent_state(r * np.exp(1j * phi), space).density_matrix())
    base = canonical_phase_distribution(coherent_state(r, space).density_matrix())
    assert np.allclose(pd.values, np.roll(base.values, j), atol=1e-12)
    assert abs(wrap_phase(pd.mean - phi)) < 1e-9
    assert pd.variance == pytest.approx(base.variance, rel=1e-9)
    assert abs(pd.integral() - 1) < 1e-6


def test_overcompleteness_examples():
    space = FockSpace(10)
    assert overcompleteness_check(FockSpace(2), 8.0, n_test=1) < 1e-6
    assert overcompleteness_check(space, 10.0) < 1e-5


def test_overcompleteness_off_diagonal():
    # the 0,1 element vanishes by the angular integral alone
    dev = overcompleteness_check(FockSpace(2), 8.0)
    assert dev < 1e-6


def test_overcompleteness_warns_on_small_radius():
    with pytest.warns(RuntimeWarning):
        dev = overcompleteness_check(FockSpace(10), 2.0)
    assert dev > 1e-3

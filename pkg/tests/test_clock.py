import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import clock_vector
from relaclock.clock import (ClockSpec, clock_hamiltonian, clock_hamiltonian_pauli, clock_projector, clock_state,
                             clock_states, evolved_state, time_map)
from relaclock.linalg import expm_hermitian
from relaclock.pauli import to_dense

DRIVEN = ClockSpec(4, 1 / 3)


def test_spec_derived_quantities():
    assert DRIVEN.dim == 16
    assert DRIVEN.period == pytest.approx(6 * math.pi)
    assert abs(DRIVEN.dt * DRIVEN.dim - DRIVEN.period) < 1e-12
    with pytest.raises(ValueError):
        ClockSpec(0, 1.0)
    with pytest.raises(ValueError):
        ClockSpec(2, -1.0)


def test_hamiltonian_small_cases():
    assert np.allclose(clock_hamiltonian(ClockSpec(1, 1.0)), np.diag([0, 1]))
    assert np.allclose(clock_hamiltonian(ClockSpec(2, 1 / 3)), np.diag([0, 1 / 3, 2 / 3, 1]))


def test_hamiltonian_pauli_form():
    h = clock_hamiltonian(DRIVEN)
    assert np.allclose(np.diag(h), np.arange(16) / 3)
    assert np.max(np.abs(to_dense(clock_hamiltonian_pauli(DRIVEN)) - h)) < 1e-14


def test_full_period_recurrence():
    u = expm_hermitian(clock_hamiltonian(DRIVEN), DRIVEN.period)
    assert np.max(np.abs(u - np.eye(16))) < 1e-10


def test_clock_state_values():
    chi0 = clock_state(DRIVEN, 0.0)
    assert np.allclose(chi0, np.full(16, 0.25))
    assert np.allclose(clock_state(DRIVEN, DRIVEN.period), chi0, atol=1e-12)
    t = 1.234
    assert np.allclose(clock_state(DRIVEN, t), clock_vector(DRIVEN.omega, 16, t), atol=1e-15)
    assert np.allclose(clock_states(DRIVEN, [t, 2 * t])[1], clock_state(DRIVEN, 2 * t))


def test_clock_state_is_evolution():
    chi0 = clock_state(DRIVEN, 0.0)
    for t in (0.3, 7.7, -2.0):
        assert np.allclose(evolved_state(clock_hamiltonian(DRIVEN), chi0, t), clock_state(DRIVEN, t), atol=1e-12)


@pytest.mark.parametrize("tau", [0.0, 0.17, 2.5])
def test_time_labelled_states_orthonormal(tau):
    chis = clock_states(DRIVEN, DRIVEN.levels * DRIVEN.dt + tau)
    gram = chis.conj() @ chis.T
    assert np.max(np.abs(gram - np.eye(16))) < 1e-12


def test_sum_of_grid_states_is_zero_state():
    s = clock_states(DRIVEN, DRIVEN.levels * DRIVEN.dt).sum(axis=0)
    s /= np.linalg.norm(s)
    assert abs(abs(s[0]) - 1) < 1e-12


def test_projector():
    assert np.allclose(clock_projector(ClockSpec(1, 1.0), 0.0), [[0.5, 0.5], [0.5, 0.5]])
    p = clock_projector(DRIVEN, 0.77)
    assert np.max(np.abs(p @ p - p)) < 1e-12
    assert abs(np.trace(p) - 1) < 1e-12
    chi = clock_state(DRIVEN, 0.77)
    assert np.max(np.abs(p @ chi - chi)) < 1e-13


def test_time_map():
    assert time_map(DRIVEN, 0, 0.0) == 0
    assert time_map(DRIVEN, 8, 0.0) == pytest.approx(3 * math.pi)
    assert time_map(DRIVEN, 1, 0.1) == pytest.approx(DRIVEN.dt + 0.1)
    with pytest.raises(ValueError):
        time_map(DRIVEN, 16, 0.0)
    with pytest.raises(ValueError):
        time_map(DRIVEN, -1, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.floats(0.05, 5.0), st.floats(-50, 50))
def test_clock_state_normalized(n, omega, t):
    chi = clock_state(ClockSpec(n, omega), t)
    assert abs(np.vdot(chi, chi).real - 1) < 1e-12

"""Shared model builders for tests."""
import math

import numpy as np

from relaclock import interaction as ia
from relaclock.clock import ClockSpec, clock_hamiltonian
from relaclock.model import assemble

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
DRIVEN_SPEC = ClockSpec(4, 1 / 3)
DRIVEN_T = 0.4 * DRIVEN_SPEC.period


def driven_pulse():
    return ia.PulseSpec.gaussian(1.6, 1.14 * math.pi, 0.36 * math.pi, DRIVEN_T)


def driven_model(w=0.02):
    eng = ia.engineer(driven_pulse(), DRIVEN_SPEC, X)
    E = ia.build_error_operator(eng, DRIVEN_SPEC, DRIVEN_T)
    return assemble(DRIVEN_SPEC, 0.5 * Z, clock_hamiltonian(DRIVEN_SPEC), eng.G, X, E, DRIVEN_T, w)


def toy_model(eps):
    """H = -Z on the system, H_C = -(1+eps) Z_C on a one-qubit clock, no coupling."""
    spec = ClockSpec(1, 2 * (1 + eps))
    zero = np.zeros((2, 2))
    return assemble(spec, -Z, -(1 + eps) * Z, zero, X, T=spec.period)


def toy_state():
    # (|1,0> + |0,1>)/sqrt(2), clock first
    psi = np.zeros(4, dtype=complex)
    psi[2] = psi[1] = 1 / math.sqrt(2)
    return psi

"""Regularized harmonic-oscillator clock on ``n_qubits`` qubits.

Clock basis index ``Z`` is the integer value of the register with clock
qubit ``n`` carrying weight ``2**n``.  Times are never reduced modulo the
period.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pauli import PauliOperator


@dataclass(frozen=True)
class ClockSpec:
    n_qubits: int
    omega: float

    def __post_init__(self):
        if int(self.n_qubits) != self.n_qubits or self.n_qubits < 1:
            raise ValueError(f"clock needs at least one qubit, got {self.n_qubits}")
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise ValueError(f"clock frequency must be positive, got {self.omega}")

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega

    @property
    def dt(self) -> float:
        return self.period / self.dim

    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.dim)


def clock_hamiltonian(spec: ClockSpec) -> np.ndarray:
    return np.diag(spec.omega * spec.levels.astype(complex))


def clock_hamiltonian_pauli(spec: ClockSpec) -> PauliOperator:
    """``omega * sum_n 2**n (1 - Z_n)/2`` with qubit ``n`` at label position ``N-1-n``."""
    n = spec.n_qubits
    terms = {"I" * n: spec.omega * (spec.dim - 1) / 2}
    for q in range(n):
        labels = ["I"] * n
        labels[n - 1 - q] = "Z"
        terms["".join(labels)] = -spec.omega * 2**q / 2
    return PauliOperator(n, terms)


def clock_state(spec: ClockSpec, t: float) -> np.ndarray:
    """|chi(t)> = D^{-1/2} sum_Z exp(-i t omega Z) |Z>."""
    return np.exp(-1j * t * spec.omega * spec.levels) / math.sqrt(spec.dim)


def clock_states(spec: ClockSpec, times) -> np.ndarray:
    """Clock states stacked as rows, one per entry of ``times``."""
    times = np.asarray(times, dtype=float).reshape(-1)
    return np.exp(-1j * np.outer(times, spec.omega * spec.levels)) / math.sqrt(spec.dim)


def clock_projector(spec: ClockSpec, t: float) -> np.ndarray:
    chi = clock_state(spec, t)
    return np.outer(chi, chi.conj())


def time_map(spec: ClockSpec, z: int, tau: float) -> float:
    """Continuous time t(Z, tau) = Z * dt + tau labelled by clock outcome ``z``."""
    if int(z) != z or not 0 <= z < spec.dim:
        raise ValueError(f"clock outcome {z} outside [0, {spec.dim})")
    return z * spec.dt + tau


def evolved_state(h_clock: np.ndarray, chi0: np.ndarray, t: float) -> np.ndarray:
    """exp(-i t H_C) chi0 for an arbitrary Hermitian clock Hamiltonian."""
    evals, evecs = np.linalg.eigh(h_clock)
    return evecs @ (np.exp(-1j * t * evals) * (evecs.conj().T @ chi0))

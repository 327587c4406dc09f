"""Reference Schrödinger dynamics, relational states and fidelity curves."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from .clock import ClockSpec, clock_state
from .errors import DimensionError, NumericalError, VanishingNormError
from .interaction import PulseSpec

NORM_DRIFT_ABORT = 1e-6
NORM_FLOOR = 1e-12


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    source: str
    norms: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.times.ndim != 1 or np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")


def integrate_tdse(H, pulse: PulseSpec | None, S, phi0, times, max_step: float | None = None) -> Trajectory:
    """Fixed-step RK4 for i d/dt phi = (H + g(t) S) phi, starting at ``times[0]``.

    States are not renormalized; the final norm drift is stored in
    ``info["norm_drift"]`` and a drift above 1e-6 raises.
    """
    H = linalg.as_operator(H)
    S = linalg.as_operator(S) if S is not None else np.zeros_like(H)
    phi = linalg.as_state(phi0).copy()
    if phi.size != H.shape[0] or S.shape != H.shape:
        raise DimensionError("H, S and phi0 dimensions disagree")
    if not linalg.is_normalized(phi, atol=1e-10):
        raise ValueError("initial state must be normalized")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1 or np.any(np.diff(times) <= 0):
        raise ValueError("output grid must be strictly increasing")
    if max_step is None:
        span = times[-1] - times[0]
        max_step = span / 8192 if span > 0 else 1.0
    g = (lambda t: 0.0) if pulse is None else (lambda t: float(pulse(t)))

    def rhs(t, v):
        return -1j * (H @ v + g(t) * (S @ v))

    out = np.empty((times.size, phi.size), dtype=complex)
    out[0] = phi
    t = times[0]
    for i in range(1, times.size):
        n_sub = max(1, math.ceil((times[i] - t) / max_step - 1e-9))
        h = (times[i] - t) / n_sub
        for _ in range(n_sub):
            k1 = rhs(t, phi)
            k2 = rhs(t + h / 2, phi + (h / 2) * k1)
            k3 = rhs(t + h / 2, phi + (h / 2) * k2)
            k4 = rhs(t + h, phi + h * k3)
            phi = phi + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        t = times[i]
        out[i] = phi
    drift = float(np.max(np.abs(np.linalg.norm(out, axis=1) - 1.0)))
    if drift > NORM_DRIFT_ABORT:
        raise NumericalError(f"RK4 norm drift {drift:.2e} exceeds {NORM_DRIFT_ABORT:g}; reduce max_step below {max_step:.3g}")
    return Trajectory(times, out, "exact", info={"norm_drift": drift, "max_step": max_step})


def propagate_static(H, phi0, times) -> Trajectory:
    """exp(-i H t) phi0 for a time-independent Hamiltonian, by diagonalization."""
    H = linalg.as_operator(H)
    evals, evecs = np.linalg.eigh(H)
    c = evecs.conj().T @ linalg.as_state(phi0)
    times = np.asarray(times, dtype=float)
    states = (np.exp(-1j * np.outer(times, evals)) * c[None, :]) @ evecs.T
    return Trajectory(times, states, "exact")


def condition(psi, chi) -> tuple[np.ndarray, float]:
    """Conditional system state (1/sqrt(N)) <chi|Psi> and its weight N."""
    psi = linalg.as_state(psi)
    chi = linalg.as_state(chi)
    if psi.size % chi.size:
        raise DimensionError(f"state dim {psi.size} is not a multiple of clock dim {chi.size}")
    b = chi.conj() @ psi.reshape(chi.size, -1)
    norm = float(np.vdot(b, b).real)
    if norm <= NORM_FLOOR:
        raise VanishingNormError(f"conditional norm {norm:.3e} below {NORM_FLOOR:g}")
    return b / math.sqrt(norm), norm


def relational_state(psi, spec: ClockSpec, t: float) -> tuple[np.ndarray, float]:
    return condition(psi, clock_state(spec, t))


class ClockEvolution:
    """exp(-i t H_C) chi0 for an arbitrary clock Hamiltonian (default chi0: uniform)."""

    def __init__(self, h_clock, chi0=None):
        h_clock = linalg.as_operator(h_clock)
        d = h_clock.shape[0]
        self.evals, self.evecs = np.linalg.eigh(h_clock)
        chi0 = np.full(d, 1 / math.sqrt(d), dtype=complex) if chi0 is None else linalg.as_state(chi0)
        self.coeffs = self.evecs.conj().T @ chi0

    def __call__(self, t: float) -> np.ndarray:
        return self.evecs @ (np.exp(-1j * t * self.evals) * self.coeffs)


def relational_trajectory(psi, clock, times) -> Trajectory:
    """Conditional states for every time; ``clock`` maps t to the clock state."""
    times = np.asarray(times, dtype=float)
    states, norms = zip(*(condition(psi, clock(t)) for t in times))
    return Trajectory(times, np.array(states), "relational", norms=np.array(norms))


def fidelity(a, b) -> float:
    a, b = linalg.as_state(a), linalg.as_state(b)
    if a.size != b.size:
        raise DimensionError(f"state dims {a.size} and {b.size} differ")
    return float(abs(np.vdot(a, b)) ** 2)


def bloch_vector(phi: np.ndarray) -> np.ndarray:
    rho = np.outer(phi, phi.conj())
    return np.array([2 * rho[0, 1].real, -2 * rho[0, 1].imag, (rho[0, 0] - rho[1, 1]).real])


@dataclass
class FidelityReport:
    times: np.ndarray
    fidelity: np.ndarray
    norms: np.ndarray
    pops_exact: np.ndarray
    pops_rel: np.ndarray
    bloch: np.ndarray | None
    exact: Trajectory
    relational: Trajectory

    @property
    def infidelity(self) -> np.ndarray:
        return 1.0 - self.fidelity

    def min_fidelity(self, t_max: float) -> float:
        mask = self.times <= t_max + 1e-12
        return float(self.fidelity[mask].min())

    def write_csv(self, path, header_comment: str | None = None) -> None:
        dim = self.pops_exact.shape[1]
        cols = ["t", "fidelity", "infidelity", "norm"]
        cols += [f"pop{k}_exact" for k in range(dim)] + [f"pop{k}_rel" for k in range(dim)]
        if self.bloch is not None:
            cols += ["bx", "by", "bz"]
        with Path(path).open("w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write(",".join(cols) + "\n")
            for i, t in enumerate(self.times):
                row = [t, self.fidelity[i], self.infidelity[i], self.norms[i], *self.pops_exact[i], *self.pops_rel[i]]
                if self.bloch is not None:
                    row += list(self.bloch[i])
                fh.write(",".join(f"{float(v):.17g}" for v in row) + "\n")


def compare(model, psi, pulse: PulseSpec | None, phi0, times, max_step: float | None = None) -> FidelityReport:
    """Relational trajectory of ``psi`` against the exact driven evolution of ``phi0``.

    The clock state is evolved with ``model.H_clock`` from the uniform
    superposition, which for the harmonic clock is exactly ``clock_state``.
    Bloch components (of the relational state) are reported for one-qubit
    systems only.
    """
    times = np.asarray(times, dtype=float)
    if pulse is None or (pulse.kind == "gaussian" and pulse.amplitude == 0):
        exact = propagate_static(model.H_sys, phi0, times)
        exact.info["norm_drift"] = 0.0
    else:
        grid = times if times[0] == 0 else np.concatenate([[0.0], times])
        exact = integrate_tdse(model.H_sys, pulse, model.S, phi0, grid, max_step)
        if times[0] != 0:
            exact = Trajectory(times, exact.states[1:], "exact", info=exact.info)
    rel = relational_trajectory(psi, ClockEvolution(model.H_clock), times)
    fid = np.abs(np.einsum("ij,ij->i", exact.states.conj(), rel.states)) ** 2
    pops_exact = np.abs(exact.states) ** 2
    pops_rel = np.abs(rel.states) ** 2
    bloch = np.array([bloch_vector(s) for s in rel.states]) if model.dim_sys == 2 else None
    return FidelityReport(times, fid, rel.norms, pops_exact, pops_rel, bloch, exact, rel)


def normalization_rate(psi, spec: ClockSpec, t: float, h: float) -> float:
    """Central difference of N(t) = <Psi|P_chi(t)|Psi>."""
    _, n_plus = relational_state(psi, spec, t + h)
    _, n_minus = relational_state(psi, spec, t - h)
    return (n_plus - n_minus) / (2 * h)


def commutator_rate(psi, operator, spec: ClockSpec, t: float) -> float:
    """-i <Psi|[operator, P_chi(t) (x) I]|Psi> (real by Hermiticity)."""
    psi = linalg.as_state(psi)
    chi = clock_state(spec, t)
    ds = psi.size // spec.dim
    # P psi = chi (x) <chi|psi>
    p_psi = np.kron(chi, chi.conj() @ psi.reshape(spec.dim, ds))
    val = np.vdot(psi, operator @ p_psi) - np.vdot(p_psi, operator @ psi)
    return float((-1j * val).real)

"""Global clock+system Hamiltonian and the quantities the optimizer minimizes."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import linalg
from .clock import ClockSpec
from .errors import DimensionError, NumericalError

log = logging.getLogger(__name__)

VARIANCE_CLIP = 1e-12


@dataclass(frozen=True)
class GlobalModel:
    spec: ClockSpec
    H_sys: np.ndarray
    H_clock: np.ndarray
    G: np.ndarray
    S: np.ndarray
    H_global: np.ndarray
    E_op: np.ndarray
    T: float
    w: float

    @property
    def dim_sys(self) -> int:
        return self.H_sys.shape[0]

    @property
    def n_sys(self) -> int:
        return int(round(np.log2(self.dim_sys)))

    @property
    def H_interaction(self) -> np.ndarray:
        return np.kron(self.G, self.S)


def assemble(spec: ClockSpec, H_sys, H_clock, G, S, E_op=None, T: float | None = None, w: float = 0.0) -> GlobalModel:
    """H = I_C (x) H_sys + H_clock (x) I_S + G (x) S."""
    H_sys, H_clock, G, S = (linalg.as_operator(m) for m in (H_sys, H_clock, G, S))
    dc, ds = H_clock.shape[0], H_sys.shape[0]
    for name, m, d in (("H_sys", H_sys, ds), ("H_clock", H_clock, dc), ("G", G, dc), ("S", S, ds)):
        if m.shape != (d, d):
            raise DimensionError(f"{name} has shape {m.shape}, expected {(d, d)}")
        if not linalg.is_hermitian(m, atol=1e-10):
            raise ValueError(f"{name} is not Hermitian")
    if E_op is None:
        E_op = np.zeros((dc * ds, dc * ds), dtype=complex)
    E_op = linalg.as_operator(E_op)
    if E_op.shape != (dc * ds, dc * ds):
        raise DimensionError(f"error operator has shape {E_op.shape}, expected {(dc * ds, dc * ds)}")
    if w < 0:
        raise ValueError(f"cost weight must be non-negative, got {w}")
    h = np.kron(np.eye(dc), H_sys) + np.kron(H_clock, np.eye(ds)) + np.kron(G, S)
    return GlobalModel(spec, H_sys, H_clock, G, S, h, E_op, spec.period if T is None else T, float(w))


def _moments(h: np.ndarray, psi: np.ndarray) -> tuple[float, float]:
    v = h @ psi
    return float(np.vdot(psi, v).real), float(np.vdot(v, v).real)


def variance(model: GlobalModel, psi) -> float:
    """<H^2> - <H>^2, clipped at zero within ``VARIANCE_CLIP``."""
    psi = linalg.as_state(psi)
    if psi.size != model.H_global.shape[0]:
        raise DimensionError(f"state dim {psi.size} != model dim {model.H_global.shape[0]}")
    mean, second = _moments(model.H_global, psi)
    var = second - mean * mean
    if var < -VARIANCE_CLIP * max(1.0, second):
        raise NumericalError(f"negative energy variance {var:.3e}")
    return max(var, 0.0)


def energy(model: GlobalModel, psi) -> float:
    return _moments(model.H_global, linalg.as_state(psi))[0]


def error_expectation(model: GlobalModel, psi) -> float:
    """<Psi|E|Psi> (real part; E is Hermitian)."""
    return float(linalg.expectation(psi, model.E_op).real)


def exact_eigenstate_near(model: GlobalModel, target_energy: float) -> tuple[np.ndarray, float]:
    """Eigenpair of the global Hamiltonian whose eigenvalue is closest to ``target_energy``."""
    h = model.H_global
    if h.shape[0] > 2**12:
        raise DimensionError("dense diagonalization is capped at dimension 4096")
    try:
        evals, evecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"diagonalization failed: {exc}") from exc
    j = int(np.argmin(np.abs(evals - target_energy)))
    psi = evecs[:, j]
    resid = np.linalg.norm(h @ psi - evals[j] * psi)
    if resid > 1e-9 * max(1.0, np.abs(evals).max()):
        raise NumericalError(f"eigenpair residual {resid:.3e}")
    return psi, float(evals[j])


def time_energy_product(model: GlobalModel, psi) -> float:
    """T^2 * Var, the figure of merit for how long relational dynamics stays accurate."""
    val = model.T**2 * variance(model, psi)
    log.info("T^2 Var = %.4g", val)
    return val

"""Dense complex linear algebra kernels.

States are 1-d complex numpy arrays and operators are 2-d complex numpy
arrays.  Composite spaces are always ordered clock (left, most significant)
then system (right, least significant).
"""
from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg

from .errors import DimensionError, NonFiniteError, NotPositiveDefiniteError

MAX_DIM = 2**20
DEFAULT_QUAD_NODES = 4096


def as_operator(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"operator must be 2-d, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError("operator has non-finite entries")
    return m


def as_state(v) -> np.ndarray:
    s = np.asarray(v, dtype=complex).reshape(-1)
    if s.size == 0:
        raise DimensionError("state must have at least one amplitude")
    if not np.all(np.isfinite(s)):
        raise NonFiniteError("state has non-finite amplitudes")
    return s


def is_hermitian(a: np.ndarray, atol: float = 1e-12) -> bool:
    return a.shape[0] == a.shape[1] and float(np.max(np.abs(a - a.conj().T), initial=0.0)) < atol


def is_unitary(u: np.ndarray, atol: float = 1e-11) -> bool:
    if u.shape[0] != u.shape[1]:
        return False
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))) < atol


def is_normalized(psi: np.ndarray, atol: float = 1e-12) -> bool:
    return abs(float(np.vdot(psi, psi).real) - 1.0) < atol


def normalize(psi: np.ndarray) -> np.ndarray:
    return psi / np.linalg.norm(psi)


def basis_state(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def tensor(a, b) -> np.ndarray:
    """Kronecker product with ``a`` as the most significant factor."""
    a = as_operator(a)
    b = as_operator(b)
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if max(rows, cols) > MAX_DIM:
        raise DimensionError(f"tensor product dimension {rows}x{cols} exceeds cap {MAX_DIM}")
    return np.kron(a, b)


def expectation(psi, op) -> complex:
    """<psi|op|psi> (no normalization is applied)."""
    psi = as_state(psi)
    op = np.asarray(op, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise DimensionError(f"operator must be square, got {op.shape}")
    if op.shape[0] != psi.size:
        raise DimensionError(f"state dim {psi.size} does not match operator dim {op.shape[0]}")
    return complex(np.vdot(psi, op @ psi))


def simpson_weights(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the composite Simpson rule with ``n`` (even) panels."""
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if n < 2 or n % 2:
        raise ValueError(f"Simpson rule needs an even positive panel count, got {n}")
    t = np.linspace(a, b, n + 1)
    w = np.full(n + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return t, w * (b - a) / (3.0 * n)


def quadrature(f: Callable[[np.ndarray], np.ndarray], a: float, b: float, n: int = DEFAULT_QUAD_NODES) -> complex:
    """Composite Simpson estimate of the integral of ``f`` over ``[a, b]``.

    ``f`` is evaluated once on the whole node array, so it must be vectorized.
    """
    t, w = simpson_weights(a, b, n)
    y = np.asarray(f(t), dtype=complex)
    if y.shape != t.shape:
        y = np.broadcast_to(y, t.shape)
    if not np.all(np.isfinite(y)):
        raise NonFiniteError("integrand returned a non-finite sample")
    return complex(np.dot(w, y))


def cholesky(a) -> np.ndarray:
    """Lower Cholesky factor; raises NotPositiveDefiniteError on failure."""
    a = as_operator(a)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"matrix must be square, got {a.shape}")
    if not is_hermitian(a, atol=1e-10 * max(1.0, float(np.max(np.abs(a))))):
        raise NotPositiveDefiniteError("matrix is not Hermitian")
    try:
        return scipy.linalg.cholesky(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc


def solve_hermitian(a, b) -> np.ndarray:
    """Solve ``a x = b`` for Hermitian positive definite ``a`` via Cholesky."""
    a = as_operator(a)
    b = np.asarray(b, dtype=complex)
    if a.shape[0] != a.shape[1] or b.shape[0] != a.shape[0]:
        raise DimensionError(f"cannot solve {a.shape} system with rhs of shape {b.shape}")
    low = cholesky(a)
    y = scipy.linalg.solve_triangular(low, b, lower=True, check_finite=False)
    return scipy.linalg.solve_triangular(low.conj().T, y, lower=False, check_finite=False)


def expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i t h) for Hermitian ``h`` through its eigendecomposition."""
    evals, evecs = np.linalg.eigh(h)
    return (evecs * np.exp(-1j * t * evals)) @ evecs.conj().T

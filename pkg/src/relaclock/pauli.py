"""Pauli strings and the recursive Pauli expansion of Toeplitz matrices.

Label strings are written most-significant qubit first, so ``"XZ"`` is
``X (x) Z`` with ``X`` acting on the high bit.  Ladder operators
``R = |0><1| = (X + iY)/2`` and ``L = |1><0| = (X - iY)/2`` never appear as
labels; they are expanded into ``X`` and ``Y`` on construction.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from .errors import DimensionError

DENSE_QUBIT_CAP = 20
DROP_TOL = 1e-14

PAULI_MATRICES = {
    "I": np.array([[1, 0], [0, 1]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliString:
    labels: str
    coeff: complex = 1.0

    def __post_init__(self):
        if not self.labels or set(self.labels) - set("IXYZ"):
            raise ValueError(f"invalid Pauli label string {self.labels!r}")
        if not np.isfinite(complex(self.coeff)):
            raise ValueError("Pauli coefficient must be finite")


@dataclass(frozen=True)
class PauliOperator:
    """Weighted sum of Pauli strings in canonical form (one entry per label)."""

    n_qubits: int
    terms: Mapping[str, complex] = field(default_factory=dict)

    def __post_init__(self):
        merged: dict[str, complex] = {}
        for labels, c in dict(self.terms).items():
            if len(labels) != self.n_qubits:
                raise DimensionError(f"term {labels!r} does not act on {self.n_qubits} qubits")
            merged[labels] = merged.get(labels, 0) + complex(c)
        object.__setattr__(self, "terms", {k: v for k, v in sorted(merged.items()) if abs(v) >= DROP_TOL})

    @classmethod
    def from_strings(cls, n_qubits: int, strings: Iterable[PauliString]) -> "PauliOperator":
        acc: dict[str, complex] = {}
        for s in strings:
            acc[s.labels] = acc.get(s.labels, 0) + complex(s.coeff)
        return cls(n_qubits, acc)

    @classmethod
    def identity(cls, n_qubits: int, coeff: complex = 1.0) -> "PauliOperator":
        return cls(n_qubits, {"I" * n_qubits: coeff})

    def strings(self) -> list[PauliString]:
        return [PauliString(k, v) for k, v in self.terms.items()]

    def __len__(self):
        return len(self.terms)

    def __add__(self, other: "PauliOperator") -> "PauliOperator":
        if other.n_qubits != self.n_qubits:
            raise DimensionError("qubit counts differ")
        acc = dict(self.terms)
        for k, v in other.terms.items():
            acc[k] = acc.get(k, 0) + v
        return PauliOperator(self.n_qubits, acc)

    def __sub__(self, other: "PauliOperator") -> "PauliOperator":
        return self + other.scale(-1)

    def scale(self, c: complex) -> "PauliOperator":
        return PauliOperator(self.n_qubits, {k: c * v for k, v in self.terms.items()})

    def kron(self, other: "PauliOperator") -> "PauliOperator":
        """Tensor product with ``self`` as the more significant factor."""
        acc: dict[str, complex] = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                acc[k1 + k2] = acc.get(k1 + k2, 0) + v1 * v2
        return PauliOperator(self.n_qubits + other.n_qubits, acc)

    def dump(self) -> str:
        return "\n".join(f"{c.real!r}{c.imag:+}i {labels}" for labels, c in self.terms.items())

    @classmethod
    def parse(cls, text: str) -> "PauliOperator":
        pattern = re.compile(r"^\s*(\S+?)([+-][^+-]+)i\s+([IXYZ]+)\s*$")
        acc: dict[str, complex] = {}
        n = None
        for line in text.splitlines():
            if not line.strip():
                continue
            m = pattern.match(line)
            if m is None:
                raise ValueError(f"cannot parse Pauli term {line!r}")
            re_, im_, labels = m.groups()
            n = len(labels) if n is None else n
            acc[labels] = acc.get(labels, 0) + complex(float(re_), float(im_))
        if n is None:
            raise ValueError("empty Pauli dump")
        return cls(n, acc)


def to_dense(op: PauliOperator) -> np.ndarray:
    if op.n_qubits > DENSE_QUBIT_CAP:
        raise DimensionError(f"{op.n_qubits} qubits exceeds dense cap {DENSE_QUBIT_CAP}")
    dim = 2**op.n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    for labels, c in op.terms.items():
        m = np.array([[c]], dtype=complex)
        for ch in labels:
            m = np.kron(m, PAULI_MATRICES[ch])
        out += m
    return out


def _check_band(n: int, k: int) -> None:
    if n < 1:
        raise ValueError(f"need at least one qubit, got n={n}")
    if abs(k) > 2**n - 1:
        raise ValueError(f"offset {k} is outside the band of a {2**n}x{2**n} matrix")


@lru_cache(maxsize=None)
def _offdiag_terms(n: int, k: int) -> tuple[tuple[str, complex], ...]:
    # A_{n,k} = [k_{n-1}=0] 1 (x) A_{n-1,k} + (1-[k=0])/2 (X + i s Y) (x) A_{n-1,k-s 2^{n-1}}
    if n == 0:
        return (("", 1.0),) if k == 0 else ()
    half = 2 ** (n - 1)
    if abs(k) >= 2 * half:
        return ()
    acc: dict[str, complex] = {}
    if abs(k) < half:
        for labels, c in _offdiag_terms(n - 1, k):
            acc["I" + labels] = acc.get("I" + labels, 0) + c
    if k != 0:
        s = 1 if k > 0 else -1
        for labels, c in _offdiag_terms(n - 1, k - s * half):
            acc["X" + labels] = acc.get("X" + labels, 0) + 0.5 * c
            acc["Y" + labels] = acc.get("Y" + labels, 0) + 0.5j * s * c
    return tuple((lab, c) for lab, c in acc.items() if c != 0)


def toeplitz_offdiag(n: int, k: int) -> PauliOperator:
    """Pauli expansion of the 2^n x 2^n matrix with ones where ``col - row == k``."""
    _check_band(n, k)
    return PauliOperator(n, dict(_offdiag_terms(n, k)))


@lru_cache(maxsize=None)
def _sym_terms(sign: int, n: int, k: int) -> tuple[tuple[str, complex], ...]:
    # B_{+/-,n,k} = A_{n,k} +/- A_{n,-k}; the Y branch swaps the parity.
    if n == 0:
        return (("", 1.0 + sign),) if k == 0 and sign > 0 else ()
    half = 2 ** (n - 1)
    if abs(k) >= 2 * half:
        return ()
    acc: dict[str, complex] = {}
    if abs(k) < half:
        for labels, c in _sym_terms(sign, n - 1, k):
            acc["I" + labels] = acc.get("I" + labels, 0) + c
    if k != 0:
        s = 1 if k > 0 else -1
        kk = k - s * half
        for labels, c in _sym_terms(sign, n - 1, kk):
            acc["X" + labels] = acc.get("X" + labels, 0) + 0.5 * c
        for labels, c in _sym_terms(-sign, n - 1, kk):
            acc["Y" + labels] = acc.get("Y" + labels, 0) + 0.5j * s * c
    return tuple((lab, c) for lab, c in acc.items() if c != 0)


def toeplitz_symmetric(n: int, k: int, sign: int = 1) -> PauliOperator:
    """``A_{n,k} + sign * A_{n,-k}`` built with the parity-swapping recursion."""
    _check_band(n, k)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return PauliOperator(n, dict(_sym_terms(sign, n, k)))


def hermitian_toeplitz(coeffs: Mapping[int, complex], n: int | None = None, atol: float = 1e-12) -> PauliOperator:
    """Pauli expansion of the Hermitian Toeplitz matrix with entry ``(M, N) = coeffs[N - M]``.

    Missing offsets count as zero.  ``coeffs[-K]`` must equal ``conj(coeffs[K])``.
    """
    if n is None:
        span = max((abs(k) for k in coeffs), default=0)
        n = max(1, int(span).bit_length())
    for k, c in coeffs.items():
        _check_band(n, k)
        partner = coeffs.get(-k, 0)
        if abs(complex(partner) - np.conj(complex(c))) > atol:
            raise ValueError(f"coefficients at offsets {k} and {-k} are not complex conjugates")
    out = PauliOperator(n, {})
    c0 = complex(coeffs.get(0, 0))
    if c0 != 0:
        # B_{+,n,0} = 2 * identity
        out = out + toeplitz_symmetric(n, 0, 1).scale(0.5 * c0.real)
    for k in sorted(k for k in coeffs if k > 0):
        c = complex(coeffs[k])
        if c.real != 0:
            out = out + toeplitz_symmetric(n, k, 1).scale(c.real)
        if c.imag != 0:
            out = out + toeplitz_symmetric(n, k, -1).scale(1j * c.imag)
    return out


def offdiag_matrix(n: int, k: int) -> np.ndarray:
    """Direct dense construction of the k-th off-diagonal indicator matrix."""
    return np.eye(2**n, k=k, dtype=complex)

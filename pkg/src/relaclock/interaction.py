"""Engineering the clock-side coupling ``G (x) S`` and the error operator.

Fourier-type coefficients are stored as arrays over offsets
``K = -(D-1) .. D-1`` (array index ``K + D - 1``), where ``D`` is the clock
dimension.  ``h_prime`` are the coefficients of the clock expectation
``<chi(t)|G|chi(t)> = sum_K h'_K exp(-i omega K t)``; ``h`` are the Toeplitz
entries of ``G`` itself, ``G[M, N] = h[N - M]``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import mpmath
import numpy as np

from . import linalg
from .clock import ClockSpec, clock_states
from .errors import DimensionError, NotPositiveDefiniteError, VanishingNormError

DEFAULT_RCOND = 1e-8


@dataclass(frozen=True)
class PulseSpec:
    """Target drive g(t) on ``[0, horizon]``.

    ``kind="gaussian"`` uses ``amplitude * exp(-(t - center)**2 / (2 width**2))``;
    ``kind="tabulated"`` linearly interpolates ``table`` (pairs ``(t, g)``).
    """

    kind: str
    horizon: float
    amplitude: float = 0.0
    center: float = 0.0
    width: float = 1.0
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"pulse horizon must be positive, got {self.horizon}")
        if self.kind == "gaussian":
            if not self.width > 0:
                raise ValueError(f"gaussian width must be positive, got {self.width}")
        elif self.kind == "tabulated":
            ts = [p[0] for p in self.table]
            if len(ts) < 2 or any(b <= a for a, b in zip(ts, ts[1:])):
                raise ValueError("tabulated pulse needs at least two strictly increasing times")
            if ts[0] > 0 or ts[-1] < self.horizon:
                raise ValueError(f"table covers [{ts[0]}, {ts[-1]}] but must cover [0, {self.horizon}]")
        else:
            raise ValueError(f"unknown pulse kind {self.kind!r}")

    @classmethod
    def gaussian(cls, amplitude: float, center: float, width: float, horizon: float) -> "PulseSpec":
        return cls("gaussian", horizon, amplitude, center, width)

    @classmethod
    def zero(cls, horizon: float) -> "PulseSpec":
        return cls("gaussian", horizon, 0.0, 0.0, 1.0)

    @classmethod
    def from_csv(cls, path, horizon: float) -> "PulseSpec":
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.reader(fh):
                if not rec or rec[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append((float(rec[0]), float(rec[1])))
                except ValueError:
                    if rows:
                        raise
                    # header line
        return cls("tabulated", horizon, table=tuple(rows))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-((t - self.center) ** 2) / (2 * self.width**2))
        ts, gs = zip(*self.table)
        return np.interp(t, ts, gs)

    def with_horizon(self, horizon: float) -> "PulseSpec":
        return replace(self, horizon=horizon)


def offsets(spec: ClockSpec) -> np.ndarray:
    return np.arange(-(spec.dim - 1), spec.dim)


def qt_kernel(a, T: float, T0: float):
    """Q_T(a) = (1/T) int_0^T exp(i a 2pi t / T0) dt, in closed form."""
    if not 0 < T <= T0 * (1 + 1e-12):
        raise ValueError(f"window T={T} must lie in (0, T0={T0}]")
    x = np.asarray(a, dtype=float) * (T / T0)
    val = np.exp(1j * np.pi * x) * np.sinc(x)
    return complex(val) if val.ndim == 0 else val


def q_matrix(T: float, T0: float, dim: int) -> np.ndarray:
    """Gram matrix ``Q[M, K] = Q_T(M - K)`` for offsets ``-(dim-1) .. dim-1``."""
    k = np.arange(-(dim - 1), dim)
    return qt_kernel(k[:, None] - k[None, :], T, T0)


def q_cholesky_pivots(T: float, T0: float, dim: int, dps: int = 60) -> list:
    """Cholesky pivots of the Gram matrix in ``dps``-digit arithmetic.

    The matrix is positive definite for every ``T > 0`` but becomes severely
    ill-conditioned as ``T / T0`` shrinks, so double precision cannot
    certify it.  Pivots are returned as ``mpmath.mpf``.
    """
    with mpmath.workdps(dps):
        ratio = mpmath.mpf(T) / mpmath.mpf(T0)
        n = 2 * dim - 1

        def q(a):
            if a == 0:
                return mpmath.mpc(1)
            x = a * ratio
            return mpmath.exp(1j * mpmath.pi * x) * mpmath.sin(mpmath.pi * x) / (mpmath.pi * x)

        kernel = {a: q(a) for a in range(-(n - 1), n)}
        mat = mpmath.matrix(n, n)
        for i in range(n):
            for j in range(n):
                mat[i, j] = kernel[i - j]
        low = mpmath.matrix(n, n)
        pivots = []
        for j in range(n):
            s = mat[j, j] - mpmath.fsum(abs(low[j, m]) ** 2 for m in range(j))
            pivot = mpmath.re(s)
            pivots.append(pivot)
            if pivot <= 0:
                break
            low[j, j] = mpmath.sqrt(pivot)
            for i in range(j + 1, n):
                low[i, j] = (mat[i, j] - mpmath.fsum(low[i, m] * mpmath.conj(low[j, m]) for m in range(j))) / low[j, j]
        return pivots


def levinson_pivots(T: float, T0: float, dim: int, dps: int = 60) -> list:
    """Cholesky pivots of the Gram matrix via the Levinson recursion.

    For a Hermitian Toeplitz matrix the j-th Cholesky pivot equals the ratio of
    consecutive leading minors, which is the order-j prediction error of the
    recursion.  O(n^2) instead of the O(n^3) elimination in ``q_cholesky_pivots``.
    """
    with mpmath.workdps(dps):
        ratio = mpmath.mpf(T) / mpmath.mpf(T0)
        n = 2 * dim - 1
        r = [mpmath.mpc(1)]
        for a in range(1, n):
            x = a * ratio
            r.append(mpmath.exp(1j * mpmath.pi * x) * mpmath.sin(mpmath.pi * x) / (mpmath.pi * x))
        # column convention: R[i, j] = r[i - j], r[-k] = conj(r[k])
        err = mpmath.re(r[0])
        pivots = [err]
        a = [mpmath.mpc(1)]
        for m in range(1, n):
            acc = mpmath.fsum(a[i] * r[m - i] for i in range(m))
            k = -acc / err
            padded = a + [mpmath.mpc(0)]
            a = [padded[i] + k * mpmath.conj(padded[m - i]) for i in range(m + 1)]
            err = err * (1 - abs(k) ** 2)
            pivots.append(err)
            if err <= 0:
                break
        return pivots


def min_cholesky_pivot(T: float, T0: float, dim: int) -> mpmath.mpf:
    """Smallest Cholesky pivot of the Gram matrix, with precision raised until stable."""
    dps = 40
    prev = None
    while dps <= 1280:
        cur = min(levinson_pivots(T, T0, dim, dps))
        if prev is not None and cur > 0 and abs(cur - prev) <= abs(cur) * mpmath.mpf(10) ** (-8):
            return cur
        prev = cur
        dps *= 2
    return prev


def pulse_fourier(pulse: PulseSpec, spec: ClockSpec, k, n: int = linalg.DEFAULT_QUAD_NODES):
    """g_K = (1/T) int_0^T exp(i omega K t) g(t) dt for one offset or an array of offsets."""
    T = pulse.horizon
    t, w = linalg.simpson_weights(0.0, T, n)
    g = np.asarray(pulse(t), dtype=complex)
    ks = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(np.abs(ks) > spec.dim - 1):
        raise ValueError(f"offsets must satisfy |K| <= {spec.dim - 1}")
    vals = np.exp(1j * spec.omega * np.outer(ks, t)) @ (w * g) / T
    return complex(vals[0]) if np.ndim(k) == 0 else vals


@dataclass
class EngineeredInteraction:
    h_prime: np.ndarray
    h: np.ndarray
    G: np.ndarray | None = None
    S: np.ndarray | None = None
    method: str = "cholesky"
    window: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def clock_dim(self) -> int:
        return (self.h.size + 1) // 2

    def coefficient(self, k: int, primed: bool = True) -> complex:
        arr = self.h_prime if primed else self.h
        return complex(arr[k + self.clock_dim - 1])


def _conjugate_symmetrize(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + np.conj(c[::-1]))


def solve_coefficients(pulse: PulseSpec, spec: ClockSpec, rcond: float = DEFAULT_RCOND,
                       n: int = linalg.DEFAULT_QUAD_NODES) -> EngineeredInteraction:
    """Least-squares coefficients reproducing ``pulse`` on ``[0, pulse.horizon]``.

    Solves ``Q h' = g`` by Cholesky when ``Q`` is well conditioned (its
    smallest eigenvalue exceeds ``rcond`` times the largest).  Otherwise the
    minimum-norm solution over the eigenvectors of ``Q`` above that cutoff is
    used; the discarded directions change the fitted drive by less than the
    quadrature error in ``g``.
    """
    T, T0, dim = pulse.horizon, spec.period, spec.dim
    if T > T0 * (1 + 1e-12):
        raise ValueError(f"pulse horizon {T} exceeds clock period {T0}")
    ks = offsets(spec)
    g = pulse_fourier(pulse, spec, ks, n)
    q = q_matrix(T, T0, dim)
    evals, evecs = np.linalg.eigh(q)
    info = {"q_eig_min": float(evals[0]), "q_eig_max": float(evals[-1])}
    if evals[0] > rcond * evals[-1]:
        h_prime = linalg.solve_hermitian(q, g)
        method = "cholesky"
    else:
        keep = evals > rcond * evals[-1]
        h_prime = evecs[:, keep] @ ((evecs[:, keep].conj().T @ g) / evals[keep])
        method = "spectral"
        info["q_rank"] = int(keep.sum())
    h_prime = _conjugate_symmetrize(h_prime)
    h = dim * h_prime / (dim - np.abs(ks))
    return EngineeredInteraction(h_prime=h_prime, h=h, method=method, window=T, info=info)


def toeplitz_from_offsets(c: np.ndarray, dim: int) -> np.ndarray:
    """Matrix with entry ``(M, N) = c[N - M]`` (``c`` indexed by offset + dim - 1)."""
    m = np.arange(dim)
    return c[(m[None, :] - m[:, None]) + dim - 1]


def build_G(coeffs: EngineeredInteraction, spec: ClockSpec) -> np.ndarray:
    if coeffs.h is None or coeffs.h.size != 2 * spec.dim - 1:
        raise DimensionError(f"need {2 * spec.dim - 1} Toeplitz coefficients for a {spec.dim}-level clock")
    return toeplitz_from_offsets(np.asarray(coeffs.h, dtype=complex), spec.dim)


def engineer(pulse: PulseSpec, spec: ClockSpec, S, rcond: float = DEFAULT_RCOND) -> EngineeredInteraction:
    """Coefficients, ``G`` and the system operator ``S`` in one step."""
    out = solve_coefficients(pulse, spec, rcond=rcond)
    out.G = build_G(out, spec)
    out.S = linalg.as_operator(S)
    return out


def effective_drive(interaction: EngineeredInteraction, spec: ClockSpec, t) -> np.ndarray:
    """<chi(t)|G|chi(t)> through its finite Fourier series (real part)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    phases = np.exp(-1j * spec.omega * np.outer(t, offsets(spec)))
    return (phases @ interaction.h_prime).real


def clock_averages(interaction: EngineeredInteraction, spec: ClockSpec, T: float):
    """Time-averaged clock operators over ``[0, T]``.

    Returns ``(avg P, avg P <G>, avg P <G>^2)`` as ``D x D`` Toeplitz matrices
    where ``<G>(t) = <chi(t)|G|chi(t)>``.
    """
    dim, T0 = spec.dim, spec.period
    hp = interaction.h_prime
    # offsets a = N - M run over -(D-1)..D-1; products of the series shift them
    a = np.arange(-(dim - 1), dim)
    k = offsets(spec)
    p_bar = qt_kernel(a, T, T0) / dim
    pg = qt_kernel(a[:, None] - k[None, :], T, T0) @ hp / dim
    hp2 = np.convolve(hp, hp)
    k2 = np.arange(-2 * (dim - 1), 2 * dim - 1)
    pg2 = qt_kernel(a[:, None] - k2[None, :], T, T0) @ hp2 / dim
    return (toeplitz_from_offsets(p_bar, dim), toeplitz_from_offsets(pg, dim), toeplitz_from_offsets(pg2, dim))


def build_error_operator(interaction: EngineeredInteraction, spec: ClockSpec, T: float) -> np.ndarray:
    """Time-averaged penalty for replacing the effective potential by ``<G> S``.

    ``E = [G avgP G + avg(P <G>^2) - {G, avg(P <G>)}] (x) S^2`` on the
    clock (x) system space.
    """
    G, S = interaction.G, interaction.S
    if G is None or S is None:
        raise DimensionError("interaction needs both G and S before building the error operator")
    if G.shape != (spec.dim, spec.dim):
        raise DimensionError(f"G has shape {G.shape}, clock dimension is {spec.dim}")
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionError(f"S must be square, got {S.shape}")
    p_bar, pg, pg2 = clock_averages(interaction, spec, T)
    clock_part = G @ p_bar @ G + pg2 - (G @ pg + pg @ G)
    clock_part = 0.5 * (clock_part + clock_part.conj().T)
    return np.kron(clock_part, S @ S)


def _partial_clock_overlap(psi: np.ndarray, chi: np.ndarray, dim_sys: int) -> np.ndarray:
    return chi.conj() @ psi.reshape(chi.size, dim_sys)


def effective_potential(psi, interaction: EngineeredInteraction, spec: ClockSpec, t: float) -> np.ndarray:
    """Exact state-dependent system potential at time ``t`` (scalar gauge fixed to zero)."""
    psi = linalg.as_state(psi)
    G, S = interaction.G, interaction.S
    dim_sys = S.shape[0]
    if psi.size != spec.dim * dim_sys:
        raise DimensionError(f"state dim {psi.size} != {spec.dim} x {dim_sys}")
    chi = clock_states(spec, [t])[0]
    b = _partial_clock_overlap(psi, chi, dim_sys)
    norm = float(np.vdot(b, b).real)
    if norm <= 1e-12:
        raise VanishingNormError(f"conditional norm {norm:.3e} at t={t}")
    h_psi = (np.kron(G, S) @ psi)
    a = _partial_clock_overlap(h_psi, chi, dim_sys)
    return (np.outer(a, b.conj()) + np.outer(b, a.conj())) / norm


def positivity_report(T: float, spec: ClockSpec) -> dict:
    """Double-precision and extended-precision positivity diagnostics for ``Q``."""
    q = q_matrix(T, spec.period, spec.dim)
    try:
        linalg.cholesky(q)
        double_ok = True
    except NotPositiveDefiniteError:
        double_ok = False
    return {"T": T, "double_cholesky": double_ok, "min_pivot": min_cholesky_pivot(T, spec.period, spec.dim)}


def write_drive_csv(path, interaction: EngineeredInteraction, pulse: PulseSpec, spec: ClockSpec,
                    n_points: int = 512, header_comment: str | None = None) -> float:
    """Write ``t,g_target,g_effective`` on ``[0, T0]``; returns max deviation on ``[0, T]``."""
    t = np.linspace(0.0, spec.period, n_points)
    target = np.asarray(pulse(t), dtype=float)
    eff = effective_drive(interaction, spec, t)
    path = Path(path)
    with path.open("w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("t,g_target,g_effective\n")
        for row in zip(t, target, eff):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    inside = t <= pulse.horizon + 1e-12
    return float(np.max(np.abs(target[inside] - eff[inside]))) if inside.any() else math.nan

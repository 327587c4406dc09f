"""Simulated clock read-out: U_z(tau), projective measurement, histograms."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.stats

from . import linalg
from .circuits import u_z
from .clock import ClockSpec, clock_states, time_map

MASK64 = (1 << 64) - 1
GOLDEN64 = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 output for state ``x`` (already advanced)."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """The ``index``-th SplitMix64 output of a stream seeded with ``seed``."""
    return splitmix64((seed + (index + 1) * GOLDEN64) & MASK64)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox4x64 generator keyed directly by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & MASK64))


@dataclass
class ShotRecord:
    outcome: int
    time: float
    state: np.ndarray


@dataclass
class SampleReport:
    tau: float
    shots: int
    histogram: np.ndarray
    exact_probs: np.ndarray
    seed: int
    times: np.ndarray
    conditional_states: dict[int, np.ndarray] = field(default_factory=dict)

    def chi2_pvalue(self) -> float:
        """Pearson chi-square p-value of the histogram against the exact probabilities."""
        keep = self.exact_probs > 1e-12
        if np.any(self.histogram[~keep]):
            return 0.0
        if keep.sum() < 2:
            return 1.0
        expected = self.exact_probs[keep] / self.exact_probs[keep].sum() * self.shots
        return float(scipy.stats.chisquare(self.histogram[keep], expected).pvalue)

    def records(self) -> list[ShotRecord]:
        return [ShotRecord(z, float(self.times[z]), s) for z, s in sorted(self.conditional_states.items())]


def _measured_frame(psi, spec: ClockSpec, tau: float) -> np.ndarray:
    psi = linalg.as_state(psi)
    return u_z(spec, tau) @ psi.reshape(spec.dim, -1)


def exact_probabilities(psi, spec: ClockSpec, tau: float) -> np.ndarray:
    """Outcome probabilities after U_z(tau), summed over the system."""
    return np.sum(np.abs(_measured_frame(psi, spec, tau)) ** 2, axis=1)


def projector_probabilities(psi, spec: ClockSpec, tau: float) -> np.ndarray:
    """N(t(Z, tau)) = <Psi|P_chi(t(Z, tau))|Psi> for every Z, without the QFT."""
    psi = linalg.as_state(psi)
    chis = clock_states(spec, spec.levels * spec.dt + tau)
    overlaps = chis.conj() @ psi.reshape(spec.dim, -1)
    return np.sum(np.abs(overlaps) ** 2, axis=1)


def collapse(psi, spec: ClockSpec, tau: float, outcome: int) -> np.ndarray:
    """Normalized system state left behind by clock outcome ``outcome``."""
    branch = _measured_frame(psi, spec, tau)[outcome]
    return branch / np.linalg.norm(branch)


def sample(psi, spec: ClockSpec, tau: float, shots: int, seed: int) -> SampleReport:
    """Multinomial draw of ``shots`` clock outcomes with a seeded generator."""
    if shots < 1:
        raise ValueError(f"shots must be positive, got {shots}")
    probs = exact_probabilities(psi, spec, tau)
    p = np.clip(probs, 0.0, None)
    counts = make_rng(seed).multinomial(shots, p / p.sum())
    times = np.array([time_map(spec, z, tau) for z in range(spec.dim)])
    states = {int(z): collapse(psi, spec, tau, int(z)) for z in np.flatnonzero(counts)}
    return SampleReport(tau, shots, counts, probs, seed, times, states)


def default_taus(spec: ClockSpec) -> list[float]:
    return [0.0, spec.dt / 4, spec.dt / 2, 3 * spec.dt / 4]


def sweep_tau(psi, spec: ClockSpec, taus, shots: int, seed: int) -> list[SampleReport]:
    """Independent reports per offset; report ``i`` uses ``derive_seed(seed, i)``."""
    return [sample(psi, spec, float(tau), shots, derive_seed(seed, i)) for i, tau in enumerate(taus)]


def write_histogram_csv(path, reports: list[SampleReport], header_comment: str | None = None) -> None:
    with Path(path).open("w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("tau,Z,t,count,exact_prob\n")
        for rep in reports:
            for z in range(rep.histogram.size):
                fh.write(f"{rep.tau:.17g},{z},{rep.times[z]:.17g},{int(rep.histogram[z])},{rep.exact_probs[z]:.17g}\n")

"""Statevector gate engine and the clock/system preparation circuits.

Global qubit ``q`` carries weight ``2**q`` in the amplitude index.  System
qubits occupy ``q = 0 .. n_sys-1`` and clock qubit ``n`` sits at
``q = n_sys + n``, so the clock register is the most significant block and
the amplitude index is ``Z * 2**n_sys + s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import linalg
from .clock import ClockSpec, clock_states
from .errors import DimensionError

GATE_KINDS = ("RY", "RZ", "HAD", "U3", "CTRL_U3", "CTRL_RZ", "PHASE_DIAG", "QFT")

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def u3_matrix(theta1: float, theta2: float, theta3: float) -> np.ndarray:
    """Three-angle single-qubit unitary.

    ``[[cos(a), -e^{i b} sin(a)], [e^{i c} sin(a), e^{i(b+c)} cos(a)]]`` with
    ``a = theta1/2, b = theta2, c = theta3``.
    """
    c, s = math.cos(theta1 / 2), math.sin(theta1 / 2)
    e2, e3 = np.exp(1j * theta2), np.exp(1j * theta3)
    return np.array([[c, -e2 * s], [e3 * s, e2 * e3 * c]], dtype=complex)


def qft_matrix(spec: ClockSpec) -> np.ndarray:
    """F[Z', Z] = exp(2 pi i Z Z' / D) / sqrt(D)."""
    z = spec.levels
    return np.exp(2j * np.pi * np.outer(z, z) / spec.dim) / math.sqrt(spec.dim)


def phase_advance(spec: ClockSpec, tau: float) -> np.ndarray:
    """Diagonal of exp(i tau H_C)."""
    return np.exp(1j * tau * spec.omega * spec.levels)


def u_z(spec: ClockSpec, tau: float) -> np.ndarray:
    """QFT . exp(i tau H_C): maps |chi(t(Z, tau))> to |Z>."""
    return qft_matrix(spec) * phase_advance(spec, tau)[None, :]


@dataclass(frozen=True)
class GateOp:
    kind: str
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if set(self.targets) & set(self.controls):
            raise ValueError("targets and controls overlap")
        if not all(math.isfinite(p) for p in self.params):
            raise ValueError("gate angles must be finite")

    def matrix(self) -> np.ndarray:
        """Matrix acting on the target register (targets listed least significant first)."""
        k, p = self.kind, self.params
        if k == "RY":
            return ry_matrix(p[0])
        if k in ("RZ", "CTRL_RZ"):
            return rz_matrix(p[0])
        if k == "HAD":
            return HADAMARD
        if k in ("U3", "CTRL_U3"):
            return u3_matrix(*p)
        dim = 2 ** len(self.targets)
        if k == "PHASE_DIAG":
            return np.diag(np.exp(1j * p[0] * np.arange(dim)))
        z = np.arange(dim)
        return np.exp(2j * np.pi * np.outer(z, z) / dim) / math.sqrt(dim)

    def describe(self) -> str:
        return (f"{self.kind} targets={list(self.targets)} controls={list(self.controls)} "
                f"params={[float(x) for x in self.params]}")


def _apply_matrix(state: np.ndarray, mat: np.ndarray, targets: Sequence[int], controls: Sequence[int], n: int) -> np.ndarray:
    m = len(targets)
    out = state.reshape([2] * n).copy()
    sel: list = [slice(None)] * n
    for c in controls:
        sel[n - 1 - c] = 1
    sub = out[tuple(sel)]
    # axes left in ``sub`` after fixing the controls, in original order
    remaining = [ax for ax in range(n) if not isinstance(sel[ax], int)]
    target_axes = [remaining.index(n - 1 - q) for q in reversed(targets)]
    tens = mat.reshape([2] * (2 * m))
    res = np.tensordot(tens, sub, axes=(list(range(m, 2 * m)), target_axes))
    out[tuple(sel)] = np.moveaxis(res, list(range(m)), target_axes)
    return out.reshape(-1)


def apply_gate(state, gate: GateOp, n_qubits: int) -> np.ndarray:
    """Apply one gate; returns a new state vector."""
    state = linalg.as_state(state)
    if state.size != 2**n_qubits:
        raise DimensionError(f"state of size {state.size} is not a {n_qubits}-qubit register")
    for q in gate.targets + gate.controls:
        if not 0 <= q < n_qubits:
            raise DimensionError(f"qubit index {q} out of range for {n_qubits} qubits")
    return _apply_matrix(state, gate.matrix(), gate.targets, gate.controls, n_qubits)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[GateOp, ...]

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise DimensionError("circuits act on different registers")
        return Circuit(self.n_qubits, self.gates + other.gates)

    def apply(self, state) -> np.ndarray:
        for g in self.gates:
            state = apply_gate(state, g, self.n_qubits)
        return state

    def dense(self) -> np.ndarray:
        """Materialize the unitary column by column (oracle use only)."""
        dim = 2**self.n_qubits
        return np.column_stack([self.apply(linalg.basis_state(dim, j)) for j in range(dim)])

    def dump(self) -> str:
        return "\n".join(g.describe() for g in self.gates)


def gate_matrix_full(gate: GateOp, n_qubits: int) -> np.ndarray:
    """Dense ``2**n x 2**n`` matrix of a gate built by index arithmetic (oracle use)."""
    dim = 2**n_qubits
    small = gate.matrix()
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        if any(not (col >> c) & 1 for c in gate.controls):
            out[col, col] = 1.0
            continue
        sub_in = sum(((col >> q) & 1) << j for j, q in enumerate(gate.targets))
        base = col
        for q in gate.targets:
            base &= ~(1 << q)
        for sub_out in range(small.shape[0]):
            row = base
            for j, q in enumerate(gate.targets):
                row |= ((sub_out >> j) & 1) << q
            out[row, col] += small[sub_out, sub_in]
    return out


@dataclass
class AnsatzParams:
    """Angles of the preparation circuits.

    ``clock_ry``: ``(n_reps_c + 1, n_clock)``, ``clock_crz``: ``(n_reps_c, n_clock)``,
    ``system_cu3``: ``(n_reps_s, n_clock, 3)``.
    """

    clock_ry: np.ndarray
    clock_crz: np.ndarray
    system_cu3: np.ndarray

    def __post_init__(self):
        self.clock_ry = np.asarray(self.clock_ry, dtype=float)
        self.clock_crz = np.asarray(self.clock_crz, dtype=float)
        self.system_cu3 = np.asarray(self.system_cu3, dtype=float)
        nc = self.clock_ry.shape[1] if self.clock_ry.ndim == 2 else -1
        ok = (self.clock_ry.ndim == 2 and self.clock_crz.shape == (self.clock_ry.shape[0] - 1, nc)
              and self.system_cu3.ndim == 3 and self.system_cu3.shape[1:] == (nc, 3))
        if not ok:
            raise DimensionError(
                f"inconsistent angle shapes {self.clock_ry.shape}, {self.clock_crz.shape}, {self.system_cu3.shape}")

    @property
    def n_clock(self) -> int:
        return self.clock_ry.shape[1]

    @property
    def n_reps_c(self) -> int:
        return self.clock_crz.shape[0]

    @property
    def n_reps_s(self) -> int:
        return self.system_cu3.shape[0]

    @staticmethod
    def count(n_clock: int, n_reps_c: int, n_reps_s: int) -> int:
        return (n_reps_c + 1) * n_clock + n_reps_c * n_clock + 3 * n_reps_s * n_clock

    @classmethod
    def zeros(cls, n_clock: int, n_reps_c: int, n_reps_s: int) -> "AnsatzParams":
        return cls(np.zeros((n_reps_c + 1, n_clock)), np.zeros((n_reps_c, n_clock)), np.zeros((n_reps_s, n_clock, 3)))

    @classmethod
    def from_vector(cls, vec, n_clock: int, n_reps_c: int, n_reps_s: int) -> "AnsatzParams":
        vec = np.asarray(vec, dtype=float)
        if vec.size != cls.count(n_clock, n_reps_c, n_reps_s):
            raise DimensionError(f"expected {cls.count(n_clock, n_reps_c, n_reps_s)} angles, got {vec.size}")
        a = (n_reps_c + 1) * n_clock
        b = a + n_reps_c * n_clock
        return cls(vec[:a].reshape(n_reps_c + 1, n_clock), vec[a:b].reshape(n_reps_c, n_clock),
                   vec[b:].reshape(n_reps_s, n_clock, 3))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.clock_ry.ravel(), self.clock_crz.ravel(), self.system_cu3.ravel()])

    @property
    def clock_angles(self) -> tuple[np.ndarray, np.ndarray]:
        return self.clock_ry, self.clock_crz

    def with_clock(self, clock_ry, clock_crz) -> "AnsatzParams":
        return AnsatzParams(np.array(clock_ry, dtype=float), np.array(clock_crz, dtype=float), self.system_cu3.copy())


def clock_qubit(n: int, n_sys: int) -> int:
    return n_sys + n


def clock_register(n_clock: int, n_sys: int) -> tuple[int, ...]:
    return tuple(clock_qubit(n, n_sys) for n in range(n_clock))


def _check_clock_angles(clock_ry: np.ndarray, clock_crz: np.ndarray, n_clock: int) -> None:
    if clock_ry.ndim != 2 or clock_ry.shape[1] != n_clock or clock_crz.shape != (clock_ry.shape[0] - 1, n_clock):
        raise DimensionError(f"clock angle shapes {clock_ry.shape}, {clock_crz.shape} do not fit {n_clock} clock qubits")


def build_U_C(clock_ry, clock_crz, spec: ClockSpec, n_sys: int = 0) -> Circuit:
    """Clock preparation: R_y layer, then (ring of controlled R_z, R_y layer) repeated.

    Gates are listed in application order.  Ring edges run control ``n`` to
    target ``n + 1`` in ascending ``n`` with the wrap-around edge last; edge
    ``n`` of layer ``a`` uses ``clock_crz[a, n]``.
    """
    clock_ry = np.asarray(clock_ry, dtype=float)
    clock_crz = np.asarray(clock_crz, dtype=float)
    nc = spec.n_qubits
    _check_clock_angles(clock_ry, clock_crz, nc)
    q = clock_register(nc, n_sys)
    gates: list[GateOp] = [GateOp("RY", (q[n],), (), (clock_ry[0, n],)) for n in range(nc)]
    for a in range(clock_crz.shape[0]):
        if nc > 1:
            for n in range(nc):
                gates.append(GateOp("CTRL_RZ", (q[(n + 1) % nc],), (q[n],), (clock_crz[a, n],)))
        gates.extend(GateOp("RY", (q[n],), (), (clock_ry[a + 1, n],)) for n in range(nc))
    return Circuit(nc + n_sys, tuple(gates))


def layer_hadamard(spec: ClockSpec, n_sys: int) -> list[GateOp]:
    return [GateOp("HAD", (q,)) for q in clock_register(spec.n_qubits, n_sys)]


def system_target(layer: int, n: int, n_clock: int, n_sys: int) -> int:
    # with several system qubits the controlled unitaries cycle through them
    return (layer * n_clock + n) % n_sys


def build_U_VQA(params: AnsatzParams, spec: ClockSpec, n_sys: int) -> Circuit:
    """Hadamard sandwich around layers of clock-controlled U3 gates on the system.

    Each clock qubit controls its own U3 in every layer; the surrounding
    Hadamards make the controls fire on ``|->`` instead of ``|1>``, so the
    circuit leaves ``|+...+> (x) anything`` untouched.
    """
    nc = spec.n_qubits
    if params.n_clock != nc:
        raise DimensionError(f"parameters are shaped for {params.n_clock} clock qubits, clock has {nc}")
    if n_sys < 1:
        raise DimensionError("need at least one system qubit")
    q = clock_register(nc, n_sys)
    gates = layer_hadamard(spec, n_sys)
    for a in range(params.n_reps_s):
        for n in range(nc):
            gates.append(GateOp("CTRL_U3", (system_target(a, n, nc, n_sys),), (q[n],), tuple(params.system_cu3[a, n])))
    gates += layer_hadamard(spec, n_sys)
    return Circuit(nc + n_sys, tuple(gates))


def build_U_z(spec: ClockSpec, tau: float, n_sys: int) -> Circuit:
    q = clock_register(spec.n_qubits, n_sys)
    return Circuit(spec.n_qubits + n_sys, (GateOp("PHASE_DIAG", q, (), (tau * spec.omega,)), GateOp("QFT", q)))


def clock_weights(clock_ry, clock_crz, spec: ClockSpec) -> np.ndarray:
    """d_Z = <chi(t(Z, 0))|U_C|0...0> for every clock outcome Z."""
    u_c0 = build_U_C(clock_ry, clock_crz, spec).apply(linalg.basis_state(spec.dim, 0))
    chis = clock_states(spec, spec.levels * spec.dt)
    return chis.conj() @ u_c0


def prepare_psi_init(spec: ClockSpec, clock_ry, clock_crz, U0=None, n_sys: int = 1) -> np.ndarray:
    """(U_C |0..0>) (x) (U0 |0..0>) with the clock as most significant factor."""
    if U0 is None:
        U0 = np.eye(2**n_sys)
    U0 = linalg.as_operator(U0)
    if U0.shape != (2**n_sys, 2**n_sys) or not linalg.is_unitary(U0):
        raise DimensionError("U0 must be a unitary on the system register")
    return np.kron(_clock_prep(np.asarray(clock_ry, dtype=float), np.asarray(clock_crz, dtype=float), spec), U0[:, 0])


def _kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1])


def _clock_prep(clock_ry: np.ndarray, clock_crz: np.ndarray, spec: ClockSpec) -> np.ndarray:
    # same gate sequence as build_U_C, with each layer applied as one dense/diagonal step
    nc = spec.n_qubits
    _check_clock_angles(clock_ry, clock_crz, nc)
    bits = (spec.levels[:, None] >> np.arange(nc)[None, :]) & 1
    spins = 1 - 2 * bits

    def ry_layer(angles):
        m = np.array([[1.0]])
        for n in reversed(range(nc)):
            c, s = math.cos(angles[n] / 2), math.sin(angles[n] / 2)
            m = _kron(m, np.array([[c, -s], [s, c]]))
        return m

    state = ry_layer(clock_ry[0])[:, 0].astype(complex)
    for a in range(clock_crz.shape[0]):
        if nc > 1:
            phase = np.zeros(spec.dim)
            for n in range(nc):
                phase -= 0.5 * clock_crz[a, n] * bits[:, n] * spins[:, (n + 1) % nc]
            state = state * np.exp(1j * phase)
        state = ry_layer(clock_ry[a + 1]) @ state
    return state


def full_circuit(params: AnsatzParams, spec: ClockSpec, n_sys: int) -> Circuit:
    """Gate list preparing the variational state from |0...0> (with U0 = identity)."""
    gates = list(build_U_C(params.clock_ry, params.clock_crz, spec, n_sys).gates)
    gates += build_U_VQA(params, spec, n_sys).gates
    return Circuit(spec.n_qubits + n_sys, tuple(gates))


def ansatz_state(params: AnsatzParams, spec: ClockSpec, n_sys: int, U0=None) -> np.ndarray:
    """Variational state U_VQA(theta) Psi_init, evaluated in the Hadamard frame.

    In the clock Hadamard basis ``|b>`` the controlled layers act as a fixed
    system unitary ``V_b`` (the product of the U3 gates whose control bit is
    set in ``b``), so all ``2**n_clock`` branches are propagated at once.
    Agrees with ``full_circuit(...).apply`` to rounding error.
    """
    nc, dim = spec.n_qubits, spec.dim
    dsys = 2**n_sys
    if U0 is None:
        clock_part = _clock_prep(params.clock_ry, params.clock_crz, spec)
        psi0 = np.zeros((dim, dsys), dtype=complex)
        psi0[:, 0] = clock_part
    else:
        psi0 = prepare_psi_init(spec, params.clock_ry, params.clock_crz, U0, n_sys).reshape(dim, dsys)
    had = _hadamard_all(nc)
    branches = had @ psi0
    fires = ((np.arange(dim)[:, None] >> np.arange(nc)[None, :]) & 1).astype(bool)
    us = u3_batch(params.system_cu3)
    for a in range(params.n_reps_s):
        for n in range(nc):
            j = system_target(a, n, nc, n_sys)
            if n_sys == 1:
                moved = branches @ us[a, n].T
            else:
                sub = branches.reshape([dim] + [2] * n_sys)
                ax = n_sys - j
                moved = np.moveaxis(np.tensordot(sub, us[a, n], axes=([ax], [1])), -1, ax).reshape(dim, dsys)
            branches = np.where(fires[:, n, None], moved, branches)
    return (had @ branches).reshape(-1)


def u3_batch(angles: np.ndarray) -> np.ndarray:
    """``u3_matrix`` over the last axis of ``angles`` (shape ``(..., 3)``)."""
    c, s = np.cos(angles[..., 0] / 2), np.sin(angles[..., 0] / 2)
    e2, e3 = np.exp(1j * angles[..., 1]), np.exp(1j * angles[..., 2])
    out = np.empty(angles.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = -e2 * s
    out[..., 1, 0] = e3 * s
    out[..., 1, 1] = e2 * e3 * c
    return out


_HAD_CACHE: dict[int, np.ndarray] = {}


def _hadamard_all(n: int) -> np.ndarray:
    if n not in _HAD_CACHE:
        m = np.array([[1.0]])
        for _ in range(n):
            m = np.kron(m, HADAMARD.real)
        _HAD_CACHE[n] = m
    return _HAD_CACHE[n]


def random_circuit(n_qubits: int, n_gates: int, rng: np.random.Generator) -> Circuit:
    """Random mix of the supported single-target gate kinds (test fixture)."""
    gates = []
    for _ in range(n_gates):
        kind = rng.choice(["RY", "RZ", "HAD", "U3", "CTRL_U3", "CTRL_RZ"])
        qs = rng.permutation(n_qubits)
        target = (int(qs[0]),)
        controls = (int(qs[1]),) if kind.startswith("CTRL") and n_qubits > 1 else ()
        if kind.startswith("CTRL") and not controls:
            kind = kind[5:]
        n_par = {"RY": 1, "RZ": 1, "HAD": 0, "U3": 3, "CTRL_U3": 3, "CTRL_RZ": 1}[kind]
        gates.append(GateOp(kind, target, controls, tuple(rng.uniform(-np.pi, np.pi, n_par))))
    return Circuit(n_qubits, tuple(gates))


def concat(circuits: Iterable[Circuit]) -> Circuit:
    it = iter(circuits)
    out = next(it)
    for c in it:
        out = out + c
    return out

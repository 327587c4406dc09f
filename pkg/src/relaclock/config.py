"""Flat ``section.key = value`` scenario files.

One statement per line; ``#`` starts a comment.  Numeric values may be
simple arithmetic over numbers and the names ``pi``, ``T0`` and ``dt``
(the clock period and tick, available once the clock section is known).
Matrices are written row-major as ``re,im`` pairs separated by ``;``.
"""
from __future__ import annotations

import ast
import hashlib
import math
import operator
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .clock import ClockSpec
from .errors import ConfigError

SYSTEM_PRESETS = ("pauli_z_half", "explicit")
COUPLING_PRESETS = ("pauli_x", "pauli_y", "pauli_z", "explicit")
PULSE_KINDS = ("gaussian", "tabulated", "zero")

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
           ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def evaluate(expr: str, names: dict[str, float], field: str) -> float:
    """Arithmetic over literals and ``names``; anything else is rejected."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in names:
            return float(names[node.id])
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ConfigError(field, f"unsupported expression {expr!r}")

    try:
        value = ev(ast.parse(expr.strip(), mode="eval"))
    except SyntaxError as exc:
        raise ConfigError(field, f"cannot parse {expr!r}") from exc
    except ZeroDivisionError as exc:
        raise ConfigError(field, f"division by zero in {expr!r}") from exc
    if not math.isfinite(value):
        raise ConfigError(field, f"value {expr!r} is not finite")
    return value


def parse_lines(text: str) -> dict[str, str]:
    """Raw ``section.key -> value`` strings; duplicate keys are an error."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'section.key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.count(".") != 1 or not all(key.split(".")):
            raise ConfigError(key or f"line {lineno}", "keys must look like section.key")
        if key in out:
            raise ConfigError(key, f"duplicate key on line {lineno}")
        out[key] = value
    return out


def parse_matrix(text: str, field: str) -> np.ndarray:
    entries = [e.strip() for e in text.split(";") if e.strip()]
    n = math.isqrt(len(entries))
    if n * n != len(entries) or n == 0:
        raise ConfigError(field, f"{len(entries)} entries do not form a square matrix")
    vals = []
    for e in entries:
        parts = e.split(",")
        if len(parts) != 2:
            raise ConfigError(field, f"entry {e!r} is not a 're,im' pair")
        vals.append(complex(evaluate(parts[0], {"pi": math.pi}, field), evaluate(parts[1], {"pi": math.pi}, field)))
    m = np.array(vals, dtype=complex).reshape(n, n)
    if not np.allclose(m, m.conj().T, atol=1e-12):
        raise ConfigError(field, "matrix is not Hermitian")
    return m


@dataclass(frozen=True)
class ScenarioConfig:
    clock_n_qubits: int = 4
    clock_omega: float = 1 / 3
    system_n_qubits: int = 1
    system_hamiltonian: str = "pauli_z_half"
    system_omega0: float = 1.0
    system_matrix: tuple = ()
    pulse_kind: str = "gaussian"
    pulse_c: float = 1.6
    pulse_t0: float = 1.14 * math.pi
    pulse_s: float = 0.36 * math.pi
    pulse_table_path: str = ""
    pulse_T_fraction: float = 0.4
    interaction_S: str = "pauli_x"
    interaction_S_matrix: tuple = ()
    interaction_rcond: float = 1e-8
    vqa_w: float = 0.02
    vqa_n_reps_C: int = 2
    vqa_n_reps_S: int = 5
    vqa_optimizer: str = "nelder_mead"
    vqa_max_iters: int = 20000
    vqa_restarts: int = 8
    vqa_seed: int = 0
    vqa_tolerance: float = 1e-8
    vqa_patience: int = 50
    vqa_init_scale: float = math.pi
    sampling_taus: tuple = ()
    sampling_shots: int = 100000
    sampling_seed: int = 0
    verify_min_fidelity: float = 0.98
    output_dir: str = "out"
    output_grid_points: int = 512
    source_dir: str = "."

    @property
    def clock(self) -> ClockSpec:
        return ClockSpec(self.clock_n_qubits, self.clock_omega)

    @property
    def T(self) -> float:
        return self.pulse_T_fraction * self.clock.period

    def hamiltonian(self) -> np.ndarray:
        if self.system_hamiltonian == "pauli_z_half":
            z = np.diag([1.0, -1.0]).astype(complex)
            h = np.zeros((2**self.system_n_qubits,) * 2, dtype=complex)
            for q in range(self.system_n_qubits):
                h += np.kron(np.kron(np.eye(2 ** (self.system_n_qubits - 1 - q)), z), np.eye(2**q))
            return 0.5 * self.system_omega0 * h
        return np.array(self.system_matrix, dtype=complex)

    def coupling(self) -> np.ndarray:
        paulis = {"pauli_x": [[0, 1], [1, 0]], "pauli_y": [[0, -1j], [1j, 0]], "pauli_z": [[1, 0], [0, -1]]}
        if self.interaction_S in paulis:
            p = np.array(paulis[self.interaction_S], dtype=complex)
            s = np.zeros((2**self.system_n_qubits,) * 2, dtype=complex)
            for q in range(self.system_n_qubits):
                s += np.kron(np.kron(np.eye(2 ** (self.system_n_qubits - 1 - q)), p), np.eye(2**q))
            return s
        return np.array(self.interaction_S_matrix, dtype=complex)

    def taus(self) -> list[float]:
        if self.sampling_taus:
            return list(self.sampling_taus)
        dt = self.clock.dt
        return [0.0, dt / 4, dt / 2, 3 * dt / 4]

    def canonical(self) -> str:
        """Deterministic text form; the output directory is excluded."""
        lines = []
        for f in fields(self):
            if f.name in ("output_dir", "source_dir"):
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ";".join(repr(complex(x)) if isinstance(x, complex) else repr(x) for x in np.ravel(np.array(v, dtype=object)))
            lines.append(f"{f.name}={v!r}")
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def with_seed(self, seed: int) -> "ScenarioConfig":
        if not 0 <= seed < 2**64:
            raise ConfigError("--seed", f"seed must be a u64, got {seed}")
        return replace(self, vqa_seed=seed, sampling_seed=seed)


_INT_KEYS = {"clock.n_qubits", "system.n_qubits", "vqa.n_reps_C", "vqa.n_reps_S", "vqa.max_iters", "vqa.restarts",
             "vqa.seed", "vqa.patience", "sampling.shots", "sampling.seed", "output.grid_points"}
_STR_KEYS = {"system.hamiltonian", "pulse.kind", "pulse.table_path", "interaction.S", "vqa.optimizer", "output.dir"}
_FLOAT_KEYS = {"clock.omega", "system.omega0", "pulse.c", "pulse.t0", "pulse.s", "pulse.T_fraction",
               "interaction.rcond", "vqa.w", "vqa.tolerance", "vqa.init_scale", "verify.min_fidelity"}
_SPECIAL_KEYS = {"system.matrix", "interaction.S_matrix", "sampling.taus"}


def _as_int(value: str, key: str) -> int:
    try:
        return int(value, 0)
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {value!r}") from None


def from_text(text: str, source_dir: str = ".") -> ScenarioConfig:
    raw = parse_lines(text)
    unknown = set(raw) - _INT_KEYS - _STR_KEYS - _FLOAT_KEYS - _SPECIAL_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    kw: dict = {"source_dir": source_dir}
    names = {"pi": math.pi}
    # clock first so T0 and dt are available to later expressions
    for key in ("clock.n_qubits", "clock.omega"):
        if key in raw:
            kw[key.replace(".", "_")] = _as_int(raw[key], key) if key in _INT_KEYS else evaluate(raw[key], names, key)
    try:
        spec = ClockSpec(kw.get("clock_n_qubits", 4), kw.get("clock_omega", 1 / 3))
    except ValueError as exc:
        raise ConfigError("clock", str(exc)) from None
    names.update(T0=spec.period, dt=spec.dt)
    for key, value in raw.items():
        name = key.replace(".", "_")
        if name in kw:
            continue
        if key in _INT_KEYS:
            kw[name] = _as_int(value, key)
        elif key in _STR_KEYS:
            kw[name] = value
        elif key in _FLOAT_KEYS:
            kw[name] = evaluate(value, names, key)
        elif key == "sampling.taus":
            kw[name] = tuple(evaluate(v, names, key) for v in value.split(",") if v.strip())
        else:
            kw[name] = tuple(map(tuple, parse_matrix(value, key)))
    return validate(ScenarioConfig(**kw))


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    return from_text(text, str(path.parent))


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    """Field-level checks; raises ``ConfigError`` naming the offending key."""
    ds = 2**cfg.system_n_qubits
    if cfg.system_n_qubits < 1:
        raise ConfigError("system.n_qubits", "must be at least 1")
    if cfg.system_hamiltonian not in SYSTEM_PRESETS:
        raise ConfigError("system.hamiltonian", f"unknown preset {cfg.system_hamiltonian!r}; choose from {SYSTEM_PRESETS}")
    if cfg.system_hamiltonian == "explicit" and np.shape(cfg.system_matrix) != (ds, ds):
        raise ConfigError("system.matrix", f"explicit Hamiltonian must be {ds}x{ds}")
    if cfg.interaction_S not in COUPLING_PRESETS:
        raise ConfigError("interaction.S", f"unknown preset {cfg.interaction_S!r}; choose from {COUPLING_PRESETS}")
    if cfg.interaction_S == "explicit" and np.shape(cfg.interaction_S_matrix) != (ds, ds):
        raise ConfigError("interaction.S_matrix", f"explicit coupling must be {ds}x{ds}")
    if cfg.pulse_kind not in PULSE_KINDS:
        raise ConfigError("pulse.kind", f"unknown kind {cfg.pulse_kind!r}; choose from {PULSE_KINDS}")
    if cfg.pulse_kind == "gaussian" and not cfg.pulse_s > 0:
        raise ConfigError("pulse.s", "gaussian width must be positive")
    if cfg.pulse_kind == "tabulated" and not cfg.pulse_table_path:
        raise ConfigError("pulse.table_path", "required for tabulated pulses")
    if not 0 < cfg.pulse_T_fraction <= 1:
        raise ConfigError("pulse.T_fraction", f"must lie in (0, 1], got {cfg.pulse_T_fraction}")
    if not cfg.interaction_rcond > 0:
        raise ConfigError("interaction.rcond", "must be positive")
    if cfg.vqa_w < 0:
        raise ConfigError("vqa.w", "must be non-negative")
    if cfg.vqa_n_reps_C < 0 or cfg.vqa_n_reps_S < 1:
        raise ConfigError("vqa.n_reps_S" if cfg.vqa_n_reps_S < 1 else "vqa.n_reps_C", "invalid repetition count")
    if cfg.vqa_optimizer not in ("nelder_mead", "spsa", "lbfgs"):
        raise ConfigError("vqa.optimizer", f"unknown optimizer {cfg.vqa_optimizer!r}")
    for key in ("max_iters", "restarts", "patience"):
        if getattr(cfg, f"vqa_{key}") < 1:
            raise ConfigError(f"vqa.{key}", "must be at least 1")
    if not cfg.vqa_tolerance > 0:
        raise ConfigError("vqa.tolerance", "must be positive")
    for key in ("vqa_seed", "sampling_seed"):
        if not 0 <= getattr(cfg, key) < 2**64:
            raise ConfigError(key.replace("_", ".", 1), "must be a u64")
    if cfg.sampling_shots < 1:
        raise ConfigError("sampling.shots", f"must be at least 1, got {cfg.sampling_shots}")
    if cfg.output_grid_points < 2:
        raise ConfigError("output.grid_points", "must be at least 2")
    if not 0 <= cfg.verify_min_fidelity <= 1:
        raise ConfigError("verify.min_fidelity", "must lie in [0, 1]")
    return cfg

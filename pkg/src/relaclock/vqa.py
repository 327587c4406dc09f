"""Variational preparation of an approximate global eigenstate.

The cost is ``Var_Psi(H) + w <Psi|E|Psi>`` for ``Psi = U_VQA(theta) Psi_init``.
All angles (clock preparation and controlled system unitaries) are
optimized together, starting from clock angles that make the clock weights
``|d_Z|^2`` flat.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .circuits import AnsatzParams, ansatz_state, clock_weights
from .model import GlobalModel

log = logging.getLogger(__name__)

METHODS = ("nelder_mead", "spsa", "lbfgs")


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "nelder_mead"
    max_iters: int = 20000
    restarts: int = 1
    seed: int = 0
    init_scale: float = math.pi
    tolerance: float = 1e-8
    patience: int = 50
    n_reps_c: int = 2
    n_reps_s: int = 5

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown optimizer {self.method!r}; choose from {METHODS}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass
class IterationRecord:
    restart: int
    iter: int
    cost: float
    variance: float
    error_term: float


@dataclass
class RestartResult:
    restart: int
    params: AnsatzParams
    cost: float
    variance: float
    error_term: float
    iterations: int
    n_evals: int
    stop_reason: str


@dataclass
class OptimizationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    restarts: list[RestartResult] = field(default_factory=list)
    best: RestartResult | None = None

    @property
    def params(self) -> AnsatzParams:
        return self.best.params

    @property
    def cost(self) -> float:
        return self.best.cost

    def write_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            fh.write("iter,restart,cost,variance,error_term\n")
            for r in self.records:
                fh.write(f"{r.iter},{r.restart},{r.cost:.17g},{r.variance:.17g},{r.error_term:.17g}\n")


class CostFunction:
    """Callable cost over flat angle vectors, counting evaluations."""

    def __init__(self, model: GlobalModel, n_reps_c: int, n_reps_s: int, U0=None):
        self.model = model
        self.shape = (model.spec.n_qubits, n_reps_c, n_reps_s)
        self.U0 = U0
        self.n_evals = 0

    def params(self, x) -> AnsatzParams:
        return AnsatzParams.from_vector(x, *self.shape)

    def state(self, x) -> np.ndarray:
        return ansatz_state(self.params(x), self.model.spec, self.model.n_sys, self.U0)

    def terms(self, x) -> tuple[float, float, float]:
        self.n_evals += 1
        psi = self.state(x)
        v = self.model.H_global @ psi
        mean = np.vdot(psi, v).real
        var = max(np.vdot(v, v).real - mean * mean, 0.0)
        err = 0.0
        if self.model.w > 0:
            err = max(float(np.vdot(psi, self.model.E_op @ psi).real), 0.0)
        return var + self.model.w * err, var, err

    def __call__(self, x) -> float:
        return self.terms(x)[0]


def cost(model: GlobalModel, params: AnsatzParams, U0=None) -> tuple[float, float, float]:
    """(eta, variance, error term) of the state prepared with ``params``."""
    f = CostFunction(model, params.n_reps_c, params.n_reps_s, U0)
    return f.terms(params.to_vector())


def flatness(clock_ry, clock_crz, spec) -> float:
    """Largest deviation of the clock weights |d_Z|^2 from 1/D."""
    d = clock_weights(clock_ry, clock_crz, spec)
    return float(np.max(np.abs(np.abs(d) ** 2 - 1.0 / spec.dim)))


def select_theta0(model: GlobalModel, config: OptimizerConfig) -> tuple[np.ndarray, np.ndarray]:
    """Clock angles giving (nearly) equal clock weights, from a seeded pre-optimization."""
    spec = model.spec
    nc, reps = spec.n_qubits, config.n_reps_c
    n_ry = (reps + 1) * nc

    def unpack(x):
        return x[:n_ry].reshape(reps + 1, nc), x[n_ry:].reshape(reps, nc)

    def objective(x):
        d = clock_weights(*unpack(x), spec)
        return float(np.sum((np.abs(d) ** 2 - 1.0 / spec.dim) ** 2))

    rng = np.random.default_rng([config.seed, 0xC10C])
    x0 = rng.uniform(-0.5, 0.5, n_ry + reps * nc)
    res = scipy.optimize.minimize(objective, x0, method="BFGS", options={"gtol": 1e-12, "maxiter": 2000})
    ry, crz = unpack(res.x)
    log.info("clock pre-optimization: max | |d_Z|^2 - 1/D | = %.3e", flatness(ry, crz, spec))
    return ry, crz


class _Stop(Exception):
    pass


class _Tracker:
    """Best-so-far bookkeeping plus the patience-based stopping rule."""

    def __init__(self, f: CostFunction, restart: int, config: OptimizerConfig, trace: OptimizationTrace):
        self.f, self.restart, self.config, self.trace = f, restart, config, trace
        self.best_x = None
        self.best = (math.inf, math.inf, math.inf)
        self.iter = 0
        self.last_improvement = 0
        self.anchor = math.inf
        self.stop_reason = "max_iters"

    def observe(self, x, terms=None) -> None:
        terms = self.f.terms(x) if terms is None else terms
        if terms[0] < self.best[0]:
            self.best, self.best_x = terms, np.array(x, dtype=float)
        self.trace.records.append(IterationRecord(self.restart, self.iter, *self.best))
        if self.anchor - self.best[0] >= self.config.tolerance:
            self.anchor, self.last_improvement = self.best[0], self.iter
        self.iter += 1
        if self.iter - self.last_improvement > self.config.patience:
            self.stop_reason = "tolerance"
            raise _Stop
        if self.iter >= self.config.max_iters:
            self.stop_reason = "max_iters"
            raise _Stop


def _run_scipy(method: str, f: CostFunction, x0: np.ndarray, tracker: _Tracker, config: OptimizerConfig) -> None:
    def callback(xk, *args):
        tracker.observe(xk)

    if method == "nelder_mead":
        opts = {"maxiter": config.max_iters + 1, "maxfev": 10**9, "adaptive": True, "xatol": 0.0, "fatol": 0.0}
        name = "Nelder-Mead"
    else:
        opts = {"maxiter": config.max_iters + 1, "maxfun": 10**9, "ftol": 0.0, "gtol": 1e-12}
        name = "L-BFGS-B"
    try:
        res = scipy.optimize.minimize(f, x0, method=name, callback=callback, options=opts)
        tracker.observe(res.x)
        tracker.stop_reason = "converged"
    except _Stop:
        pass


def _run_spsa(f: CostFunction, x0: np.ndarray, tracker: _Tracker, config: OptimizerConfig, rng) -> None:
    # standard gain sequences a_k = a / (k + 1 + A)^0.602, c_k = c / (k + 1)^0.101
    a, c, big_a = 0.2, 0.1, 0.1 * config.max_iters
    x = x0.copy()
    try:
        for k in range(config.max_iters):
            ak = a / (k + 1 + big_a) ** 0.602
            ck = c / (k + 1) ** 0.101
            delta = rng.choice([-1.0, 1.0], size=x.size)
            grad = (f(x + ck * delta) - f(x - ck * delta)) / (2 * ck) * delta
            x = x - ak * grad
            tracker.observe(x)
    except _Stop:
        pass


def initial_angles(restart: int, config: OptimizerConfig, theta0, n_clock: int) -> np.ndarray:
    """Clock angles from ``theta0``; system angles drawn uniformly in +-init_scale."""
    rng = np.random.default_rng([config.seed, restart])
    reps_s = config.n_reps_s
    sys_angles = rng.uniform(-config.init_scale, config.init_scale, 3 * reps_s * n_clock)
    ry, crz = theta0
    return np.concatenate([np.asarray(ry, dtype=float).ravel(), np.asarray(crz, dtype=float).ravel(), sys_angles])


def optimize(model: GlobalModel, config: OptimizerConfig, theta0=None, U0=None) -> OptimizationTrace:
    """Minimize the cost over ``config.restarts`` seeded restarts; keeps the best."""
    nc = model.spec.n_qubits
    if theta0 is None:
        theta0 = select_theta0(model, config)
    trace = OptimizationTrace()
    for restart in range(config.restarts):
        f = CostFunction(model, config.n_reps_c, config.n_reps_s, U0)
        x0 = initial_angles(restart, config, theta0, nc)
        tracker = _Tracker(f, restart, config, trace)
        try:
            tracker.observe(x0)
        except _Stop:
            pass
        else:
            if config.method == "spsa":
                _run_spsa(f, x0, tracker, config, np.random.default_rng([config.seed, restart, 1]))
            else:
                _run_scipy(config.method, f, x0, tracker, config)
        params = f.params(tracker.best_x)
        result = RestartResult(restart, params, *tracker.best, tracker.iter, f.n_evals, tracker.stop_reason)
        trace.restarts.append(result)
        log.info("restart %d: cost=%.6g var=%.6g err=%.6g after %d iterations (%s)", restart,
                 result.cost, result.variance, result.error_term, result.iterations, result.stop_reason)
        if trace.best is None or result.cost < trace.best.cost:
            trace.best = result
    return trace

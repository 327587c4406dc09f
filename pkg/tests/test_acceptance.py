"""Acceptance criteria, one test each.

Every test prints a single PASS/FAIL line with the measured value and the
tolerance, then asserts.  Run with ``pytest tests/test_acceptance.py -s`` to
see the lines.  Criteria 8 and 12 share one driven-qubit pipeline run (several
minutes on one core).
"""
import dataclasses
import math
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import error_operator_bruteforce
from relaclock import cli, dynamics as dy, interaction as ia, pauli, sampler, vqa
from relaclock.config import load
from relaclock.errors import VanishingNormError
from relaclock.model import exact_eigenstate_near, variance
from scenarios import DRIVEN_SPEC, DRIVEN_T, X, driven_pulse, toy_model, toy_state
from test_dynamics import _g0_models

DRIVEN_CFG = Path(cli.__file__).parent / "examples" / "driven.cfg"
EPS = 0.05


def report(n, label, measured, tolerance, passed, elapsed=None):
    extra = f" [{elapsed:.2f} s]" if elapsed is not None else ""
    print(f"\n{'PASS' if passed else 'FAIL'}  criterion {n:2d}  {label}: {measured} (tolerance {tolerance}){extra}")
    assert passed, f"criterion {n}: {label} = {measured}, tolerance {tolerance}"


def test_c01_toy_fidelity():
    start = time.perf_counter()
    times = np.linspace(0, 40, 512)
    phi0 = np.array([1, 1]) / math.sqrt(2)
    rep = dy.compare(toy_model(EPS), toy_state(), None, phi0, times)
    err = float(np.max(np.abs(rep.fidelity - np.cos(EPS * times) ** 2)))
    elapsed = time.perf_counter() - start
    report(1, "toy max |F(t) - cos^2(eps t)| on [0, 40]", f"{err:.2e}", "< 1e-10, < 1 s",
           err < 1e-10 and elapsed < 1, elapsed)


def test_c02_toy_variance():
    var = variance(toy_model(EPS), toy_state())
    err = abs(var - EPS**2)
    report(2, "toy |Var - eps^2|", f"{err:.2e} (Var = {var:.12f})", "< 1e-12", err < 1e-12)


def test_c03_envariance():
    start = time.perf_counter()
    worst, checked = 0.0, 0
    for m in _g0_models():
        assert m.H_global.shape[0] <= 32
        clock = dy.ClockEvolution(m.H_clock)
        times = np.linspace(0, m.spec.period, 128)
        for e in np.linalg.eigvalsh(m.H_global):
            psi, _ = exact_eigenstate_near(m, e)
            try:
                phi0, n0 = dy.condition(psi, clock(0.0))
            except VanishingNormError:
                continue
            if n0 <= 0.01:
                continue
            rep = dy.compare(m, psi, None, phi0, times)
            worst = max(worst, float(np.max(np.abs(rep.fidelity - 1))))
            checked += 1
    elapsed = time.perf_counter() - start
    report(3, f"max |F - 1| over {checked} eigenstates of 4 models", f"{worst:.2e}", "< 1e-9, < 10 s",
           checked > 0 and worst < 1e-9 and elapsed < 10, elapsed)


def test_c04_full_window_closed_form():
    start = time.perf_counter()
    T0 = DRIVEN_SPEC.period
    pulse = driven_pulse().with_horizon(T0)
    eng = ia.solve_coefficients(pulse, DRIVEN_SPEC)
    ks = ia.offsets(DRIVEN_SPEC)
    g = ia.pulse_fourier(pulse, DRIVEN_SPEC, ks)
    d = DRIVEN_SPEC.dim
    err = float(np.max(np.abs(eng.h - d * g / (d - np.abs(ks)))))
    elapsed = time.perf_counter() - start
    report(4, "T = T0 closed form vs linear solve, max |dh_K|", f"{err:.2e}", "< 1e-9, < 1 s",
           err < 1e-9 and elapsed < 1, elapsed)


def test_c05_q_positivity():
    start = time.perf_counter()
    T0 = DRIVEN_SPEC.period
    rng = np.random.default_rng(5)
    ts = T0 * (1 - rng.random(50))  # (0, T0]
    pivots = [ia.min_cholesky_pivot(t, T0, 16) for t in ts]
    lowest = min(pivots)
    elapsed = time.perf_counter() - start
    report(5, "smallest Cholesky pivot of Q over 50 random T", f"{float(lowest):.3e}", "> 0, < 5 s",
           lowest > 0 and elapsed < 5, elapsed)


def test_c06_toeplitz_pauli():
    start = time.perf_counter()
    worst, count = 0.0, 0
    for n in range(1, 6):
        dim = 2**n
        for k in range(-(dim - 1), dim):
            dense = pauli.to_dense(pauli.toeplitz_offdiag(n, k))
            worst = max(worst, float(np.max(np.abs(dense - np.eye(dim, k=k)))))
            count += 1
    elapsed = time.perf_counter() - start
    report(6, f"Pauli reconstruction of {count} shift matrices, max entry error", f"{worst:.1e}",
           "== 0, < 5 s", worst == 0 and elapsed < 5, elapsed)


def test_c07_error_operator():
    start = time.perf_counter()
    eng = ia.engineer(driven_pulse(), DRIVEN_SPEC, X)
    E = ia.build_error_operator(eng, DRIVEN_SPEC, DRIVEN_T)
    ref = error_operator_bruteforce(eng.G, X, DRIVEN_SPEC.omega, DRIVEN_T, nodes=2048)
    err = float(np.linalg.norm(E - ref, 2))
    e_min = float(np.linalg.eigvalsh(E).min())
    elapsed = time.perf_counter() - start
    report(7, "||E - E_bruteforce||_2, min eig E", f"{err:.2e}, {e_min:.2e}", "< 1e-6, >= -1e-9, < 10 s",
           err < 1e-6 and e_min >= -1e-9 and elapsed < 10, elapsed)


@pytest.fixture(scope="module")
def driven_run(tmp_path_factory):
    """One full ``run-all`` of the driven-qubit scenario plus a per-restart assessment."""
    cfg = load(DRIVEN_CFG)
    out = tmp_path_factory.mktemp("driven_first")
    start = time.perf_counter()
    res = cli.run_all(cfg, out)
    elapsed = time.perf_counter() - start
    sc = res["engineer"]["scenario"]
    model = sc.model
    f = vqa.CostFunction(model, cfg.vqa_n_reps_C, cfg.vqa_n_reps_S)
    times = np.linspace(0, cfg.clock.period, cfg.output_grid_points)
    phi0 = np.array([1, 0], dtype=complex)
    rows = []
    for r in res["optimize"]["trace"].restarts:
        psi = f.state(r.params.to_vector())
        var = variance(model, psi)
        min_f = dy.compare(model, psi, sc.pulse, phi0, times).min_fidelity(cfg.T)
        rows.append((r.restart, math.sqrt(var), min_f, model.T**2 * var, r.iterations))
    return {"cfg": cfg, "out": out, "res": res, "rows": rows, "elapsed": elapsed}


def test_c08_driven_pipeline(driven_run):
    cfg, rows = driven_run["cfg"], driven_run["rows"]
    assert cfg.clock_n_qubits == 4 and cfg.vqa_w == 0.02 and cfg.vqa_restarts <= 8
    assert cfg.vqa_max_iters <= 20000 and (cfg.vqa_n_reps_C, cfg.vqa_n_reps_S) == (2, 5)
    print()
    for restart, sd, min_f, tvar, iters in rows:
        ok = sd <= 0.08 and min_f >= 0.98 and tvar <= 0.35
        print(f"  restart {restart}: sqrt(Var) = {sd:.4f}, min F on [0,T] = {min_f:.4f}, "
              f"T^2 Var = {tvar:.4f}, iterations = {iters} -> {'ok' if ok else 'miss'}")
    # soft time-energy log: accurate dynamics needs T^2 Var << 1
    best = min(rows, key=lambda r: r[1])
    print(f"  time-energy product of the lowest-variance restart: T^2 Var = {best[3]:.4f}")
    passing = [r for r in rows if r[1] <= 0.08 and r[2] >= 0.98 and r[3] <= 0.35]
    shown = max(rows, key=lambda r: (r[1] <= 0.08 and r[3] <= 0.35, r[2]))
    report(8, f"driven-qubit pipeline, {len(passing)}/{len(rows)} restarts inside all bands; best min F restart",
           f"sqrt(Var) = {shown[1]:.4f}, min F = {shown[2]:.4f}, T^2 Var = {shown[3]:.4f}",
           "sqrt(Var) <= 0.08, min F >= 0.98, T^2 Var <= 0.35", bool(passing), driven_run["elapsed"])


def test_c09_sampling_uniformity(tmp_path):
    # zero-interaction pipeline: optimize, then sample at every default tau.
    # Draws in +-pi stall at Var = (Omega/2)^2 (two adjacent clock levels mixed),
    # so the system angles start closer to the identity circuit.
    cfg = dataclasses.replace(load(DRIVEN_CFG), pulse_kind="zero", vqa_restarts=1, vqa_init_scale=0.5)
    prep = time.perf_counter()
    opt = cli.run_optimize(cfg, tmp_path)
    prep = time.perf_counter() - prep
    assert np.all(opt["scenario"].model.G == 0)
    start = time.perf_counter()
    shots = 10**5
    reports = cli.run_sample(cfg, tmp_path, scenario=opt["scenario"])["reports"]
    p = 1 / 16
    sigma = math.sqrt(p * (1 - p) / shots)
    dev = max(float(np.max(np.abs(r.histogram / shots - p))) for r in reports)
    elapsed = time.perf_counter() - start
    assert all(r.shots == shots for r in reports) and len(reports) == 4
    report(9, f"max |count/shots - 1/16| / sigma over 4 taus (state Var = {opt['summary']['variance']:.1e}, "
              f"prepared in {prep:.0f} s)", f"{dev / sigma:.2f}", "< 4, sampling < 5 s",
           dev < 4 * sigma and elapsed < 5, elapsed)


def test_c10_normalization_rate(driven_run):
    start = time.perf_counter()
    model = driven_run["res"]["engineer"]["scenario"].model
    psi = driven_run["res"]["optimize"]["psi"]
    spec = model.spec
    rng = np.random.default_rng(10)
    h = 1e-5 * spec.period
    errs = [abs(dy.normalization_rate(psi, spec, t, h) - dy.commutator_rate(psi, model.H_interaction, spec, t))
            for t in rng.uniform(0, spec.period, 32)]
    worst = float(max(errs))
    elapsed = time.perf_counter() - start
    report(10, "max |dN/dt - (-i<[H_SC, P_chi(t)]>)| at 32 random t", f"{worst:.3e}", "< 1e-6, < 5 s",
           worst < 1e-6 and elapsed < 5, elapsed)


def test_c11_dual_route():
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    v = rng.normal(size=32) + 1j * rng.normal(size=32)
    psi = v / np.linalg.norm(v)
    worst = 0.0
    for tau in sampler.default_taus(DRIVEN_SPEC):
        a = sampler.exact_probabilities(psi, DRIVEN_SPEC, tau)
        b = sampler.projector_probabilities(psi, DRIVEN_SPEC, tau)
        worst = max(worst, float(np.max(np.abs(a - b))))
    elapsed = time.perf_counter() - start
    report(11, "QFT route vs projector route, max |dp|", f"{worst:.2e}", "< 1e-10, < 1 s",
           worst < 1e-10 and elapsed < 1, elapsed)


def test_c12_determinism(driven_run, tmp_path):
    second = tmp_path / "driven_second"
    start = time.perf_counter()
    code = cli.main(["run-all", "--config", str(DRIVEN_CFG), "--out-dir", str(second)])
    elapsed = time.perf_counter() - start
    first = driven_run["out"]
    names = sorted(p.name for p in first.iterdir())
    differing = [n for n in names if not (second / n).exists() or (first / n).read_bytes() != (second / n).read_bytes()]
    report(12, f"run-all twice, files differing out of {len(names)}", f"{differing or 0}", "0 differing",
           code == 0 and not differing and sorted(p.name for p in second.iterdir()) == names, elapsed)

import numpy as np
import pytest

from relaclock import vqa
from relaclock.circuits import AnsatzParams
from relaclock.clock import clock_state
from relaclock.model import variance
from scenarios import driven_model, toy_model


def toy_config(**kw):
    base = dict(method="nelder_mead", max_iters=500, restarts=1, seed=3, n_reps_c=1, n_reps_s=2)
    base.update(kw)
    return vqa.OptimizerConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        vqa.OptimizerConfig(method="adam")
    with pytest.raises(ValueError):
        vqa.OptimizerConfig(max_iters=0)
    with pytest.raises(ValueError):
        vqa.OptimizerConfig(tolerance=0)


def test_cost_at_eigenstate_is_zero():
    m = toy_model(0.05)
    # all angles zero prepare |0>_C |0>_S, an eigenstate of the diagonal toy Hamiltonian
    c, var, err = vqa.cost(m, AnsatzParams.zeros(1, 1, 2))
    assert c < 1e-10 and var < 1e-10 and err == 0


def test_error_term_zero_without_coupling():
    m = toy_model(0.05)
    rng = np.random.default_rng(0)
    for _ in range(10):
        p = AnsatzParams.from_vector(rng.uniform(-3, 3, AnsatzParams.count(1, 1, 2)), 1, 1, 2)
        assert vqa.cost(m, p)[2] == 0


def test_cost_nonnegative_and_consistent():
    m = driven_model()
    rng = np.random.default_rng(1)
    f = vqa.CostFunction(m, 2, 5)
    for _ in range(20):
        x = rng.uniform(-3, 3, 80)
        c, var, err = f.terms(x)
        assert c >= 0 and err >= 0
        assert c == pytest.approx(var + 0.02 * err)
        assert var == pytest.approx(variance(m, f.state(x)), abs=1e-12)


def test_toy_converges():
    m = toy_model(0.05)
    trace = vqa.optimize(m, toy_config())
    assert trace.best.variance < 1e-6
    assert trace.best.iterations <= 500


def test_single_iteration_keeps_initial_cost():
    m = toy_model(0.05)
    cfg = toy_config(max_iters=1)
    theta0 = vqa.select_theta0(m, cfg)
    trace = vqa.optimize(m, cfg, theta0)
    x0 = vqa.initial_angles(0, cfg, theta0, 1)
    assert trace.cost == vqa.CostFunction(m, 1, 2)(x0)
    assert len(trace.records) == 1


@pytest.mark.parametrize("method", ["nelder_mead", "spsa", "lbfgs"])
def test_deterministic_and_monotone(method, tmp_path):
    m = driven_model()
    cfg = vqa.OptimizerConfig(method=method, max_iters=60, restarts=2, seed=5)
    a = vqa.optimize(m, cfg)
    b = vqa.optimize(m, cfg)
    assert np.array_equal(a.params.to_vector(), b.params.to_vector())
    a.write_csv(tmp_path / "a.csv", "config_hash=1")
    b.write_csv(tmp_path / "b.csv", "config_hash=1")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    for r in range(2):
        costs = [rec.cost for rec in a.records if rec.restart == r]
        assert all(x >= y for x, y in zip(costs, costs[1:]))
    assert a.cost == min(r.cost for r in a.restarts)
    assert (tmp_path / "a.csv").read_text().splitlines()[1] == "iter,restart,cost,variance,error_term"


def test_optimizer_improves_cost():
    m = driven_model()
    cfg = vqa.OptimizerConfig(method="lbfgs", max_iters=40, seed=2)
    trace = vqa.optimize(m, cfg)
    assert trace.records[-1].cost < trace.records[0].cost


def test_visited_states_keep_initial_condition():
    m = driven_model()
    f = vqa.CostFunction(m, 2, 5)
    seen = []
    original = f.terms

    def spy(x):
        seen.append(np.array(x))
        return original(x)

    f.terms = spy
    cfg = vqa.OptimizerConfig(method="nelder_mead", max_iters=30, seed=1)
    tracker = vqa._Tracker(f, 0, cfg, vqa.OptimizationTrace())
    x0 = vqa.initial_angles(0, cfg, vqa.select_theta0(m, cfg), 4)
    vqa._run_scipy("nelder_mead", f, x0, tracker, cfg)
    chi0 = clock_state(m.spec, 0.0)
    for x in seen[::10]:
        b = chi0.conj() @ f.state(x).reshape(16, 2)
        assert abs(b[0]) ** 2 / np.vdot(b, b).real > 1 - 1e-9


def test_select_theta0_flatness():
    m1 = toy_model(0.05)
    ry, crz = vqa.select_theta0(m1, toy_config())
    assert vqa.flatness(ry, crz, m1.spec) < 1e-6
    m = driven_model()
    ry, crz = vqa.select_theta0(m, vqa.OptimizerConfig())
    assert vqa.flatness(ry, crz, m.spec) < 0.05

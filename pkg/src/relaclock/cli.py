"""Command-line pipeline: engineer -> optimize -> verify -> sample."""
from __future__ import annotations

import argparse
import logging
import math
import struct
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dynamics, interaction, sampler, vqa
from .config import ScenarioConfig, load
from .errors import ConfigError, NotPositiveDefiniteError, NumericalError, StateFileError
from .model import GlobalModel, assemble, error_expectation, variance

log = logging.getLogger("relaclock")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_THRESHOLD = 0, 2, 3, 4

STATE_MAGIC = b"RCLK"
STATE_VERSION = 1
_HEADER = struct.Struct("<4sIQ")


def write_state(path, psi: np.ndarray) -> None:
    psi = np.ascontiguousarray(psi, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(STATE_MAGIC, STATE_VERSION, psi.size))
        fh.write(psi.view("<f8").tobytes())


def read_state(path, expected_dim: int | None = None) -> np.ndarray:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise StateFileError(f"cannot read state file {path}: {exc.strerror}") from None
    if len(data) < _HEADER.size:
        raise StateFileError(f"state file truncated at byte offset {len(data)}: header needs {_HEADER.size} bytes")
    magic, version, dim = _HEADER.unpack_from(data)
    if magic != STATE_MAGIC:
        raise StateFileError(f"bad magic {magic!r} at byte offset 0, expected {STATE_MAGIC!r}")
    if version != STATE_VERSION:
        raise StateFileError(f"unsupported version {version} at byte offset 4")
    if expected_dim is not None and dim != expected_dim:
        raise StateFileError(f"state dimension {dim} (byte offset 8) does not match the model dimension {expected_dim}")
    need = _HEADER.size + 16 * dim
    if len(data) < need:
        raise StateFileError(f"state file truncated at byte offset {len(data)}: expected {need} bytes for dim {dim}")
    if len(data) > need:
        raise StateFileError(f"trailing data after byte offset {need}")
    psi = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).view("<c16").astype(complex)
    if not np.all(np.isfinite(psi)):
        raise StateFileError("state file contains non-finite amplitudes")
    return psi


@dataclass
class Scenario:
    """Everything derived from a config before optimization."""

    config: ScenarioConfig
    pulse: interaction.PulseSpec
    engineered: interaction.EngineeredInteraction
    model: GlobalModel

    @property
    def comment(self) -> str:
        return f"config_hash={self.config.hash()}"


def build_pulse(cfg: ScenarioConfig) -> interaction.PulseSpec:
    T = cfg.T
    if cfg.pulse_kind == "zero":
        return interaction.PulseSpec.zero(T)
    if cfg.pulse_kind == "tabulated":
        path = Path(cfg.source_dir) / cfg.pulse_table_path
        try:
            return interaction.PulseSpec.from_csv(path, T)
        except (OSError, ValueError, IndexError) as exc:
            raise ConfigError("pulse.table_path", f"cannot load {path}: {exc}") from None
    return interaction.PulseSpec.gaussian(cfg.pulse_c, cfg.pulse_t0, cfg.pulse_s, T)


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    spec = cfg.clock
    pulse = build_pulse(cfg)
    eng = interaction.engineer(pulse, spec, cfg.coupling(), rcond=cfg.interaction_rcond)
    E = interaction.build_error_operator(eng, spec, cfg.T)
    model = assemble(spec, cfg.hamiltonian(), np.diag(spec.omega * spec.levels), eng.G, eng.S, E, cfg.T, cfg.vqa_w)
    return Scenario(cfg, pulse, eng, model)


def optimizer_config(cfg: ScenarioConfig) -> vqa.OptimizerConfig:
    return vqa.OptimizerConfig(method=cfg.vqa_optimizer, max_iters=cfg.vqa_max_iters, restarts=cfg.vqa_restarts,
                               seed=cfg.vqa_seed, init_scale=cfg.vqa_init_scale, tolerance=cfg.vqa_tolerance,
                               patience=cfg.vqa_patience, n_reps_c=cfg.vqa_n_reps_C, n_reps_s=cfg.vqa_n_reps_S)


def run_engineer(cfg: ScenarioConfig, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sc = build_scenario(cfg)
    dev = interaction.write_drive_csv(out / "engineered_potential.csv", sc.engineered, sc.pulse, cfg.clock,
                                      512, sc.comment)
    e_min = float(np.linalg.eigvalsh(sc.model.E_op).min())
    log.info("engineered G via %s solve; max |g_target - g_effective| on [0,T] = %.3e", sc.engineered.method, dev)
    log.info("error operator min eigenvalue %.3e", e_min)
    return {"scenario": sc, "max_deviation": dev, "error_min_eig": e_min}


def _fmt(v) -> str:
    return f"{v:.17g}" if isinstance(v, float) else str(v)


def run_optimize(cfg: ScenarioConfig, out_dir, scenario: Scenario | None = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sc = scenario or build_scenario(cfg)
    trace = vqa.optimize(sc.model, optimizer_config(cfg))
    psi = vqa.CostFunction(sc.model, cfg.vqa_n_reps_C, cfg.vqa_n_reps_S).state(trace.params.to_vector())
    var = variance(sc.model, psi)
    summary = {
        "config_hash": cfg.hash(),
        "optimizer": cfg.vqa_optimizer,
        "best_restart": trace.best.restart,
        "cost": trace.best.cost,
        "variance": var,
        "sqrt_variance": math.sqrt(var),
        "error_expectation": error_expectation(sc.model, psi),
        "T2_variance": sc.model.T**2 * var,
        "iterations": trace.best.iterations,
        "cost_evaluations": trace.best.n_evals,
        "stop_reason": trace.best.stop_reason,
    }
    trace.write_csv(out / "trace.csv", sc.comment)
    write_state(out / "psi.state", psi)
    (out / "summary.txt").write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in summary.items()))
    log.info("sqrt(Var) = %.4g, T^2 Var = %.4g, <E> = %.4g", summary["sqrt_variance"], summary["T2_variance"],
             summary["error_expectation"])
    return {"scenario": sc, "trace": trace, "psi": psi, "summary": summary}


def _initial_system_state(dim: int) -> np.ndarray:
    phi = np.zeros(dim, dtype=complex)
    phi[0] = 1.0
    return phi


def run_verify(cfg: ScenarioConfig, out_dir, state_file=None, scenario: Scenario | None = None) -> dict:
    """Fidelity of the relational trajectory against the driven reference from |0>.

    The ansatz conditions to |0> at t=0, so both trajectories share their start.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sc = scenario or build_scenario(cfg)
    psi = read_state(state_file or out / "psi.state", sc.model.H_global.shape[0])
    phi0 = _initial_system_state(sc.model.dim_sys)
    times = np.linspace(0.0, cfg.clock.period, cfg.output_grid_points)
    pulse = None if cfg.pulse_kind == "zero" else sc.pulse
    report = dynamics.compare(sc.model, psi, pulse, phi0, times)
    report.write_csv(out / "fidelity.csv", sc.comment)
    min_f = report.min_fidelity(cfg.T)
    print(f"min F on [0, T] = {min_f:.6f}")
    return {"scenario": sc, "report": report, "min_fidelity": min_f, "passed": min_f >= cfg.verify_min_fidelity}


def run_sample(cfg: ScenarioConfig, out_dir, state_file=None, scenario: Scenario | None = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sc = scenario or build_scenario(cfg)
    psi = read_state(state_file or out / "psi.state", sc.model.H_global.shape[0])
    reports = sampler.sweep_tau(psi, cfg.clock, cfg.taus(), cfg.sampling_shots, cfg.sampling_seed)
    sampler.write_histogram_csv(out / "histogram.csv", reports, sc.comment)
    pvals = [r.chi2_pvalue() for r in reports]
    for r, p in zip(reports, pvals):
        log.info("tau = %.6g: chi-square p-value %.4g", r.tau, p)
    return {"scenario": sc, "reports": reports, "pvalues": pvals}


def run_all(cfg: ScenarioConfig, out_dir) -> dict:
    eng = run_engineer(cfg, out_dir)
    sc = eng["scenario"]
    opt = run_optimize(cfg, out_dir, sc)
    ver = run_verify(cfg, out_dir, scenario=sc)
    smp = run_sample(cfg, out_dir, scenario=sc)
    return {"engineer": eng, "optimize": opt, "verify": ver, "sample": smp}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relaclock", description="Relational-time clock pipeline.")
    p.add_argument("command", choices=["engineer", "optimize", "verify", "sample", "run-all"])
    p.add_argument("--config", required=True, help="scenario file (section.key = value lines)")
    p.add_argument("--out-dir", help="output directory (default: output.dir from the config)")
    p.add_argument("--seed", type=int, help="override both the optimizer and the sampling seed")
    p.add_argument("--state", help="state file for verify/sample (default: <out-dir>/psi.state)")
    p.add_argument("--strict", action="store_true", help="verify: exit 4 when min F on [0,T] misses the threshold")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out_dir = Path(args.out_dir or Path(cfg.source_dir) / cfg.output_dir)
        if args.command == "engineer":
            res = run_engineer(cfg, out_dir)
            print(f"max |g_target - g_effective| on [0, T] = {res['max_deviation']:.3e}")
        elif args.command == "optimize":
            res = run_optimize(cfg, out_dir)
            print(f"sqrt(Var) = {res['summary']['sqrt_variance']:.6f}")
        elif args.command == "verify":
            res = run_verify(cfg, out_dir, args.state)
            if args.strict and not res["passed"]:
                print(f"min F below {cfg.verify_min_fidelity}", file=sys.stderr)
                return EXIT_THRESHOLD
        elif args.command == "sample":
            res = run_sample(cfg, out_dir, args.state)
            print("chi-square p-values: " + ", ".join(f"{p:.4g}" for p in res["pvalues"]))
        else:
            res = run_all(cfg, out_dir)
            if args.strict and not res["verify"]["passed"]:
                return EXIT_THRESHOLD
    except (ConfigError, StateFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, NotPositiveDefiniteError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

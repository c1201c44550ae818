"""Scenario runner.

Subcommands: ``run`` (solve and write CSV tables), ``classify`` (print the
detected two-level class), ``compare`` (Frobenius distance of two propagator
files), ``report`` (run plus rendered figures). Exit codes: 0 success,
1 configuration error, 2 numerical failure (failure name on stderr).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import csvio, expansion, oracle, oscillator, stark, twolevel
from .config import (RunConfig, complex_profile, load_config, scenario_expr,
                     scenario_float)
from .errors import ConfigError, SolverError
from .exprparse import ExprSyntaxError
from .oracle import OracleConfig
from .quadrature import cumulative_integral, fro_norms
from .signals import HamiltonianSignal, PropagatorTable


@dataclass
class Scenario:
    kind: str
    signal: HamiltonianSignal
    coeffs: twolevel.TwoLevelCoeffs | None = None
    oscillator: oscillator.OscillatorScenario | None = None
    stark: stark.StarkScenario | None = None


def build_scenario(cfg: RunConfig) -> Scenario:
    if cfg.kind == "oscillator":
        omega = scenario_expr(cfg, "omega")
        s = oscillator.OscillatorScenario(
            omega, scenario_float(cfg, "x0", 1.0), scenario_float(cfg, "v0", 0.0),
            cfg.tau, omega.derivative())
        return Scenario("oscillator", oscillator.hamiltonian_signal(s, cfg.steps),
                        coeffs=oscillator.to_twolevel(s, cfg.steps), oscillator=s)

    if cfg.kind == "generic2":
        if cfg.scenario.get("random", "").lower() in ("1", "true", "yes"):
            coeffs = twolevel.random_smooth_coeffs(cfg.seed or 0, cfg.tau, cfg.steps)
            return Scenario("generic2", coeffs.to_signal(), coeffs=coeffs)
        profiles = {name: complex_profile(cfg, name) for name in ("a", "b", "c")}

        def value(ts):
            ts = np.asarray(ts, dtype=float)
            out = np.empty((len(ts), 2, 2), dtype=complex)
            out[:, 0, 0] = profiles["a"][0](ts)
            out[:, 0, 1] = profiles["b"][0](ts)
            out[:, 1, 0] = profiles["c"][0](ts)
            out[:, 1, 1] = -out[:, 0, 0]
            return out

        def deriv(ts):
            ts = np.asarray(ts, dtype=float)
            out = np.empty((len(ts), 2, 2), dtype=complex)
            out[:, 0, 0] = profiles["a"][1](ts)
            out[:, 0, 1] = profiles["b"][1](ts)
            out[:, 1, 0] = profiles["c"][1](ts)
            out[:, 1, 1] = -out[:, 0, 0]
            return out

        signal = HamiltonianSignal.from_function(2, cfg.tau, cfg.steps, value, deriv)
        grid = signal.grid
        coeffs = twolevel.TwoLevelCoeffs(
            grid, profiles["a"][0](grid), profiles["b"][0](grid),
            profiles["c"][0](grid), profiles["a"][1](grid),
            profiles["b"][1](grid), profiles["c"][1](grid))
        return Scenario("generic2", signal, coeffs=coeffs)

    if cfg.kind == "stark":
        r = scenario_expr(cfg, "r")
        theta = scenario_expr(cfg, "theta")
        s = stark.StarkScenario(scenario_float(cfg, "lambda", 1.0), r, theta,
                                cfg.tau, theta.derivative())
        return Scenario("stark", stark.hamiltonian_signal(s, cfg.steps), stark=s)

    if cfg.kind == "generic-matrix-tabulated":
        path = cfg.scenario.get("table")
        if path is None:
            raise ConfigError("[scenario] needs key 'table'")
        signal = csvio.read_hamiltonian_table(Path(path))
        return Scenario("generic-matrix-tabulated", signal)

    raise ConfigError(f"unknown scenario kind {cfg.kind!r}")


@dataclass
class RunResult:
    table: PropagatorTable
    status: str
    residuals: list[float]


def run_method(cfg: RunConfig, scen: Scenario) -> RunResult:
    if cfg.method == "oracle":
        table = oracle.propagate(scen.signal, OracleConfig(cfg.substeps))
        return RunResult(table, "oracle", [])

    if cfg.method == "adiabatic":
        tol = cfg.tolerances
        exp = expansion.expand(scen.signal,
                               eps_trunc=tol.get("eps_trunc"),
                               L_max=cfg.order,
                               eps_cycle=tol.get("eps_cycle"),
                               eps_deg=tol.get("eps_deg", 1e-8))
        return RunResult(exp.assemble(), str(exp.status), exp.residual_norms)

    if cfg.method == "modified":
        if scen.coeffs is None:
            raise ConfigError("modified expansion needs two-level coefficients")
        tag = twolevel.classify(scen.coeffs)
        if tag.kind != "class3":
            raise ConfigError(f"modified expansion needs a Class-3 input, got {tag}")
        mod = twolevel.modified_expansion(scen.coeffs, max(1, cfg.order))
        return RunResult(mod.assemble(), f"Modified({len(mod.factors)})",
                         mod.h_sups)

    if cfg.method == "dyson":
        table = oscillator.propagator(scen.oscillator, "dyson", cfg.steps,
                                      order=cfg.order)
        return RunResult(table, f"Dyson({cfg.order})", [])

    if cfg.method == "exact-class":
        if scen.kind == "stark":
            s = scen.stark
            grid = np.zeros(1)
            r0, _ = s.field(grid)
            thd0 = s.angle_rate(grid, cfg.tau / cfg.steps)
            c = scenario_float(cfg, "exact_c", float(thd0[0] / r0[0] ** 2))
            table = stark.exact_solve(s, c, cfg.steps,
                                      cfg.tolerances.get("eps_exact", 1e-10))
            return RunResult(table, f"ExactStark(c={c:g})", [])
        tag = twolevel.classify(scen.coeffs)
        if tag.kind not in ("class1", "class2"):
            raise ConfigError(
                f"exact-class needs a Class-1/2 input, got {tag}; "
                "Class-3 inputs use the modified expansion")
        two = twolevel.two_factor_expansion(scen.coeffs)
        return RunResult(two.assemble(), f"TwoFactor({tag})",
                         [two.h1_sup, two.h2_sup])

    raise ConfigError(f"unknown method {cfg.method!r}")


def _det_check(table: PropagatorTable, signal: HamiltonianSignal) -> None:
    """Liouville identity gate: det U(t) = exp(-i int tr H)."""
    Hs = signal.sample()
    tr = Hs[:, np.arange(signal.dim), np.arange(signal.dim)].sum(axis=1)
    expected = np.exp(-1j * cumulative_integral(tr, signal.dt))
    defect = float(np.max(np.abs(np.linalg.det(table.values) - expected)))
    tol = 1e-8 * (1.0 + float(np.max(np.abs(expected))))
    if defect > tol:
        from .errors import ConsistencyError
        raise ConsistencyError(
            f"determinant identity violated ({defect:.3e} > {tol:.3e})")


def _summary(status: str, sup_err, final_err, residuals) -> str:
    fmt = lambda x: "n/a" if x is None else f"{x:.6e}"
    res = "[" + ", ".join(f"{r:.3e}" for r in residuals) + "]"
    return (f"status={status} sup_error={fmt(sup_err)} "
            f"final_error={fmt(final_err)} residuals={res}")


def cmd_run(args, render: bool = False) -> int:
    overrides = {"method": args.method, "steps": args.steps,
                 "out": args.out, "seed": args.seed}
    cfg = load_config(args.config, {k: v for k, v in overrides.items() if v})
    if args.seed is not None:
        cfg.seed = args.seed
    scen = build_scenario(cfg)
    result = run_method(cfg, scen)
    _det_check(result.table, scen.signal)

    extra = {}
    if scen.kind == "oscillator":
        psi0 = np.array([scen.oscillator.x0, scen.oscillator.v0], dtype=complex)
        traj = np.einsum("kij,j->ki", result.table.values, psi0)
        extra = {"x": traj[:, 0].real, "v": traj[:, 1].real}

    cfg.propagator_path.parent.mkdir(parents=True, exist_ok=True)
    csvio.write_propagator(cfg.propagator_path, result.table, extra)

    sup_err = final_err = None
    cmp_result = None
    if cfg.method != "oracle":
        ref = oracle.propagate(scen.signal, OracleConfig(cfg.substeps))
        cmp_result = oracle.compare(result.table, ref)
        sup_err, final_err = cmp_result.sup_fro, cmp_result.final_fro
        csvio.write_comparison(cfg.comparison_path, result.table.grid,
                               cmp_result.per_t)

    print(_summary(result.status, sup_err, final_err, result.residuals))

    if render:
        from . import plotting
        figdir = Path(args.figdir) if args.figdir else cfg.propagator_path.parent
        figdir.mkdir(parents=True, exist_ok=True)
        stem = cfg.propagator_path.stem
        title = f"{scen.kind} / {cfg.method}"
        written = [plotting.propagator_figure(
            figdir / f"{stem}_propagator.png", result.table, title)]
        if cmp_result is not None:
            written.append(plotting.error_figure(
                figdir / f"{stem}_error.png", result.table.grid,
                cmp_result.per_t, title))
        if result.residuals:
            written.append(plotting.residual_figure(
                figdir / f"{stem}_residuals.png", result.residuals, title))
        if scen.kind == "oscillator":
            traj = np.stack([result.table.grid, extra["x"], extra["v"]], axis=1)
            ref_traj = None
            if cfg.method != "oracle":
                ref_traj = oscillator.solve_trajectory(
                    scen.oscillator, "oracle", cfg.steps)
            written.append(plotting.trajectory_figure(
                figdir / f"{stem}_trajectory.png", traj, ref_traj, title))
        for p in written:
            print(f"figure: {p}")
    return 0


def cmd_classify(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed} if args.seed else {})
    if cfg.kind not in ("generic2", "oscillator"):
        raise ConfigError("classify needs a two-level scenario")
    scen = build_scenario(cfg)
    print(str(twolevel.classify(scen.coeffs,
                                cfg.tolerances.get("eps_class", 1e-8))))
    return 0


def cmd_compare(args) -> int:
    ua = csvio.read_propagator(Path(args.file_a))
    ub = csvio.read_propagator(Path(args.file_b))
    result = oracle.compare(ua, ub)
    if args.out:
        csvio.write_comparison(Path(args.out), ua.grid, result.per_t)
    print(f"sup_fro={result.sup_fro:.6e} final_fro={result.final_fro:.6e}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adiaprod",
        description="Evolution operators via adiabatic product expansions")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p):
        p.add_argument("--config", required=True, help="scenario config file")
        p.add_argument("--out", help="propagator CSV path")
        p.add_argument("--method", help="override [method] name (e.g. adiabatic:2)")
        p.add_argument("--steps", type=int, help="override grid steps")
        p.add_argument("--seed", type=int,
                       help="seed for randomized test scenarios")

    run_p = sub.add_parser("run", help="solve a scenario and write CSV tables")
    add_run_flags(run_p)

    rep_p = sub.add_parser("report",
                           help="run and render figures next to the CSV output")
    add_run_flags(rep_p)
    rep_p.add_argument("--figdir", help="directory for figures")

    cls_p = sub.add_parser("classify", help="print the detected two-level class")
    cls_p.add_argument("--config", required=True)
    cls_p.add_argument("--seed", type=int)

    cmp_p = sub.add_parser("compare", help="compare two propagator CSV files")
    cmp_p.add_argument("file_a")
    cmp_p.add_argument("file_b")
    cmp_p.add_argument("--out", help="write the per-t error table here")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "report":
            return cmd_run(args, render=True)
        if args.command == "classify":
            return cmd_classify(args)
        if args.command == "compare":
            return cmd_compare(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ExprSyntaxError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

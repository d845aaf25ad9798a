"""Configuration-driven experiment runner.

Subcommands: fixed-point, sweep, evolve, toy, report.  Every run writes
one directory holding config.echo (the input byte for byte), the data
files of the run, and summary.json with sorted keys, so identical
configs reproduce identical files.  Exit code 0 means every check in
the summary passed.

Heavy imports happen inside the command handlers so that --threads can
cap the BLAS pools before numpy loads.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abplab",
        description="Numerical laboratory for adaptively biased sampling dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_config in (
        ("fixed-point", _run_fixed_point, True),
        ("sweep", _run_sweep, True),
        ("evolve", _run_evolve, True),
        ("toy", _run_toy, True),
        ("report", _run_report, False),
    ):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=needs_config, help="TOML experiment file")
        cmd.add_argument("--out", default=None, help="run output directory")
        cmd.add_argument("--seed", type=int, default=None, help="override particles.seed")
        cmd.add_argument("--threads", type=int, default=None, help="cap BLAS thread pools")
        cmd.set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(max(1, args.threads))
    try:
        return args.handler(args)
    except Exception as exc:  # config and numerics failures exit nonzero
        from .exceptions import ConfigError

        kind = "config error" if isinstance(exc, ConfigError) else type(exc).__name__
        print(f"{kind}: {exc}", file=sys.stderr)
        return 2


def _load(args):
    from .config import load_config

    config = load_config(args.config)
    if args.seed is not None:
        from dataclasses import replace

        config.particles = replace(config.particles, seed=args.seed)
        # keep the summary's effective config honest (the echo stays raw)
        config.parsed.setdefault("particles", {})["seed"] = args.seed
    out_dir = Path(args.out) if args.out else Path(config.output_dir)
    return config, out_dir


def _write_common(out_dir: Path, config, summary) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.echo").write_text(config.raw_text, encoding="utf-8")
    (out_dir / "summary.json").write_text(summary.to_json(), encoding="utf-8")


def _finish(args, config, summary, out_dir: Path) -> int:
    _write_common(out_dir, config, summary)
    for check in summary.checks:
        state = "pass" if check["passed"] else "FAIL"
        print(f"[{state}] {check['name']} (tolerance {check['tolerance']}, "
              f"observed {check['observed']})")
    for line in summary.timing_lines():
        print(line)
    print(f"outputs in {out_dir}")
    return 0 if summary.all_passed else 1


def _solver_kwargs(config) -> dict:
    return {
        "tol": config.solver.tol,
        "max_iter": config.solver.max_iter,
        "damping": config.solver.damping,
    }


def _write_table(path: Path, columns, rows) -> None:
    from .trace import format_float

    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for col in columns:
                v = row[col]
                cells.append(str(v) if isinstance(v, (int, bool)) else format_float(v))
            fh.write(",".join(cells) + "\n")


def cmd_fixed_point(config, out_dir=None):
    """Solve the self-consistency equation and persist the result."""
    from .config import RunSummary
    from .density import save_density
    from .exceptions import ConfigError
    from .equilibria import free_energy, fixed_point_solve

    if config.params.epsilon <= 0.0:
        raise ConfigError("fixed-point needs params.epsilon > 0")
    out_dir = Path(out_dir) if out_dir else Path(config.output_dir)
    potential = config.build_potential()
    summary = RunSummary(config=config.parsed)
    t0 = time.perf_counter()
    rho, report = fixed_point_solve(potential, config.params, **_solver_kwargs(config))
    summary.timings["solve"] = time.perf_counter() - t0
    out_dir.mkdir(parents=True, exist_ok=True)
    save_density(out_dir / "rho_star.csv", rho)
    summary.diagnostics["solver"] = report.to_dict()
    summary.diagnostics["free_energy"] = free_energy(rho, potential, config.params)
    summary.add_check(
        "fixed_point_converged",
        report.converged,
        config.solver.tol,
        report.final_residual_sup,
    )
    return summary


def _run_fixed_point(args) -> int:
    config, out_dir = _load(args)
    summary = cmd_fixed_point(config, out_dir)
    return _finish(args, config, summary, out_dir)


def cmd_sweep(config, axis=None, values=None, out_dir=None):
    """Solve along a parameter axis and fit the log-log gap slope."""
    import numpy as np

    from .config import RunSummary
    from .density import distances, save_density
    from .exceptions import ConfigError
    from .equilibria import (
        BiasParams,
        closed_form_minimizer,
        fixed_point_solve,
        strong_bias_entropy_gap,
    )
    from .schedules import fit_exponential_rate

    if axis is None or values is None:
        if config.sweep is None:
            raise ConfigError("missing required key 'sweep.axis'")
        axis, values = config.sweep.axis, config.sweep.values
    if axis not in ("epsilon", "alpha"):
        raise ConfigError(f"sweep axis must be epsilon or alpha, got '{axis}'")
    values = [float(v) for v in values]
    if sorted(values) != values or any(v <= 0 for v in values):
        raise ConfigError("sweep values must be sorted ascending and positive")

    out_dir = Path(out_dir) if out_dir else Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    potential = config.build_potential()
    p = config.params
    summary = RunSummary(config=config.parsed)
    rows = []
    complete = True
    t0 = time.perf_counter()
    for i, value in enumerate(values):
        point_dir = out_dir / f"point_{i:02d}"
        point_dir.mkdir(parents=True, exist_ok=True)
        if axis == "epsilon":
            pv = BiasParams(p.alpha, p.beta, float(value), p.m)
            rho, report = fixed_point_solve(potential, pv, **_solver_kwargs(config))
            save_density(point_dir / "rho_star.csv", rho)
            limit = closed_form_minimizer(potential, BiasParams(p.alpha, p.beta, 0.0, p.m))
            d = distances(rho, limit)
            rows.append({
                "value": value, "sup": d.sup, "h1": d.h1, "tv": d.tv,
                "iterations": report.iterations, "converged": int(report.converged),
            })
            ok = report.converged
        else:
            pv = BiasParams(float(value), p.beta, p.epsilon, p.m)
            rho, report = fixed_point_solve(potential, pv, **_solver_kwargs(config))
            save_density(point_dir / "rho_star.csv", rho)
            gap = strong_bias_entropy_gap(potential, pv, **_solver_kwargs(config))
            rows.append({
                "value": value, "entropy_gap": gap,
                "iterations": report.iterations, "converged": int(report.converged),
            })
            ok = report.converged
        if not ok:
            complete = False
            break
    summary.timings["sweep"] = time.perf_counter() - t0

    columns = list(rows[0].keys()) if rows else ["value"]
    _write_table(out_dir / "table.csv", columns, rows)
    gap_key = "sup" if axis == "epsilon" else "entropy_gap"
    gaps = [row[gap_key] for row in rows]
    if complete and len(rows) >= 2 and all(g > 0 for g in gaps):
        xs = np.log(np.asarray(values[: len(rows)]))
        fit = fit_exponential_rate(xs, np.asarray(gaps))
        summary.rate_fits[f"log_log_{gap_key}"] = fit.to_dict()
        if axis == "epsilon":
            h1s = [row["h1"] for row in rows]
            summary.rate_fits["log_log_h1"] = fit_exponential_rate(
                xs, np.asarray(h1s)
            ).to_dict()
    summary.diagnostics["points_completed"] = len(rows)
    summary.diagnostics["axis"] = axis
    summary.add_check(
        "sweep_complete", complete, config.solver.tol, f"{len(rows)}/{len(values)} points"
    )
    return summary


def _run_sweep(args) -> int:
    config, out_dir = _load(args)
    summary = cmd_sweep(config, out_dir=out_dir)
    return _finish(args, config, summary, out_dir)


def cmd_evolve(config, out_dir=None):
    """Run the configured flow and persist trace plus terminal state."""
    import numpy as np

    from .config import RunSummary
    from .density import save_density, save_grid_values
    from .dynamics import OverdampedState, evolve, kinetic_equilibrium
    from .exceptions import ConfigError, FitError, FlowAborted
    from .equilibria import BiasParams
    from .density import GridDensity
    from .schedules import burn_in_time, fit_exponential_rate

    out_dir = Path(out_dir) if out_dir else Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    potential = config.build_potential()
    p = config.params
    dyn = config.dynamics
    summary = RunSummary(config=config.parsed)
    aborted = None
    t0 = time.perf_counter()

    if dyn.integrator.startswith("grid"):
        if dyn.integrator == "grid-kinetic":
            if potential.grid.d != 1:
                raise ConfigError("grid-kinetic runs are one-dimensional")
            unbiased = BiasParams(0.0, p.beta, p.epsilon, p.m)
            initial = kinetic_equilibrium(
                potential, unbiased, n_v=dyn.n_velocity, v_max=dyn.v_max
            )
        else:
            initial = OverdampedState(GridDensity.uniform(potential.grid))
        try:
            final, trace = evolve(
                initial, potential, p, dyn.t_end, dt=dyn.dt,
                schedule=config.schedule, record_every=dyn.record_every,
                target_solver=_solver_kwargs(config), friction=dyn.friction,
            )
        except FlowAborted as exc:
            final, trace, aborted = exc.state, exc.trace, exc
        if dyn.integrator == "grid-kinetic":
            save_grid_values(out_dir / "phase_density.csv", final.values)
            save_density(out_dir / "density.csv", final.x_marginal())
        else:
            save_density(out_dir / "density.csv", final.rho)
        fit_column, fit_positive = "sandwich_middle", True
    else:
        from .particles import (
            kde_marginal,
            maxwell_velocities,
            particle_evolve,
            save_snapshot,
            uniform_ensemble,
        )

        seed = config.particles.seed
        n = config.particles.n
        d = potential.grid.d
        ens = uniform_ensemble(n, d, seed)
        if dyn.integrator == "particles-kinetic":
            vel = maxwell_velocities(n, d, p.beta, seed)
            ens = type(ens)(positions=ens.positions, velocities=vel, seed=seed)
        try:
            final, trace = particle_evolve(
                ens, potential, p, dyn.t_end, dt=dyn.dt or 1e-3,
                schedule=config.schedule, record_every=dyn.record_every,
                friction=dyn.friction, target_solver=_solver_kwargs(config),
            )
        except FlowAborted as exc:
            final, trace, aborted = exc.state, exc.trace, exc
        save_snapshot(out_dir / "snapshot.csv", final)
        if p.epsilon > 0.0:
            marg_grid = potential.grid.marginal_grid()
            save_density(
                out_dir / "density.csv", kde_marginal(final, p.kernel(), marg_grid)
            )
        fit_column, fit_positive = "tv_kde", True
    summary.timings["evolve"] = time.perf_counter() - t0

    trace.to_csv(out_dir / "trace.csv")

    ts = trace.column("t")
    vals = trace.column(fit_column)
    lo = burn_in_time(dyn.t_end)
    mask = (ts >= lo) & (vals > 0) & np.isfinite(vals)
    if mask.sum() >= 2:
        try:
            fit = fit_exponential_rate(ts[mask], vals[mask])
            summary.rate_fits[fit_column] = fit.to_dict()
        except FitError:
            pass
    if dyn.integrator.startswith("grid"):
        lower = trace.column("sandwich_lower")
        middle = trace.column("sandwich_middle")
        upper = trace.column("sandwich_upper")
        violation = float(max((lower - middle).max(), (middle - upper).max(), 0.0))
        summary.diagnostics["sandwich_max_violation"] = violation
        summary.add_check("sandwich_ordering", violation <= 1e-9, 1e-9, violation)
    summary.diagnostics["t_final"] = float(ts[-1]) if len(ts) else 0.0
    summary.diagnostics["rows_recorded"] = len(ts)
    if aborted is not None:
        summary.diagnostics["abort_reason"] = str(aborted.cause)
    summary.add_check(
        "completed",
        aborted is None,
        dyn.t_end,
        float(ts[-1]) if len(ts) else 0.0,
    )
    return summary


def _run_evolve(args) -> int:
    config, out_dir = _load(args)
    summary = cmd_evolve(config, out_dir)
    return _finish(args, config, summary, out_dir)


def cmd_toy(config, out_dir=None):
    """Evaluate the solvable Gaussian model and its limit tables."""
    from .config import RunSummary
    from .equilibria import GaussianModel

    out_dir = Path(out_dir) if out_dir else Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    toy = config.toy
    summary = RunSummary(config=config.parsed)
    t0 = time.perf_counter()

    model = GaussianModel(toy.sigma0_sq, toy.alpha, toy.epsilon)
    sigma_sq = model.variance()
    it_var, it_steps, it_ok = model.iterate(1.0 / toy.sigma0_sq)
    summary.diagnostics["sigma_sq"] = sigma_sq
    summary.diagnostics["iteration"] = {
        "value": it_var, "steps": it_steps, "converged": it_ok,
    }

    eps_rows = []
    target = (toy.alpha + 1.0) * toy.sigma0_sq
    for eps in toy.epsilon_grid:
        s = GaussianModel(toy.sigma0_sq, toy.alpha, eps).variance()
        eps_rows.append({"epsilon": eps, "sigma_sq": s, "ratio_to_limit": s / target})
    _write_table(out_dir / "toy_epsilon_table.csv",
                 ["epsilon", "sigma_sq", "ratio_to_limit"], eps_rows)

    alpha_rows = []
    for a in toy.alpha_grid:
        s = GaussianModel(toy.sigma0_sq, a, toy.epsilon).variance()
        alpha_rows.append({
            "alpha": a, "sigma_sq": s,
            "ratio_to_limit": s / ((a + 1.0) * toy.sigma0_sq),
        })
    _write_table(out_dir / "toy_alpha_table.csv",
                 ["alpha", "sigma_sq", "ratio_to_limit"], alpha_rows)
    summary.timings["toy"] = time.perf_counter() - t0

    summary.add_check("root_exists", sigma_sq > 0.0, 0.0, sigma_sq)
    gap = abs(it_var - sigma_sq) if it_ok else 0.0
    summary.add_check("iteration_consistent", gap <= 1e-9, 1e-9, gap)
    return summary


def _run_toy(args) -> int:
    config, out_dir = _load(args)
    summary = cmd_toy(config, out_dir)
    return _finish(args, config, summary, out_dir)


def _run_report(args) -> int:
    """Digest an existing run directory."""
    import json

    run_dir = Path(args.out) if args.out else None
    if run_dir is None and args.config:
        run_dir = Path(args.config)
    if run_dir is None or not (run_dir / "summary.json").exists():
        print("report needs --out pointing at a run directory", file=sys.stderr)
        return 2
    stored = json.loads((run_dir / "summary.json").read_text(encoding="utf-8"))
    print(f"run directory: {run_dir}")
    for check in stored.get("checks", []):
        state = "pass" if check["passed"] else "FAIL"
        print(f"[{state}] {check['name']} (tolerance {check['tolerance']}, "
              f"observed {check['observed']})")
    for name, fit in stored.get("rate_fits", {}).items():
        print(f"rate fit {name}: slope {fit['slope']:.6g}, r^2 {fit['r_squared']:.6g}")
    trace_path = run_dir / "trace.csv"
    if trace_path.exists():
        from .trace import DiagnosticsTrace

        trace = DiagnosticsTrace.from_csv(trace_path)
        if trace.rows:
            print(f"trace: {len(trace.rows)} rows, final t = {trace.last()['t']!r}")
        else:
            print("trace: 0 rows")
    return 0 if stored.get("all_passed", False) else 1


if __name__ == "__main__":
    sys.exit(main())

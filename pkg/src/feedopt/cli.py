"""Command line entry points.

Four subcommands, all driven by one INI config file:

* ``run-scenario``    -- full demand-response suite; writes per-run
  trajectory CSVs, ``suite_summary.csv`` and an instance dump.
* ``validate-bounds`` -- Monte Carlo dominance checks of the envelopes,
  the moment identity and the noise certificates; exit code 2 when any
  check fails.
* ``bound-curve``     -- exports the expectation, asymptotic and
  high-probability envelopes as CSV curves.
* ``gp-demo``         -- fits the per-coordinate cost learners on the
  scenario's initial costs and reports gradient accuracy on a grid
  (``--config`` optional, built-in defaults apply).

Exit codes: 0 success, 1 usage or configuration problem, 2 a validation
check failed, 3 unexpected runtime or numerical failure.  All outputs are
deterministic in (config, seed) and independent of ``--jobs``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import bounds, scenario, validation
from .config import (
    ConfigError,
    ValidationSettings,
    default_ini,
    dump_config,
    load_config,
    with_seed,
)

__all__ = ["main"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags, which this tool reserves
    # for failed validation checks; surface usage problems as exit 1 instead
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="feedopt",
        description="online feedback optimization: simulate, validate, export envelopes",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, do_help in (
        ("run-scenario", "run the full demand-response suite"),
        ("validate-bounds", "Monte Carlo checks of envelopes and certificates"),
        ("bound-curve", "export envelope curves as CSV"),
        ("gp-demo", "fit the cost learners once and report gradient accuracy"),
        ("print-config", "print the built-in default configuration"),
    ):
        cmd = sub.add_parser(name, help=do_help)
        if name == "print-config":
            continue
        cmd.add_argument(
            "--config",
            required=name != "gp-demo",
            default=None,
            help="INI configuration file" + (" (defaults apply)" if name == "gp-demo" else ""),
        )
        cmd.add_argument("--out", required=True, help="output directory")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seeds")
        cmd.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
        cmd.add_argument(
            "--overwrite", action="store_true",
            help="allow replacing files that already exist in the output directory",
        )
    return parser


def _prepare_out(out_dir: str, filenames, overwrite: bool) -> None:
    os.makedirs(out_dir, exist_ok=True)
    if overwrite:
        return
    clashes = [f for f in filenames if os.path.exists(os.path.join(out_dir, f))]
    if clashes:
        raise UsageError(
            "refusing to overwrite existing files (pass --overwrite): "
            + ", ".join(sorted(clashes))
        )


def _echo_config(out_dir: str, scen, val) -> None:
    with open(os.path.join(out_dir, "config_echo.ini"), "w", encoding="utf-8") as fh:
        fh.write(dump_config(scen, val))


def _traj_name(p: float, mode: str, exp_index: int) -> str:
    return f"traj_p{format(p, 'g')}_{mode}_e{exp_index}.csv"


def _check_step_size(alpha: float, prob, n_steps: int) -> float:
    _, curv_l = prob.curvature_all()
    l_sup = float(curv_l[1 : n_steps + 1].max())
    if not alpha < 2.0 / l_sup:
        raise ConfigError(
            f"step size alpha={alpha:.6g} violates the contraction condition "
            f"alpha < 2/L = {2.0 / l_sup:.6g} for this instance"
        )
    return l_sup


def _validation_setup(scen, val):
    """Instance and algorithm config for validate-bounds / bound-curve."""
    if val.instance == "synthetic":
        prob, acfg = validation.synthetic_instance(
            n_inputs=val.n_inputs,
            n_steps=val.n_steps,
            drift_amplitude=val.drift,
            error_scale=val.error_scale,
            p=val.p,
            seed=val.seed,
        )
        if val.alpha is not None:
            acfg = replace(acfg, alpha=val.alpha)
        n_steps = val.n_steps
    else:
        prob = scenario.build_scenario(scen)
        base = scenario.algo_config(scen, val.p)
        acfg = replace(base, alpha=val.alpha if val.alpha is not None else scen.alpha)
        n_steps = min(val.n_steps, scen.horizon)
    _check_step_size(acfg.alpha, prob, n_steps)
    return prob, acfg, n_steps


# -- subcommands ----------------------------------------------------------------


def _cmd_run_scenario(args) -> int:
    scen_file, val = load_config(args.config)
    scen, _ = with_seed(scen_file, val, args.seed)
    names = ["config_echo.ini", "scenario_instance.json", "suite_summary.csv"]
    names += [
        _traj_name(p, mode, e)
        for p in scen.p_values
        for mode in scen.modes
        for e in range(scen.n_experiments)
    ]
    _prepare_out(args.out, names, args.overwrite)
    # the echo reflects the file as parsed; a --seed override is runtime state
    _echo_config(args.out, scen_file, val)

    prob = scenario.build_scenario(scen)

    def sink(p, mode, e, traj):
        traj.to_csv(os.path.join(args.out, _traj_name(p, mode, e)))

    result = scenario.run_suite(scen, prob=prob, n_jobs=max(1, args.jobs), trajectory_sink=sink)
    result.to_csv(os.path.join(args.out, "suite_summary.csv"))
    payload = {"seed": scen.seed, "horizon": scen.horizon, "problem": prob.to_dict()}
    with open(os.path.join(args.out, "scenario_instance.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")
    for p in scen.p_values:
        for mode in scen.modes:
            print(
                f"p={format(p, 'g')} mode={mode}: "
                f"final-500-step mean error {result.plateau(p, mode):.6g}"
            )
    print(f"wrote {len(names)} files to {args.out}")
    return 0


def _cmd_validate_bounds(args) -> int:
    scen, val = load_config(args.config)
    scen, val = with_seed(scen, val, args.seed)
    _prepare_out(args.out, ["config_echo.ini", "validation_report.csv"], args.overwrite)
    _echo_config(args.out, scen, val)
    prob, acfg, n_steps = _validation_setup(scen, val)
    jobs = max(1, args.jobs)

    report = validation.validate_expectation_bound(
        prob, acfg, n_steps, val.n_trials_mean, seed=val.seed, n_jobs=jobs
    )
    report.extend(
        validation.validate_hp_bound(
            prob, acfg, n_steps, val.n_trials_hp, val.deltas, val.check_times,
            seed=val.seed + 1, n_jobs=jobs,
        )
    )
    report.extend(
        validation.validate_moment_identity(
            val.moment_zetas, val.moment_ps, val.moment_ts, val.moment_ks,
            n_samples=val.moment_samples, seed=val.seed + 2,
        )
    )
    report.extend(
        validation.validate_sampler_declarations(
            n_samples=val.sampler_samples, seed=val.seed + 3
        )
    )
    report.extend(
        validation.validate_closure_ops(
            dim=val.closure_dim, n_samples=val.sampler_samples, seed=val.seed + 4
        )
    )
    report.to_csv(os.path.join(args.out, "validation_report.csv"))
    print(report.summary())
    return 0 if report.passed else 2


def _cmd_bound_curve(args) -> int:
    scen, val = load_config(args.config)
    scen, val = with_seed(scen, val, args.seed)
    prob, acfg, n_steps = _validation_setup(scen, val)
    ps = scen.p_values if val.instance == "scenario" else (val.p,)
    names = ["config_echo.ini"]
    for p in ps:
        ptag = format(p, "g")
        names += [f"bound_expectation_p{ptag}.csv", f"bound_asymptotic_p{ptag}.csv"]
        names += [
            f"bound_hp_p{ptag}_delta{format(d, 'g')}.csv" for d in val.deltas
        ]
    _prepare_out(args.out, names, args.overwrite)
    _echo_config(args.out, scen, val)
    for p in ps:
        ptag = format(p, "g")
        cfg_p = replace(acfg, p=p)
        inputs = bounds.bound_inputs_from_problem(prob, cfg_p, n_steps, seed=val.seed)
        bounds.expectation_bound(inputs, n_steps).to_csv(
            os.path.join(args.out, f"bound_expectation_p{ptag}.csv")
        )
        bounds.expectation_bound_asymptotic(inputs, n_steps).to_csv(
            os.path.join(args.out, f"bound_asymptotic_p{ptag}.csv")
        )
        for d in val.deltas:
            inputs_d = replace_delta(inputs, d)
            bounds.hp_bound_trajectory(inputs_d, n_steps).to_csv(
                os.path.join(args.out, f"bound_hp_p{ptag}_delta{format(d, 'g')}.csv")
            )
    print(f"wrote {len(names)} files to {args.out}")
    return 0


def replace_delta(inputs: bounds.BoundInputs, delta: float) -> bounds.BoundInputs:
    return bounds.BoundInputs(
        alpha=inputs.alpha, p=inputs.p, zeta_t=inputs.zeta_t, phi=inputs.phi,
        e_mean=inputs.e_mean, nu_e=inputs.nu_e, theta_eps=inputs.theta_eps,
        theta_xi=inputs.theta_xi, d0=inputs.d0, delta=delta,
    )


def _cmd_gp_demo(args) -> int:
    if args.config is None:
        scen, val = scenario.ScenarioConfig(), ValidationSettings()
    else:
        scen, val = load_config(args.config)
    scen, val = with_seed(scen, val, args.seed)
    _prepare_out(args.out, ["config_echo.ini", "gp_demo.csv"], args.overwrite)
    _echo_config(args.out, scen, val)
    prob = scenario.build_scenario(scen)
    rng = np.random.default_rng(np.random.SeedSequence(scen.seed, spawn_key=(2,)))
    gps = scenario.seed_cost_learners(prob, scen, rng)
    n_grid = 101
    worst_fd = 0.0
    with open(os.path.join(args.out, "gp_demo.csv"), "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["coord", "x", "true_u", "true_du", "gp_mean", "gp_var", "gp_grad"])
        for m, gp in enumerate(gps):
            lo = float(prob.boxes.lower[0, m])
            up = float(prob.boxes.upper[0, m])
            grid = np.linspace(lo, up, n_grid)
            mean = gp.posterior_mean(grid)
            var = gp.posterior_var(grid)
            grad = gp.mean_gradient(grid)
            h = (up - lo) * 1e-6
            fd = (gp.posterior_mean(grid + h) - gp.posterior_mean(grid - h)) / (2.0 * h)
            worst_fd = max(worst_fd, float(np.max(np.abs(grad - fd))))
            true_u = np.array([scenario.coordinate_cost(prob, m, g, 0) for g in grid])
            true_du = 2.0 * prob.costs.a[0, m] * grid + prob.costs.b[0, m]
            err = float(np.max(np.abs(grad - true_du)))
            print(
                f"coordinate {m}: {gp.n_obs} observations, "
                f"max |gp grad - true grad| over the box = {err:.4g}"
            )
            for i in range(n_grid):
                writer.writerow(
                    [m]
                    + [
                        format(float(v), ".15g")
                        for v in (grid[i], true_u[i], true_du[i], mean[i], var[i], grad[i])
                    ]
                )
    print(f"analytic gradient vs central difference: max deviation {worst_fd:.3g}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "print-config":
            print(default_ini(), end="")
            return 0
        if args.command == "run-scenario":
            return _cmd_run_scenario(args)
        if args.command == "validate-bounds":
            return _cmd_validate_bounds(args)
        if args.command == "bound-curve":
            return _cmd_bound_curve(args)
        if args.command == "gp-demo":
            return _cmd_gp_demo(args)
        raise UsageError(f"unknown command {args.command!r}")
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # numerical/runtime failures
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

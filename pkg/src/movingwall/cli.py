"""Command-line entry point: ``movingwall <subcommand> --config FILE``."""
from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, help_text, load_config, render_config
from .core import DomainError
from .dynamics import IntegrationError, integrate
from .experiments import (SweepSpec, convergence_study, frequency_sweep, refine_resonance,
                          validate_constant_velocity)
from .observables import density_map, trajectory_observables
from .oracles import OracleError
from .output import write_csv, write_manifest, write_pgm
from .wall import ConstantVelocity, Sinusoidal, WallError

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2

DESCRIPTION = """\
Particle in a one-dimensional box with a moving wall.

Units: hbar = m = 1 unless overridden, lengths in units of L0 and time in
units of L0^2 m / hbar.  For a proton in a 1 nm box the time unit is about
16 ns.
"""

EPILOG = "configuration keys (file format: 'key = value', [section] headers):\n" + help_text() + """

profile sections: [constant_velocity] L0, v   [exponential] L0, v (L = L0 exp(v t / L0))
                  [sinusoidal] L0, v, omega, phase (L = L0 + v sin(omega t + phase))
                  [tabulated] times, lengths   [segment.<kind>] ... plus start
task sections:    [sweep] omega_min=1 omega_max=100 n_omega=2000 samples_per_period=50
                  [resonance] state=2 omega_lo=14.5 omega_hi=15 tol=1e-4
                  [density] n_x=512 coordinate=absolute|fractional
                  [converge] basis_factors=2 tolerance_factors=10 combined=(pairs)

exit status: 0 success, 1 invalid input, 2 numerical failure.
environment: MOVINGWALL_WORKERS sets the sweep pool size (default: all CPUs).
"""


def _samples(cfg: RunConfig):
    return np.linspace(0.0, cfg.t_end, cfg.samples)


def _pop_header(prefix, m):
    return [f"{prefix}_{k}" for k in range(1, m + 1)]


def _sweep_spec(cfg: RunConfig, require_sweep=True) -> SweepSpec:
    p = cfg.profile
    if not isinstance(p, Sinusoidal):
        raise ConfigError("sweep and resonance need a [sinusoidal] profile")
    s = cfg.sweep
    if s is None and require_sweep:
        raise ConfigError("sweep needs a [sweep] section")
    kwargs = dict(amplitude=p.v, L0=p.L0, t_end=cfg.t_end, n_report=cfg.n_report,
                  n_basis=cfg.basis_size(), integrator=cfg.integrator(),
                  constants=cfg.constants)
    if s is not None:
        kwargs.update(omega_min=s.omega_min, omega_max=s.omega_max, n_omega=s.n_omega,
                      samples_per_period=s.samples_per_period)
    return SweepSpec(**kwargs)


def cmd_simulate(cfg, out):
    traj = integrate(cfg.initial(), cfg.profile, cfg.integrator(_samples(cfg)), cfg.t_end,
                     cfg.constants, cfg.min_length)
    obs = trajectory_observables(traj)
    m = min(cfg.n_report, traj.n_basis)
    path = os.path.join(out, "trajectory.csv")
    pops = obs["populations"][:, :m]
    write_csv(path, ["t", "L", "theta", "norm"] + _pop_header("pop", m) + ["x_mean", "p_mean", "kinetic"],
              [obs["t"], obs["L"], obs["theta"], obs["norm"], *pops.T,
               obs["x_mean"], obs["p_mean"], obs["kinetic"]])
    return [path], _stats(traj), float(np.max(traj.norm_drift)), {}


def _stats(traj):
    return {"steps_accepted": traj.steps_accepted, "steps_rejected": traj.steps_rejected,
            "rhs_evaluations": traj.rhs_evaluations, "n_basis": traj.n_basis}


def cmd_sweep(cfg, out, workers=None):
    spec = _sweep_spec(cfg)
    res = frequency_sweep(spec, workers)
    m = spec.n_report
    path = os.path.join(out, "sweep.csv")
    write_csv(path, ["omega"] + _pop_header("maxpop", m) + _pop_header("argmax_t", m) + ["failed"],
              [res.omegas, *res.maxima.T, *res.argmax_times.T, res.failed])
    for w, err in zip(res.omegas, res.errors):
        if err:
            print(f"warning: omega = {w!r} failed: {err}", file=sys.stderr)
    drift = float(np.nanmax(res.norm_drift)) if not res.failed.all() else float("nan")
    return [path], {"points": len(res.omegas), "failed": int(res.failed.sum())}, drift, {}


def cmd_resonance(cfg, out, workers=None):
    if cfg.resonance is None:
        raise ConfigError("resonance needs a [resonance] section")
    r = cfg.resonance
    spec = _sweep_spec(cfg, require_sweep=False)
    seeds = ()
    if cfg.sweep is not None:
        res = frequency_sweep(spec, workers)
        inside = (res.omegas >= r.omega_lo) & (res.omegas <= r.omega_hi) & ~res.failed
        seeds = [(float(w), float(v)) for w, v in zip(res.omegas[inside], res.maxima[inside, r.state - 1])]
    rep = refine_resonance(r.state, (r.omega_lo, r.omega_hi), spec, r.tol, seeds)
    path = os.path.join(out, "resonance.csv")
    write_csv(path, ["state", "omega", "max_population", "argmax_t", "bracket_lo", "bracket_hi",
                     "iterations", "unimodal"],
              [[rep.state], [rep.omega], [rep.max_population], [rep.argmax_time],
               [rep.bracket[0]], [rep.bracket[1]], [rep.iterations], [rep.unimodal]])
    evals = np.array(sorted(rep.evaluations))
    epath = os.path.join(out, "resonance_evaluations.csv")
    write_csv(epath, ["omega", f"maxpop_{rep.state}"], [evals[:, 0], evals[:, 1]])
    print(f"state {rep.state}: omega* = {rep.omega:.6f}, max population = {rep.max_population:.6f}")
    drift = rep.norm_drift
    if seeds:
        drift = max(drift, float(np.nanmax(res.norm_drift)))
    return [path, epath], {"evaluations": len(rep.evaluations)}, drift, {}


def cmd_validate(cfg, out):
    p = cfg.profile
    if not isinstance(p, ConstantVelocity):
        raise ConfigError("validate needs a [constant_velocity] profile")
    m = cfg.n_report
    val = validate_constant_velocity(p.v, p.L0, cfg.t_end, cfg.n_basis or None, cfg.samples, m,
                                     integrator=cfg.integrator(), constants=cfg.constants)
    diff = np.abs(val.integrated - val.analytic)
    path = os.path.join(out, "validate.csv")
    write_csv(path, ["t"] + _pop_header("pop", m) + _pop_header("analytic", m) + _pop_header("abs_diff", m),
              [val.times, *val.integrated.T, *val.analytic.T, *diff.T])
    print(f"max population discrepancy: {val.discrepancy:.3e}")
    return [path], {}, val.norm_drift, {"discrepancy": val.discrepancy}


def cmd_density(cfg, out):
    d = cfg.density
    n_x = d.n_x if d else 512
    coord = d.coordinate if d else "absolute"
    traj = integrate(cfg.initial(), cfg.profile, cfg.integrator(_samples(cfg)), cfg.t_end,
                     cfg.constants, cfg.min_length)
    dm = density_map(traj, n_x=n_x, coordinate=coord)
    pgm = os.path.join(out, "density.pgm")
    write_pgm(pgm, dm.values)
    csv = os.path.join(out, "density.csv")
    header = ["t", "L"] + [f"{'y' if coord == 'fractional' else 'x'}={g!r}" for g in dm.grid]
    write_csv(csv, header, [dm.times, dm.lengths, *dm.values.T])
    return [pgm, csv], _stats(traj), float(np.max(traj.norm_drift)), {}


def cmd_converge(cfg, out):
    c = cfg.converge
    bf = c.basis_factors if c else (2.0,)
    tf = c.tolerance_factors if c else (10.0,)
    comb = tuple(zip(c.combined[::2], c.combined[1::2])) if c else ()
    init = cfg.initial()
    if cfg.initial_state:
        raise ConfigError("converge supports initial_level only")
    rows = convergence_study(cfg.profile, cfg.t_end, init.n_basis, cfg.integrator(), bf, tf, comb,
                             cfg.n_report, cfg.samples, cfg.initial_level, cfg.constants)
    path = os.path.join(out, "converge.csv")
    write_csv(path, ["kind", "factor", "n_basis", "rel_tol", "abs_tol", "max_shift", "norm_drift"],
              [[r.kind for r in rows],
               [r.factor for r in rows], [r.n_basis for r in rows], [r.rel_tol for r in rows],
               [r.abs_tol for r in rows], [r.max_shift for r in rows], [r.norm_drift for r in rows]])
    for r in rows:
        print(f"{r.kind:<10} x{r.factor:g}: N={r.n_basis} rel_tol={r.rel_tol:.1e} shift={r.max_shift:.3e}")
    return [path], {}, max(r.norm_drift for r in rows), {}


COMMANDS = {
    "simulate": (cmd_simulate, "integrate one trajectory and write trajectory.csv"),
    "sweep": (cmd_sweep, "maximum populations over a drive-frequency grid (sweep.csv)"),
    "resonance": (cmd_resonance, "golden-section refinement of one resonance (resonance.csv)"),
    "validate": (cmd_validate, "compare with the exact constant-velocity solution (validate.csv)"),
    "density-map": (cmd_density, "|psi(x,t)|^2 as density.pgm (16-bit) and density.csv"),
    "converge": (cmd_converge, "population shifts under larger basis / tighter tolerances"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="movingwall", description=DESCRIPTION, epilog=EPILOG,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, text) in COMMANDS.items():
        p = sub.add_parser(name, help=text, description=text + "\n\n" + DESCRIPTION, epilog=EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--output-dir", help="overrides output_dir from the config")
        if name in ("sweep", "resonance"):
            p.add_argument("--workers", type=int, default=None,
                           help="worker processes (default: $MOVINGWALL_WORKERS or all CPUs)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config)
        if args.output_dir:
            cfg = replace(cfg, output_dir=args.output_dir)
        out = cfg.output_dir
        os.makedirs(out, exist_ok=True)
        func = COMMANDS[args.command][0]
        if args.command in ("sweep", "resonance"):
            outputs, stats, drift, extra = func(cfg, out, args.workers)
        else:
            outputs, stats, drift, extra = func(cfg, out)
    except (IntegrationError, OracleError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, DomainError, WallError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    manifest = os.path.join(out, "manifest.json")
    write_manifest(manifest, args.command, render_config(cfg), time.perf_counter() - t0,
                   stats, drift, outputs, extra)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

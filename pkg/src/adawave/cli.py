"""Command-line entry point.

Subcommands:
  simulate   generate clean and noisy boundary data on the simulation grid
  invert     run the adaptive reconstruction against a data directory
  theory     run the finite-dimensional regularization experiments
  report     summarize a completed run as CSV tables and figures

Exit codes: 0 success, 2 configuration/validation error, 3 numerical
failure, 4 inverse-crime guard.  Relative output paths are resolved against
$ADAWAVE_OUTPUT_ROOT when it is set.  Flags take precedence over the config
file, which takes precedence over built-in defaults.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import config as cfgmod
from .adaptivity import run_adaptive, write_run_artifacts
from .errors import AdawaveError, ConfigError, InverseCrimeError, NumericalError
from .mesh import TriMesh, load_mesh, save_mesh
from .synth import add_noise, generate_data, make_c_glob
from .theory import (SubspaceChain, check_strong_convexity, closed_form_linear,
                     constant_operator, convergence_rate_experiment,
                     linear_operator, mildly_nonlinear_operator,
                     minimize_tikhonov_fd, random_linear_instance,
                     relaxation_experiment)
from .wave import BoundaryTraceMatrix


def _add_config_flags(p):
    p.add_argument("-c", "--config", help="YAML config file", default=None)
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=1,
                   help="reserved; 1 is the deterministic reference mode")


def cmd_simulate(args):
    overrides = {}
    if args.noise is not None:
        overrides.setdefault("noise", {})["level"] = args.noise
    if args.seed is not None:
        overrides.setdefault("noise", {})["seed"] = args.seed
    cfg = cfgmod.load_config(args.config, overrides)
    out = cfgmod.resolve_out(args.out)
    os.makedirs(out, exist_ok=True)

    phantom = cfgmod.build_phantom(cfg)
    wave = cfgmod.build_wave(cfg)
    mesh = cfgmod.build_data_mesh(cfg)
    clean = generate_data(phantom, mesh, wave, omega=float(cfg["omega"]))
    noisy = add_noise(clean, cfgmod.build_noise(cfg))
    clean.save_csv(os.path.join(out, "clean.csv"))
    noisy.save_csv(os.path.join(out, "noisy.csv"))
    save_mesh(mesh, os.path.join(out, "mesh.txt"))
    cfgmod.write_manifest(os.path.join(out, "manifest.yaml"),
                          cfgmod.manifest_dict(
                              cfg, command="simulate",
                              data_mesh_checksum=mesh.checksum,
                              t_final=wave.t_final,
                              samples=len(clean.times)))
    print(f"simulate: wrote clean.csv, noisy.csv, mesh.txt, manifest.yaml to {out}")
    return 0


def cmd_invert(args):
    cfg = cfgmod.load_config(args.config)
    data_dir = cfgmod.resolve_out(args.data)
    out = cfgmod.resolve_out(args.out)
    manifest_path = os.path.join(data_dir, "manifest.yaml")
    if not os.path.exists(manifest_path):
        raise ConfigError(f"data manifest not found: {manifest_path}")
    import yaml
    with open(manifest_path) as f:
        data_manifest = yaml.safe_load(f)
    data_checksum = data_manifest.get("data_mesh_checksum")
    data_mesh = load_mesh(os.path.join(data_dir, "mesh.txt"))
    trace_file = "clean.csv" if args.clean else "noisy.csv"
    g = BoundaryTraceMatrix.load_csv(os.path.join(data_dir, trace_file), data_mesh)
    g.source_checksum = data_checksum

    wave = cfgmod.build_wave(cfg)
    mesh1 = cfgmod.build_inversion_mesh(cfg)
    phantom = cfgmod.build_phantom(cfg)
    cg = cfg["c_glob"]
    c_glob = make_c_glob(phantom, mesh1, mode=cg["mode"], sigma=float(cg["sigma"]),
                         target_max=float(cg["target_max"]),
                         shift=tuple(cg["shift"]),
                         shift_inclusion=int(cg["shift_inclusion"]),
                         omega=float(cfg["omega"]))
    run = run_adaptive(c_glob, g, cfgmod.build_refine(cfg),
                       cfgmod.build_optimizer(cfg), cfgmod.build_policy(cfg),
                       wave, cfgmod.build_cutoff(cfg),
                       data_checksum=data_checksum)
    manifest = cfgmod.manifest_dict(
        cfg, command="invert", data_dir=os.path.abspath(data_dir),
        data_mesh_checksum=data_checksum,
        state_mode="test1 side conditions reused inside the inversion domain",
        gradient_convention="L2 Riesz representation (mass-weighted pairing)")
    write_run_artifacts(run, out, manifest)
    print(f"invert: {len(run.levels)} levels, stop reason {run.stop_reason}, "
          f"final level {run.c_final_level}, max c = {run.c_final.max():.4f}")
    print(f"invert: artifacts in {out}")
    return 0


def cmd_theory(args):
    cfg = cfgmod.load_config(args.config)
    out = cfgmod.resolve_out(args.out)
    os.makedirs(out, exist_ok=True)
    t = cfg["theory"]
    rng = np.random.default_rng(int(t["seed"]))
    dim = int(t["dim"])

    # built-in oracle gate: Gauss-Newton must match the closed form
    worst = 0.0
    for _ in range(20):
        A = random_linear_instance(rng, dim)
        y = rng.standard_normal(dim)
        x0 = rng.standard_normal(dim)
        x = minimize_tikhonov_fd(linear_operator(A), y, x0, 0.1)
        worst = max(worst, float(np.linalg.norm(x - closed_form_linear(A, y, x0, 0.1))))
    if worst > 1e-8:
        raise NumericalError(f"linear oracle mismatch {worst:.3e} exceeds 1e-8")

    with open(os.path.join(out, "convexity.csv"), "w") as f:
        f.write("case, alpha, radius, min_ratio, threshold, pass_fraction\n")
        op0 = constant_operator(dim)
        r = check_strong_convexity(op0, np.zeros(dim), np.zeros(dim), 0.05,
                                   np.zeros(dim), 1.0, 200, rng)
        f.write(f"pure_regularizer, 0.05, 1.0, {r['min_ratio']!r}, "
                f"{r['threshold']!r}, {r['pass_fraction']!r}\n")
        delta, mu = 0.01, 0.2
        A = random_linear_instance(rng, dim)
        op = mildly_nonlinear_operator(A, 0.05)
        x_star = 0.3 * rng.standard_normal(dim)
        alpha = delta ** (2 * mu)
        x_alpha = minimize_tikhonov_fd(op, op.eval(x_star), x_star.copy(), alpha)
        r = check_strong_convexity(op, op.eval(x_star), x_star, alpha, x_alpha,
                                   delta ** (3 * mu), 400, rng)
        f.write(f"mildly_nonlinear, {alpha!r}, {delta ** (3 * mu)!r}, "
                f"{r['min_ratio']!r}, {r['threshold']!r}, {r['pass_fraction']!r}\n")

    with open(os.path.join(out, "relaxation.csv"), "w") as f:
        f.write("instance, distances_energy, eta, bound_ok_fraction\n")
        for i in range(int(t["instances"])):
            A = random_linear_instance(rng, dim)
            x_star = rng.standard_normal(dim)
            y = A @ x_star + 0.01 * rng.standard_normal(dim)
            x0 = x_star + 0.3 * rng.standard_normal(dim)
            chain = SubspaceChain.random_nested(rng, dim, tuple(t["chain_dims"]))
            res = relaxation_experiment(linear_operator(A), y, x0, 0.1, chain)
            f.write(f"{i}, {'|'.join(repr(d) for d in res.distances)}, "
                    f"{'|'.join(repr(e) for e in res.eta)}, "
                    f"{res.bound_ok_fraction!r}\n")

    with open(os.path.join(out, "rate.csv"), "w") as f:
        f.write("instance, delta, alpha, error, noise_bound\n")
        for i in range(20):
            A = random_linear_instance(rng, dim)
            op = linear_operator(A)
            x_star = rng.standard_normal(dim)
            x0 = x_star + 0.5 * rng.standard_normal(dim)
            for row in convergence_rate_experiment(op, x_star, x0, 0.2,
                                                   list(t["delta_grid"]), rng):
                f.write(f"{i}, {row['delta']!r}, {row['alpha']!r}, "
                        f"{row['error']!r}, {row['noise_bound']!r}\n")
    cfgmod.write_manifest(os.path.join(out, "manifest.yaml"),
                          cfgmod.manifest_dict(cfg, command="theory"))
    print(f"theory: wrote convexity.csv, relaxation.csv, rate.csv to {out}")
    return 0


def cmd_report(args):
    from .report import write_report
    run_dir = cfgmod.resolve_out(args.run_dir)
    out = cfgmod.resolve_out(args.out) if args.out else os.path.join(run_dir, "report")
    write_report(run_dir, out, slice_y=args.slice_y)
    print(f"report: tables and figures in {out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="adawave",
                                description="adaptive wave-speed reconstruction")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="generate synthetic boundary data")
    _add_config_flags(ps)
    ps.add_argument("--noise", type=float, default=None, help="noise level override")
    ps.add_argument("--seed", type=int, default=None, help="noise seed override")
    ps.set_defaults(func=cmd_simulate)

    pi = sub.add_parser("invert", help="adaptive reconstruction from data")
    _add_config_flags(pi)
    pi.add_argument("--data", required=True, help="directory written by simulate")
    pi.add_argument("--clean", action="store_true",
                    help="invert the noise-free trace instead of the noisy one")
    pi.set_defaults(func=cmd_invert)

    pt = sub.add_parser("theory", help="finite-dimensional regularization experiments")
    _add_config_flags(pt)
    pt.set_defaults(func=cmd_theory)

    pr = sub.add_parser("report", help="summarize a completed run")
    pr.add_argument("run_dir", help="directory written by invert")
    pr.add_argument("-o", "--out", default=None, help="report output directory")
    pr.add_argument("--slice-y", type=float, default=None,
                    help="y value of the coefficient slice")
    pr.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InverseCrimeError as exc:
        print(f"error (inverse-crime guard): {exc}", file=sys.stderr)
        return 4
    except ConfigError as exc:
        print(f"error (configuration): {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error (numerical): {exc}", file=sys.stderr)
        return 3
    except AdawaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

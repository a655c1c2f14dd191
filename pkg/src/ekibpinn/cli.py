"""Command-line front end: run experiments, export datasets, self-test."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import datagen, eki, linalg, stats
from .problems import PROBLEM_NAMES, make_problem, export_datasets_csv
from .runner import ExperimentConfig, emit, run_experiment


def _add_run(sub):
    p = sub.add_parser("run", help="run an experiment (config file + overrides)")
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--problem", choices=PROBLEM_NAMES)
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--ensemble-size", type=int, dest="ensemble_size")
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--out", type=str)
    p.add_argument("--workers", type=int)


def _add_datagen(sub):
    p = sub.add_parser("datagen", help="export a problem's datasets as CSV")
    p.add_argument("--problem", required=True, choices=PROBLEM_NAMES)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)


def _add_selftest(sub):
    sub.add_parser("selftest", help="run the built-in oracle checks")


def cmd_run(args) -> int:
    overrides = {
        k: getattr(args, k)
        for k in ("problem", "noise", "seed", "trials", "ensemble_size",
                  "max_iter", "out", "workers")
    }
    try:
        if args.config:
            config = ExperimentConfig.from_json(args.config, **overrides)
        else:
            config = ExperimentConfig(
                **{k: v for k, v in overrides.items() if v is not None}
            )
        bundle = run_experiment(config)
    except Exception as exc:  # machine-readable error report on failure
        report = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(report), file=sys.stderr)
        return 1
    paths = emit(bundle, config.out)
    print(f"problem={config.problem} noise={config.noise} trials={config.trials}")
    for k, v in sorted(bundle.aggregate.items()):
        print(f"  {k:>14s} = {v:.6g}")
    print("wrote: " + ", ".join(str(p) for p in paths))
    return 0


def cmd_datagen(args) -> int:
    problem = make_problem(args.problem, args.noise, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    data_path = args.out / f"{args.problem}_data.csv"
    export_datasets_csv(problem, data_path)
    grid_path = args.out / f"{args.problem}_reference.csv"
    ref = np.atleast_2d(np.asarray(problem.test_values, float).T).T
    with open(grid_path, "w") as fh:
        dim = problem.test_grid.shape[1]
        fh.write(",".join([f"x{i}" for i in range(dim)]
                          + [f"u{c}" for c in range(ref.shape[1])]) + "\n")
        for pt, vals in zip(problem.test_grid, ref):
            fh.write(",".join(map(str, [*pt, *vals])) + "\n")
    print(f"wrote {data_path} and {grid_path}")
    return 0


def cmd_selftest(args) -> int:
    """Quick oracle checks of the numerical building blocks."""
    checks = []

    A = np.array([[4.0, 0.0], [0.0, 9.0]])
    x = linalg.spd_solve(A, np.array([8.0, 27.0]))
    checks.append(("spd_solve diagonal", np.allclose(x, [2.0, 3.0])))

    rng = np.random.default_rng(0)
    M = rng.standard_normal((20, 20))
    A = M.T @ M + np.eye(20)
    B = rng.standard_normal((20, 3))
    X = linalg.spd_solve(A, B)
    checks.append(
        ("spd_solve residual", np.linalg.norm(A @ X - B) < 1e-8 * (1 + np.linalg.norm(B)))
    )

    from .autodiff import Jet2, jet_func

    j = jet_func(Jet2(1.0, 2.0, 3.0), "exp")
    e = np.exp(1.0)
    checks.append(("jet exp chain rule", np.allclose([j.v, j.d1, j.d2], [e, 2 * e, 7 * e])))

    traj = datagen.ko_solve(1.0, 1.0, (1.0, 0.8, 0.5), np.linspace(0, 10, 11))
    energy = (traj**2).sum(axis=1)
    checks.append(("ko energy conservation", np.max(np.abs(energy - 1.89)) < 1e-8))

    u0 = datagen.burgers_reference(0.1 / np.pi, np.array([0.25]), np.array([0.0]))
    checks.append(("burgers initial condition", np.allclose(u0, -np.sin(np.pi * 0.25))))

    m, s = stats.linear_reference_posterior([(0.0, 1.0)], 0.1, 0.0, 1.0)
    checks.append(
        ("conjugate posterior", np.allclose([m, s], [100 / 101, (1 / 101) ** 0.5]))
    )

    ok = True
    for name, passed in checks:
        print(f"[{'PASS' if passed else 'FAIL'}] {name}")
        ok &= passed
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ekibpinn",
        description="Ensemble Kalman inversion for PDE inverse problems "
        "with neural-network surrogates",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run(sub)
    _add_datagen(sub)
    _add_selftest(sub)
    args = parser.parse_args(argv)
    return {"run": cmd_run, "datagen": cmd_datagen, "selftest": cmd_selftest}[
        args.command
    ](args)


if __name__ == "__main__":
    sys.exit(main())

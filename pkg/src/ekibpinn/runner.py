"""Experiment orchestration: multi-trial runs, aggregation, result files."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import eki
from .problems import PROBLEM_NAMES, make_problem, transform


class IoError(OSError):
    pass


@dataclass
class ExperimentConfig:
    problem: str = "poisson1d_linear"
    noise: float = 0.01
    ensemble_size: int = 1000
    sigma_lambda: float = 0.1
    sigma_theta: float = 0.002
    sigma_theta_prior: float = 1.0
    window: int = 25
    tau: float = 0.05
    max_iter: int = 1000
    smoothing: int = 10
    seed: int = 0
    trials: int = 1
    out: str = "results"
    workers: int = 1

    def __post_init__(self):
        if self.problem not in PROBLEM_NAMES:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.ensemble_size < 2 or self.trials < 1 or self.workers < 1:
            raise ValueError("ensemble_size, trials and workers must be positive")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")

    @classmethod
    def from_json(cls, path, **overrides) -> "ExperimentConfig":
        with open(path) as fh:
            data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


@dataclass
class ResultBundle:
    config: ExperimentConfig
    reports: list
    aggregate: dict = field(default_factory=dict)


def run_experiment(config: ExperimentConfig) -> ResultBundle:
    """Execute `trials` independent seeded runs and aggregate their metrics.

    Trial t uses seed + t for both data generation and the inversion, so
    trials differ in noise realizations and ensembles alike.
    """
    reports = []
    datagen_time = 0.0
    for t in range(config.trials):
        seed = config.seed + t
        t0 = time.perf_counter()
        problem = make_problem(config.problem, config.noise, seed)
        datagen_time += time.perf_counter() - t0
        report = eki.run(
            problem,
            J=config.ensemble_size,
            drift=eki.DriftModel(config.sigma_lambda, config.sigma_theta),
            stopping=eki.StoppingConfig(
                config.window, config.tau, config.max_iter, config.smoothing
            ),
            seed=seed,
            sigma_theta_prior=config.sigma_theta_prior,
            workers=config.workers,
        )
        report.metrics["trial"] = t
        reports.append((problem, report))

    metric_keys = sorted(
        k for k in reports[0][1].metrics if k not in ("trial",)
    )
    aggregate = {
        k: float(np.mean([r.metrics[k] for _, r in reports])) for k in metric_keys
    }
    aggregate["wall_time"] = float(np.mean([r.wall_time for _, r in reports]))
    aggregate["datagen_time"] = datagen_time
    return ResultBundle(config=config, reports=reports, aggregate=aggregate)


def _trial_record(problem, report) -> dict:
    s = report.summary
    return {
        "trial": report.metrics["trial"],
        "metrics": {k: v for k, v in report.metrics.items() if k != "trial"},
        "lambda_names": list(problem.params.names),
        "lambda_mean": s.lambda_mean.tolist(),
        "lambda_std": s.lambda_std.tolist(),
        "lambda_mean_raw": s.lambda_mean_raw.tolist(),
        "lambda_std_raw": s.lambda_std_raw.tolist(),
        "iterations": report.iterations_used,
        "reinit_count": report.reinit_count,
        "wall_time": report.wall_time,
    }


def emit(bundle: ResultBundle, out_dir) -> list[Path]:
    """Write summary.json, lambda_samples.csv, predictive.csv, discrepancy.csv."""
    if not bundle.reports:
        raise IoError("nothing to emit: no completed trials")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(str(exc)) from exc

    summary = {
        "config": asdict(bundle.config),
        "trials": [_trial_record(p, r) for p, r in bundle.reports],
        "aggregate": bundle.aggregate,
    }
    paths = []
    p = out / "summary.json"
    p.write_text(json.dumps(summary, indent=2))
    paths.append(p)

    problem0, report0 = bundle.reports[0]
    names = problem0.params.names
    p = out / "lambda_samples.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "member", *names])
        for _, report in bundle.reports:
            lam = transform(problem0.params, report.posterior.lambda_block())
            t = report.metrics["trial"]
            for j, row in enumerate(lam):
                w.writerow([t, j, *row])
    paths.append(p)

    p = out / "predictive.csv"
    s = report0.summary
    dim = problem0.test_grid.shape[1]
    ref = np.atleast_2d(np.asarray(problem0.test_values, float).T).T
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        n_out = s.predictive_mean.shape[1]
        header = [f"x{i}" for i in range(dim)]
        for c in range(n_out):
            header += [f"ref{c}", f"mean{c}", f"std{c}"]
        w.writerow(header)
        for i, pt in enumerate(problem0.test_grid):
            row = list(pt)
            for c in range(n_out):
                row += [ref[i, c], s.predictive_mean[i, c], s.predictive_std[i, c]]
            w.writerow(row)
    paths.append(p)

    p = out / "discrepancy.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "iteration", "discrepancy"])
        for _, report in bundle.reports:
            for i, d in enumerate(report.discrepancy_history, start=1):
                w.writerow([report.metrics["trial"], i, d])
    paths.append(p)
    return paths

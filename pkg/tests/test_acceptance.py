"""End-to-end acceptance suite.

Each test prints one PASS/FAIL line (visible with -v through its outcome).
The six benchmark inversions are expensive (minutes each at J = 1000); their
quantitative checks use the median over five seeds, with runs cached at
module scope so each configuration is inverted exactly once.
"""

import dataclasses
import json
import time
from functools import lru_cache

import numpy as np

from ekibpinn.datagen import burgers_reference, ko_solve, poisson2d_solve
from ekibpinn.eki import DriftModel, Ensemble, NoiseModel, kalman_update, run
from ekibpinn.linalg import RngStream
from ekibpinn.problems import make_problem, observe_ensemble
from ekibpinn.runner import ExperimentConfig, emit, run_experiment
from ekibpinn.stats import linear_reference_posterior
from ekibpinn.surrogate import MlpArchitecture, param_count

SEEDS = (0, 1, 2, 3, 4)


@lru_cache(maxsize=None)
def bench(name, noise):
    """Five seeded inversions of one benchmark configuration."""
    out = []
    for s in SEEDS:
        problem = make_problem(name, noise, s)
        out.append((problem, run(problem, J=1000, seed=s)))
    return out


def med(runs, key):
    return float(np.median([r.metrics[key] for _, r in runs]))


def test_criterion_01_param_counts():
    got = (
        param_count(MlpArchitecture(1)),
        param_count(MlpArchitecture(2)),
        param_count(MlpArchitecture(1, output_dim=3)),
    )
    assert got == (5251, 5301, 5353), got
    print("PASS criterion 1: parameter counts 5251/5301/5353")


def test_criterion_02_ad_matches_finite_differences():
    """First derivatives vs complex step (machine precision), second
    derivatives vs the complex-step curvature identity
    f'' = 2 (f(x) - Re f(x + i h)) / h^2."""
    rng = np.random.default_rng(20)
    archs = [MlpArchitecture(1), MlpArchitecture(2), MlpArchitecture(1, output_dim=3)]
    worst = 0.0
    for arch in archs:
        for _ in range(20):
            theta = rng.standard_normal(param_count(arch))
            x = rng.uniform(-1, 1, (1, arch.input_dim))
            axis = rng.integers(arch.input_dim)
            comp = rng.integers(arch.output_dim)
            from ekibpinn.surrogate import forward_jet_batch

            b = forward_jet_batch(arch, theta, x, (int(axis),))
            h = 1e-4
            e = np.zeros(arch.input_dim)
            e[axis] = 1.0

            def net(z, arch=arch, theta=theta):
                # independent plain-loop evaluation; complex-safe
                from ekibpinn.surrogate import unflatten_theta

                a = z
                layers = unflatten_theta(arch, theta)
                for i, (W, b_) in enumerate(layers):
                    a = a @ W + b_
                    if i < len(layers) - 1:
                        a = np.tanh(a)
                return a

            # complex step (h tiny -> no truncation, no cancellation) gives
            # machine-accurate first derivatives; a central difference of
            # those gives the curvature with only O(delta^2) truncation
            h, delta = 1e-150, 1e-5

            def cs_d1(xp):
                return net(xp.astype(complex) + 1j * h * e).imag[0, comp] / h

            d1 = cs_d1(x)
            d2 = (cs_d1(x + delta * e) - cs_d1(x - delta * e)) / (2 * delta)
            r1 = abs(b.du(int(axis), comp)[0, 0] - d1) / max(1.0, abs(d1))
            r2 = abs(b.d2u(int(axis), comp)[0, 0] - d2) / max(1.0, abs(d2))
            worst = max(worst, r1, r2)
    assert worst < 1e-5, worst
    print(f"PASS criterion 2: AD vs finite differences, worst rel err {worst:.2e}")


def test_criterion_03_linear_gaussian_oracle():
    J = 50_000
    noise = NoiseModel(0.5, 0.5, 0.5, 1, 0, 0)
    errs = []
    for seed in range(3):
        rng = np.random.default_rng(seed)
        # 1-D: prior N(0,1), G = identity, y = 1, sigma = 0.5
        xi = rng.standard_normal((J, 1))
        out = kalman_update(Ensemble(xi, 1, 0), xi.copy(), np.array([1.0]), noise,
                            RngStream(100 + seed))
        m_exact, v_exact = 1.0 / 1.25, 0.25 / 1.25
        errs.append((abs(out.members.mean() - m_exact) / m_exact,
                     abs(out.members.var(ddof=1) - v_exact) / v_exact))
        # 2-D: prior N(0, I), H = [1, 0.5], y = 1, sigma = 0.5
        H = np.array([[1.0], [0.5]])
        xi = rng.standard_normal((J, 2))
        Y = xi @ H
        Sigma = np.linalg.inv(np.eye(2) + (H @ H.T) / 0.25)
        mu = Sigma @ H[:, 0] / 0.25
        out = kalman_update(Ensemble(xi, 2, 0), Y, np.array([1.0]), noise,
                            RngStream(200 + seed))
        errs.append((np.max(np.abs(out.members.mean(axis=0) - mu) / np.abs(mu)),
                     np.max(np.abs(out.members.var(axis=0, ddof=1) - np.diag(Sigma))
                            / np.diag(Sigma))))
    mean_err = float(np.mean([e[0] for e in errs]))
    var_err = float(np.mean([e[1] for e in errs]))
    assert mean_err < 0.02, mean_err
    assert var_err < 0.05, var_err
    print(f"PASS criterion 3: conjugate posterior, mean err {mean_err:.4f}, "
          f"var err {var_err:.4f}")


def test_criterion_04_reference_posterior_agreement():
    mean_gaps, std_ratios = [], []
    for problem, report in bench("poisson1d_linear", 0.01):
        data = [(x, u) for (x,), u in zip(problem.data_u.locations, problem.data_u.values)]
        data += [(x, u) for (x,), u in zip(problem.data_b.locations, problem.data_b.values)]
        ref_mean, ref_std = linear_reference_posterior(data, 0.01, 0.0, 1.0)
        m = report.summary.lambda_mean[0]
        s = report.summary.lambda_std[0]
        mean_gaps.append(abs(m - ref_mean) / ref_std)
        std_ratios.append(s / ref_std)
    gap = float(np.median(mean_gaps))
    ratio = float(np.median(std_ratios))
    assert gap <= 3.0, (gap, mean_gaps)
    assert 1 / 3 <= ratio <= 3.0, (ratio, std_ratios)
    print(f"PASS criterion 4: reference posterior, |mean gap| {gap:.2f} std, "
          f"std ratio {ratio:.2f}")


def test_criterion_05_linear_poisson_errors():
    runs = bench("poisson1d_linear", 0.01)
    e_u, e_k = med(runs, "e_u"), med(runs, "e_k")
    iters = med(runs, "iterations")
    assert e_u <= 0.02, e_u
    assert e_k <= 0.01, e_k
    assert 50 <= iters <= 600, iters
    assert all(r.iterations_used < 1000 for _, r in runs)
    print(f"PASS criterion 5: e_u {e_u:.4f} <= 2%, e_k {e_k:.4f} <= 1%, "
          f"iterations {iters:.0f} in [50, 600]")


def test_criterion_06_nonlinear_poisson_errors():
    lo = bench("poisson1d_nonlinear", 0.01)
    hi = bench("poisson1d_nonlinear", 0.1)
    checks = (med(lo, "e_k"), med(lo, "e_u"), med(hi, "e_k"), med(hi, "e_u"))
    assert checks[0] <= 0.02, checks
    assert checks[1] <= 0.05, checks
    assert checks[2] <= 0.05, checks
    assert checks[3] <= 0.20, checks
    print("PASS criterion 6: nonlinear reaction rates, "
          f"low noise e_k {checks[0]:.4f}/e_u {checks[1]:.4f}, "
          f"high noise e_k {checks[2]:.4f}/e_u {checks[3]:.4f}")


def test_criterion_07_diffusion_reaction_errors():
    runs = bench("diffreact2d", 0.01)
    e_k, e_u = med(runs, "e_k"), med(runs, "e_u")
    assert e_k <= 0.02, e_k
    assert e_u <= 0.05, e_u
    covered = [
        abs(r.summary.lambda_mean[0] - 1.0) <= 3 * r.summary.lambda_std[0]
        for _, r in runs
    ]
    assert sum(covered) >= 3, covered
    print(f"PASS criterion 7: e_k {e_k:.4f} <= 2%, e_u {e_u:.4f} <= 5%, "
          f"truth in mean±3std for {sum(covered)}/5 seeds")


def test_criterion_08_ode_system_errors():
    runs = bench("kraichnan_orszag", 0.01)
    e_a, e_b = med(runs, "e_a"), med(runs, "e_b")
    eu = [med(runs, f"e_u{i}") for i in (1, 2, 3)]
    assert e_b <= 0.03, e_b
    assert e_a <= 0.12, e_a
    assert all(e <= 0.08 for e in eu), eu
    print(f"PASS criterion 8: e_a {e_a:.4f} <= 12%, e_b {e_b:.4f} <= 3%, "
          f"e_u {[round(e, 4) for e in eu]} <= 8%")


def test_criterion_09_viscosity_errors():
    runs = bench("burgers", 0.01)
    e_nu, e_u = med(runs, "e_nu"), med(runs, "e_u")
    assert e_nu <= 0.10, e_nu
    assert e_u <= 0.05, e_u
    assert all(r.summary.lambda_mean[0] > 0 for _, r in runs)
    print(f"PASS criterion 9: e_nu {e_nu:.4f} <= 10%, e_u {e_u:.4f} <= 5%, "
          "viscosity positive")


def test_criterion_10_source_localization():
    truth = np.array([0.3, 0.3, 0.75, 0.75, 0.2, 0.7])
    worst = []
    for _, r in bench("source_localization", 0.01):
        worst.append(np.max(np.abs(r.summary.lambda_mean - truth)))
    w = float(np.median(worst))
    assert w <= 0.06, (w, worst)
    print(f"PASS criterion 10: source coordinates within {w:.4f} <= 0.06")


def test_criterion_11_ode_invariant():
    t = np.linspace(0.0, 10.0, 401)
    U = ko_solve(1.0, 1.0, (1.0, 0.8, 0.5), t, dt=1e-3)
    drift = np.max(np.abs(np.sum(U**2, axis=1) - 1.89))
    assert drift <= 1e-8, drift
    print(f"PASS criterion 11: quadratic invariant drift {drift:.2e} <= 1e-8")


def _burgers_rk4_oracle(nu, snap_times, nx=2049, dt=1e-5):
    """Independent explicit RK4 march with centered differences."""
    x = np.linspace(-1.0, 1.0, nx)
    dx = x[1] - x[0]

    def rhs(u):
        du = np.zeros_like(u)
        ux = (u[2:] - u[:-2]) / (2 * dx)
        uxx = (u[2:] - 2 * u[1:-1] + u[:-2]) / dx**2
        du[1:-1] = -u[1:-1] * ux + nu * uxx
        return du

    u = -np.sin(np.pi * x)
    t = 0.0
    snaps = {}
    for ts in snap_times:
        while t < ts - 1e-12:
            step = min(dt, ts - t)
            k1 = rhs(u)
            k2 = rhs(u + 0.5 * step * k1)
            k3 = rhs(u + 0.5 * step * k2)
            k4 = rhs(u + step * k3)
            u = u + (step / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += step
        snaps[ts] = u.copy()
    return x, snaps


def test_criterion_12_burgers_oracle():
    nu = 0.1 / np.pi
    xp = np.linspace(-1.0, 1.0, 33)
    tp = np.linspace(0.0, 1.0, 11)
    xg, snaps = _burgers_rk4_oracle(nu, tp[1:])
    idx = np.searchsorted(xg, xp)
    idx = np.clip(idx, 0, len(xg) - 1)
    worst = np.max(np.abs(-np.sin(np.pi * xp) - burgers_reference(nu, xp, np.zeros(33))))
    for ts in tp[1:]:
        u_ref = burgers_reference(nu, xg[idx], np.full(33, ts))
        worst = max(worst, np.max(np.abs(u_ref - snaps[ts][idx])))
    assert worst <= 1e-3, worst
    print(f"PASS criterion 12: quadrature vs grid solver max err {worst:.2e} <= 1e-3")


def test_criterion_13_poisson_fd_oracle():
    lam = 0.02

    def forcing(pts):
        return 0.1 * np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])

    field = poisson2d_solve(lam, forcing, grid_n=128)
    rng = np.random.default_rng(1)
    pts = rng.uniform(0.05, 0.95, (200, 2))
    exact = 0.1 / (lam * 2 * np.pi**2) * np.sin(np.pi * pts[:, 0]) * np.sin(
        np.pi * pts[:, 1]
    )
    worst = float(np.max(np.abs(field(pts) - exact)))
    assert worst <= 1e-3, worst
    print(f"PASS criterion 13: FD solver vs manufactured solution {worst:.2e} <= 1e-3")


def test_criterion_14_determinism_across_workers(tmp_path):
    def summary_for(workers, out):
        cfg = ExperimentConfig(
            problem="poisson1d_linear", ensemble_size=60, max_iter=4,
            window=1, tau=1e-12, seed=7, workers=workers, out=str(out),
        )
        emit(run_experiment(cfg), out)
        data = json.loads((out / "summary.json").read_text())
        for trial in data["trials"]:
            trial.pop("wall_time", None)
            trial.pop("datagen_time", None)
        data["config"].pop("workers", None)
        data["config"].pop("out", None)
        data.get("aggregate", {}).pop("wall_time", None)
        data.get("aggregate", {}).pop("datagen_time", None)
        return data

    a = summary_for(1, tmp_path / "w1")
    b = summary_for(2, tmp_path / "w2")
    assert a == b
    print("PASS criterion 14: summaries identical for workers=1 and workers=2")


def test_criterion_15_linear_complexity_in_state_dim():
    base = make_problem("poisson1d_linear", 0.01, 0)
    wide = dataclasses.replace(base, arch=MlpArchitecture(1, (71, 71, 71)))
    ratio_dim = param_count(wide.arch) / param_count(base.arch)
    assert 1.9 <= ratio_dim <= 2.1  # widths chosen to double N_xi

    def per_iter_time(problem):
        J = 200
        drift = DriftModel()
        noise = NoiseModel.from_problem(problem)
        y = problem.observation_vector()
        from ekibpinn.eki import init_ensemble, perturb

        ens = init_ensemble(problem, J, RngStream(0))
        best = np.inf
        for rep in range(3):
            t0 = time.perf_counter()
            hat = perturb(ens, drift, RngStream(rep))
            Y = observe_ensemble(problem, hat.members)
            ens = kalman_update(hat, Y, y, noise, RngStream(rep + 10))
            best = min(best, time.perf_counter() - t0)
        return best

    t_base = per_iter_time(base)
    t_wide = per_iter_time(wide)
    ratio = t_wide / t_base
    assert ratio <= 2.2, (t_base, t_wide, ratio)
    print(f"PASS criterion 15: 2x state dim -> {ratio:.2f}x per-iteration time <= 2.2")

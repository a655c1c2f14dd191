"""Ensemble Kalman inversion over the joint [lambda | theta] state.

One iteration: random-walk perturbation with block-diagonal covariance Q,
batched observation of every member, perturbed-observation Kalman update
against y = [u, f, b], then a windowed discrepancy-principle stopping
check.  The discrepancy D_i is computed from the pre-update predictions
of the same iteration.

Randomness is pre-assigned to streams keyed by purpose and iteration, so
results are bitwise reproducible for a fixed seed regardless of worker
count.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .linalg import RngStream, cross_covariance, spd_solve
from .problems import InverseProblem, observe_ensemble
from .stats import PosteriorSummary, relative_error_lambda, relative_error_u, summarize
from .surrogate import sample_theta_prior


class TooManyReinits(RuntimeError):
    pass


# Stream purposes.
_P_INIT = 0
_P_DRIFT = 1
_P_INNOV = 2

# Failure detection: a non-finite state within this many iterations
# triggers a prior reinitialization (at most _MAX_REINITS times);
# afterwards it is a hard error.
FAILURE_WINDOW = 10
_MAX_REINITS = 3


@dataclass
class Ensemble:
    members: np.ndarray  # (J, N_xi)
    n_lambda: int
    iteration: int = 0

    def __post_init__(self):
        self.members = np.atleast_2d(np.asarray(self.members, dtype=float))
        if self.members.shape[0] < 2:
            raise ValueError("ensemble needs J >= 2 members")

    @property
    def J(self) -> int:
        return self.members.shape[0]

    def lambda_block(self) -> np.ndarray:
        return self.members[:, : self.n_lambda]

    def theta_block(self) -> np.ndarray:
        return self.members[:, self.n_lambda :]


@dataclass(frozen=True)
class DriftModel:
    """Artificial-dynamics stds: Q = diag(sigma_lambda^2, sigma_theta^2)
    over the matching [lambda | theta] blocks."""

    sigma_lambda: float = 0.1
    sigma_theta: float = 0.002

    def __post_init__(self):
        if self.sigma_lambda < 0 or self.sigma_theta < 0:
            raise ValueError("drift stds must be non-negative")


@dataclass(frozen=True)
class NoiseModel:
    """Diagonal observation covariance R in the fixed [u, f, b] order."""

    sigma_u: float
    sigma_f: float
    sigma_b: float
    n_u: int
    n_f: int
    n_b: int

    @classmethod
    def from_problem(cls, problem: InverseProblem) -> "NoiseModel":
        return cls(
            problem.sigma_u,
            problem.sigma_f,
            problem.sigma_b,
            len(problem.data_u),
            len(problem.data_f),
            len(problem.data_b),
        )

    @property
    def n_y(self) -> int:
        return self.n_u + self.n_f + self.n_b

    def r_std(self) -> np.ndarray:
        return np.concatenate(
            [
                np.full(self.n_u, self.sigma_u),
                np.full(self.n_f, self.sigma_f),
                np.full(self.n_b, self.sigma_b),
            ]
        )

    def r_matrix(self) -> np.ndarray:
        return np.diag(self.r_std() ** 2)


@dataclass(frozen=True)
class StoppingConfig:
    window: int = 25
    threshold: float = 0.05
    max_iter: int = 1000
    smoothing: int = 10
    floor_factor: float = 3.0

    def __post_init__(self):
        if self.window < 1 or self.threshold <= 0 or self.max_iter < 1:
            raise ValueError("invalid stopping configuration")
        if self.smoothing < 1 or self.floor_factor <= 0:
            raise ValueError("invalid stopping configuration")


@dataclass
class RunReport:
    posterior: Ensemble
    discrepancy_history: np.ndarray
    iterations_used: int
    reinit_count: int
    wall_time: float
    summary: PosteriorSummary
    metrics: dict = field(default_factory=dict)


def init_ensemble(
    problem: InverseProblem,
    J: int,
    stream: RngStream,
    sigma_theta_prior: float = 1.0,
) -> Ensemble:
    """Draw J members from the prior: lambda in raw coordinates, theta
    from the network prior; member j uses a stream derived from (seed, j)."""
    if J < 2:
        raise ValueError("J must be >= 2")
    spec = problem.params
    n_lam = spec.n
    members = np.empty((J, problem.n_xi))
    for j in range(J):
        m = stream.child(j)
        members[j, :n_lam] = spec.prior_mean + spec.prior_std * m.child(0).generator().standard_normal(n_lam)
        members[j, n_lam:] = sample_theta_prior(problem.arch, sigma_theta_prior, m.child(1))
    return Ensemble(members, n_lam)


def perturb(ensemble: Ensemble, drift: DriftModel, stream: RngStream) -> Ensemble:
    """Add zero-mean Gaussian drift noise with block stds to every member."""
    members = ensemble.members.copy()
    if drift.sigma_lambda == 0 and drift.sigma_theta == 0:
        return Ensemble(members, ensemble.n_lambda, ensemble.iteration)
    eps = stream.generator().standard_normal(members.shape)
    n_lam = ensemble.n_lambda
    members[:, :n_lam] += drift.sigma_lambda * eps[:, :n_lam]
    members[:, n_lam:] += drift.sigma_theta * eps[:, n_lam:]
    return Ensemble(members, ensemble.n_lambda, ensemble.iteration)


def kalman_update(
    ensemble_hat: Ensemble,
    Y_hat: np.ndarray,
    y: np.ndarray,
    noise: NoiseModel,
    stream: RngStream | None,
) -> Ensemble:
    """Perturbed-observation Kalman update applied to every member.

    Factorizes (C_yy + R) once and reuses it against all J innovation
    vectors.  stream=None suppresses the innovation noise (tests only).
    """
    Y_hat = np.asarray(Y_hat, dtype=float)
    y = np.asarray(y, dtype=float)
    members = ensemble_hat.members
    if Y_hat.shape[0] != members.shape[0]:
        raise ValueError("Y_hat rows must equal ensemble size")
    if Y_hat.shape[1] != y.shape[0]:
        raise ValueError("Y_hat columns must equal observation dimension")

    C_xy = cross_covariance(members, Y_hat)  # (N_xi, N_y)
    C_yy = cross_covariance(Y_hat, Y_hat)  # (N_y, N_y)
    A = C_yy + noise.r_matrix()

    innov = y[None, :] - Y_hat
    if stream is not None:
        innov = innov + noise.r_std()[None, :] * stream.generator().standard_normal(Y_hat.shape)
    gain_applied = C_xy @ spd_solve(A, innov.T)  # (N_xi, J)
    return Ensemble(
        members + gain_applied.T, ensemble_hat.n_lambda, ensemble_hat.iteration + 1
    )


def discrepancy(Y_hat: np.ndarray, y: np.ndarray, noise: NoiseModel) -> float:
    """|| R^(-1/2) (y - mean_j y_hat_j) ||_2."""
    resid = (np.asarray(y, float) - np.asarray(Y_hat, float).mean(axis=0)) / noise.r_std()
    return float(np.linalg.norm(resid))


def should_stop(history, cfg: StoppingConfig, noise_floor: float = 0.0) -> bool:
    """Plateau detection on the discrepancy history; also fires at max_iter.

    The base test asks for the relative improvement of the discrepancy over
    a window of ``cfg.window`` iterations to fall below ``cfg.threshold``.
    Three refinements make it robust in practice:

    * Smoothing.  The statistic is a trailing moving average of the history
      (width ``cfg.smoothing``); the converged discrepancy can jitter by
      tens of percent iteration-to-iteration, which would defeat any test
      on the raw values.
    * Plateaus are detected through running *minima*: fire when the last
      ``window`` smoothed values contain no new minimum improving on the
      earlier best by more than ``threshold`` (relative).  Minima are
      stable statistics of a noisy plateau, while a genuinely declining
      trajectory keeps setting new minima and never fires.
    * Noise-floor arming.  ``noise_floor`` is the expected converged
      whitened misfit, sqrt(N_y) for a correctly specified noise model.
      The test is armed only once the recent discrepancy is within
      ``cfg.floor_factor`` of it; a trajectory stalled far above the floor
      is mid-transient (or failing), not converged.  ``noise_floor = 0``
      disables arming.  A running-maximum guard additionally blocks firing
      until the discrepancy has at least halved, so a flat history never
      counts as convergence.
    """
    n = len(history)
    if n >= cfg.max_iter:
        return True
    h = np.asarray(history, dtype=float)
    if cfg.smoothing > 1 and n >= cfg.smoothing:
        h = np.convolve(h, np.full(cfg.smoothing, 1.0 / cfg.smoothing), mode="valid")
    if len(h) <= cfg.window:
        return False
    if h[-1] == 0:
        return True
    recent = h[-cfg.window :]
    recent_best = float(recent.min())
    if recent_best > 0.5 * h.max():
        return False
    if noise_floor > 0 and float(recent.max()) > cfg.floor_factor * noise_floor:
        return False
    best_before = float(h[: -cfg.window].min())
    return recent_best > (1.0 - cfg.threshold) * best_before


def run(
    problem: InverseProblem,
    J: int = 1000,
    drift: DriftModel | None = None,
    noise: NoiseModel | None = None,
    stopping: StoppingConfig | None = None,
    seed: int = 0,
    sigma_theta_prior: float = 1.0,
    workers: int = 1,
) -> RunReport:
    """Full inversion loop with discrepancy stopping and failure recovery."""
    drift = drift or DriftModel()
    noise = noise or NoiseModel.from_problem(problem)
    stopping = stopping or StoppingConfig()
    y = problem.observation_vector()
    noise_floor = float(np.sqrt(y.size))
    base = RngStream(seed)

    t0 = time.perf_counter()
    reinit_count = 0
    while True:
        ens = init_ensemble(
            problem, J, base.child(_P_INIT, reinit_count), sigma_theta_prior
        )
        history: list[float] = []
        failed = False
        for i in range(1, stopping.max_iter + 1):
            hat = perturb(ens, drift, base.child(_P_DRIFT, reinit_count, i))
            Y_hat = observe_ensemble(problem, hat.members, workers=workers)
            if not np.all(np.isfinite(Y_hat)):
                if i <= FAILURE_WINDOW and reinit_count < _MAX_REINITS:
                    failed = True
                    break
                if reinit_count >= _MAX_REINITS:
                    raise TooManyReinits(
                        f"{problem.name}: non-finite state after {reinit_count} reinits"
                    )
                raise FloatingPointError(
                    f"{problem.name}: non-finite state at iteration {i}"
                )
            ens = kalman_update(
                hat, Y_hat, y, noise, base.child(_P_INNOV, reinit_count, i)
            )
            if not np.all(np.isfinite(ens.members)):
                if i <= FAILURE_WINDOW and reinit_count < _MAX_REINITS:
                    failed = True
                    break
                raise FloatingPointError(
                    f"{problem.name}: non-finite members at iteration {i}"
                )
            # The stopping statistic is measured on the *updated* ensemble:
            # the drift perturbation injects enough spread that the
            # pre-update predictions carry large iteration-to-iteration
            # jitter, while the post-update discrepancy decays smoothly.
            Y_post = observe_ensemble(problem, ens.members, workers=workers)
            d = discrepancy(Y_post, y, noise)
            if not np.isfinite(d):
                if i <= FAILURE_WINDOW and reinit_count < _MAX_REINITS:
                    failed = True
                    break
                raise FloatingPointError(
                    f"{problem.name}: non-finite discrepancy at iteration {i}"
                )
            history.append(d)
            if should_stop(history, stopping, noise_floor):
                break
        if not failed:
            break
        reinit_count += 1

    wall = time.perf_counter() - t0
    summary = summarize(ens, problem)
    metrics = _metrics(problem, summary, len(history))
    return RunReport(
        posterior=ens,
        discrepancy_history=np.asarray(history),
        iterations_used=len(history),
        reinit_count=reinit_count,
        wall_time=wall,
        summary=summary,
        metrics=metrics,
    )


def _metrics(problem: InverseProblem, summary: PosteriorSummary, iterations: int) -> dict:
    ref = np.asarray(problem.test_values, dtype=float)
    pred = summary.predictive_mean
    metrics: dict = {"iterations": iterations}
    if ref.ndim == 1:
        metrics["e_u"] = relative_error_u(pred[:, 0], ref)
    else:
        for c in range(ref.shape[1]):
            metrics[f"e_u{c + 1}"] = relative_error_u(pred[:, c], ref[:, c])
    for name, mean, true in zip(
        problem.params.names, summary.lambda_mean, problem.params.true_values
    ):
        metrics[f"e_{name}"] = relative_error_lambda(mean, true)
    return metrics

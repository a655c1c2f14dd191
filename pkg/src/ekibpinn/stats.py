"""Posterior summaries, error metrics, and the linear reference posterior."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import InverseProblem, transform
from .surrogate import forward_batch


class ZeroReference(ValueError):
    pass


class ZeroTrueValue(ValueError):
    pass


@dataclass
class PosteriorSummary:
    """Per-parameter and per-test-point sample statistics (J-1 normalized).

    Lambda statistics are reported on back-transformed physical values;
    raw-coordinate statistics are kept alongside for debugging.
    """

    lambda_mean: np.ndarray
    lambda_std: np.ndarray
    lambda_mean_raw: np.ndarray
    lambda_std_raw: np.ndarray
    predictive_mean: np.ndarray  # (Nt, output_dim)
    predictive_std: np.ndarray


def summarize(ensemble, problem: InverseProblem, test_grid=None) -> PosteriorSummary:
    """Sample mean/std of physical parameters and surrogate predictions.

    Predictions are streamed over member and point chunks so large test
    grids never materialize a (J, Nt) block at once.
    """
    grid = problem.test_grid if test_grid is None else np.atleast_2d(test_grid)
    lam_raw = ensemble.lambda_block()
    theta = ensemble.theta_block()
    J = ensemble.J
    if J < 2:
        raise ValueError("need J >= 2 for sample statistics")
    lam_phys = transform(problem.params, lam_raw)

    n_out = problem.arch.output_dim
    nt = grid.shape[0]
    s1 = np.zeros((nt, n_out))
    s2 = np.zeros((nt, n_out))
    member_chunk = max(8, int(2_000_000 // max(1, min(nt, 4096))))
    for plo in range(0, nt, 4096):
        pts = grid[plo : plo + 4096]
        for mlo in range(0, J, member_chunk):
            vals = forward_batch(problem.arch, theta[mlo : mlo + member_chunk], pts)
            s1[plo : plo + 4096] += vals.sum(axis=0)
            s2[plo : plo + 4096] += (vals**2).sum(axis=0)
    mean = s1 / J
    var = np.maximum(s2 - J * mean**2, 0.0) / (J - 1)

    return PosteriorSummary(
        lambda_mean=lam_phys.mean(axis=0),
        lambda_std=lam_phys.std(axis=0, ddof=1),
        lambda_mean_raw=lam_raw.mean(axis=0),
        lambda_std_raw=lam_raw.std(axis=0, ddof=1),
        predictive_mean=mean,
        predictive_std=np.sqrt(var),
    )


def relative_error_u(pred_mean, reference) -> float:
    """l2-relative error sqrt(sum |u - u_mean|^2 / sum |u|^2)."""
    pred = np.asarray(pred_mean, dtype=float).ravel()
    ref = np.asarray(reference, dtype=float).ravel()
    if pred.shape != ref.shape:
        raise ValueError("prediction and reference lengths differ")
    denom = np.sum(ref**2)
    if denom == 0:
        raise ZeroReference("reference values are all zero")
    return float(np.sqrt(np.sum((ref - pred) ** 2) / denom))


def relative_error_lambda(lambda_mean: float, lambda_true: float) -> float:
    """|lambda - mean| / |lambda|."""
    if lambda_true == 0:
        raise ZeroTrueValue("true parameter value is zero")
    return float(abs(lambda_true - lambda_mean) / abs(lambda_true))


def linear_reference_posterior(data, sigma_eta: float, k0: float, sigma_k: float):
    """Closed-form Gaussian posterior for the k cos(x) parameterization.

    data: iterable of (x_i, u_i) pairs (forward and boundary measurements
    together, valid when their noise stds coincide).  Returns (mean, std).
    """
    if sigma_eta <= 0 or sigma_k <= 0:
        raise ValueError("stds must be positive")
    xs = np.asarray([p[0] for p in data], dtype=float)
    us = np.asarray([p[1] for p in data], dtype=float)
    precision = 1.0 / sigma_k**2 + np.sum(np.cos(xs) ** 2) / sigma_eta**2
    mean = (k0 / sigma_k**2 + np.sum(us * np.cos(xs)) / sigma_eta**2) / precision
    return float(mean), float(precision**-0.5)

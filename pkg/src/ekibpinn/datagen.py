"""Reference solutions and samplers that manufacture synthetic observations.

Reference fields are deterministic; only sampling locations and noise
consume randomness, always through an explicit RngStream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .linalg import RngStream


class QuadratureUnstable(ArithmeticError):
    pass


class SolverDiverged(ArithmeticError):
    pass


@dataclass(frozen=True)
class ReferenceField:
    """Deterministic evaluator for a reference solution."""

    evaluator: Callable
    provenance: str  # analytic | rk4 | cole_hopf | finite_difference
    resolution: tuple = ()

    def __call__(self, *args):
        return self.evaluator(*args)


def equispaced(n: int, a: float, b: float) -> np.ndarray:
    """n points including both endpoints; n = 1 degenerates to [a]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not a < b:
        raise ValueError("need a < b")
    if n == 1:
        return np.array([a])
    return np.linspace(a, b, n)


def latin_hypercube(n: int, bounds, stream: RngStream) -> np.ndarray:
    """Latin hypercube design: one point per stratum in each dimension.

    bounds: sequence of (lo, hi) per dimension.  Returns (n, d).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim == 1:
        bounds = bounds[None, :]
    d = bounds.shape[0]
    rng = stream.generator()
    pts = np.empty((n, d))
    for k in range(d):
        strata = (rng.permutation(n) + rng.uniform(size=n)) / n
        lo, hi = bounds[k]
        pts[:, k] = lo + (hi - lo) * strata
    return pts


def add_noise(values: np.ndarray, sigma_u: float, stream: RngStream) -> np.ndarray:
    """values + sigma_u * N(0, 1) noise."""
    values = np.asarray(values, dtype=float)
    if sigma_u == 0:
        return values.copy()
    return values + sigma_u * stream.generator().standard_normal(values.shape)


# ---------------------------------------------------------------------------
# Kraichnan-Orszag system: three coupled quadratic ODEs conserving
# u1^2 + u2^2 + u3^2.


def _ko_rhs(u: np.ndarray, a: float, b: float) -> np.ndarray:
    u1, u2, u3 = u
    return np.array([a * u2 * u3, b * u1 * u3, -(a + b) * u1 * u2])


def ko_solve(a: float, b: float, ic, t_grid, dt: float = 1e-3):
    """Classical RK4 integration of the shear-wave system, sampled at t_grid.

    Returns (len(t_grid), 3).  The step lands exactly on each requested
    time by shortening the final substep.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    t_grid = np.asarray(t_grid, dtype=float)
    order = np.argsort(t_grid)
    out = np.empty((t_grid.size, 3))
    u = np.asarray(ic, dtype=float).copy()
    t = 0.0
    for idx in order:
        target = t_grid[idx]
        while t < target - 1e-14:
            h = min(dt, target - t)
            k1 = _ko_rhs(u, a, b)
            k2 = _ko_rhs(u + 0.5 * h * k1, a, b)
            k3 = _ko_rhs(u + 0.5 * h * k2, a, b)
            k4 = _ko_rhs(u + h * k3, a, b)
            u = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        out[idx] = u
    return out


# ---------------------------------------------------------------------------
# Burgers equation with u(x,0) = -sin(pi x): Cole-Hopf transform evaluated
# by Gauss-Hermite quadrature.


def burgers_reference(nu: float, x, t, n_nodes: int = 160):
    """Viscous Burgers solution on [-1,1] x [0, 3/pi], pointwise.

    u = -int sin(pi(x-eta)) g deta / int g deta with
    g = exp(-cos(pi(x-eta))/(2 pi nu)) exp(-eta^2/(4 nu t)); the Gaussian
    factor is absorbed into Gauss-Hermite weights via eta = 2 sqrt(nu t) z.
    At t = 0 the initial condition is returned exactly.
    """
    if nu <= 0:
        raise ValueError("nu must be positive")
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    x, t = np.broadcast_arrays(x, t)
    out = np.empty(x.shape)
    z, w = np.polynomial.hermite.hermgauss(n_nodes)
    logw = np.log(w)

    flat_x, flat_t = x.ravel(), t.ravel()
    res = np.empty(flat_x.size)
    for i, (xi, ti) in enumerate(zip(flat_x, flat_t)):
        if ti < 0:
            raise ValueError("t must be non-negative")
        if ti == 0:
            res[i] = -np.sin(np.pi * xi)
            continue
        eta = 2.0 * np.sqrt(nu * ti) * z
        phase = np.pi * (xi - eta)
        loggain = logw - np.cos(phase) / (2.0 * np.pi * nu)
        loggain -= loggain.max()  # log-sum rescaling for stability
        g = np.exp(loggain)
        denom = g.sum()
        if not np.isfinite(denom) or denom == 0:
            raise QuadratureUnstable(f"quadrature underflow at (x={xi}, t={ti})")
        res[i] = -(np.sin(phase) * g).sum() / denom
    out.ravel()[:] = res
    return out if out.shape else float(out)


def burgers_reference_field(nu: float) -> ReferenceField:
    return ReferenceField(
        evaluator=lambda x, t: burgers_reference(nu, x, t),
        provenance="cole_hopf",
        resolution=(160,),
    )


# ---------------------------------------------------------------------------
# 2D Poisson solve on the unit square with zero Dirichlet boundary:
# -lam * Laplace(u) = f1 + f2, 5-point finite differences.


def gaussian_sources(points: np.ndarray, amplitudes, centers, length_scale: float):
    """Sum of isotropic Gaussian bumps evaluated at (N, 2) points."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(points.shape[0])
    for k, c in zip(np.asarray(amplitudes, float), np.atleast_2d(np.asarray(centers, float))):
        r2 = ((points - c) ** 2).sum(axis=1)
        out += k * np.exp(-r2 / (2.0 * length_scale**2))
    return out


def poisson2d_solve(
    lam: float,
    forcing: Callable,
    grid_n: int = 128,
) -> ReferenceField:
    """Solve -lam * Laplace(u) = forcing on [0,1]^2, u = 0 on the boundary.

    Uniform (grid_n+1)^2 grid, direct sparse solve, bilinear interpolation
    off-grid.  `forcing` maps (N, 2) points to values.
    """
    if grid_n < 33:
        raise ValueError("grid_n must be >= 33")
    h = 1.0 / grid_n
    xs = np.linspace(0.0, 1.0, grid_n + 1)
    Xi, Yi = np.meshgrid(xs[1:-1], xs[1:-1], indexing="ij")
    pts = np.column_stack([Xi.ravel(), Yi.ravel()])
    rhs = np.asarray(forcing(pts), dtype=float)

    m = grid_n - 1
    main = scipy.sparse.diags(
        [4.0 * np.ones(m), -np.ones(m - 1), -np.ones(m - 1)], [0, 1, -1]
    )
    eye = scipy.sparse.identity(m)
    A = (scipy.sparse.kron(eye, main) + scipy.sparse.kron(
        scipy.sparse.diags([-np.ones(m - 1), -np.ones(m - 1)], [1, -1]), eye
    )) * (lam / h**2)
    u_int = scipy.sparse.linalg.spsolve(A.tocsr(), rhs)
    if not np.all(np.isfinite(u_int)):
        raise SolverDiverged("non-finite Poisson solution")

    U = np.zeros((grid_n + 1, grid_n + 1))
    U[1:-1, 1:-1] = u_int.reshape(m, m)

    def evaluate(points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        fx = np.clip(p[:, 0], 0.0, 1.0) / h
        fy = np.clip(p[:, 1], 0.0, 1.0) / h
        i0 = np.clip(fx.astype(int), 0, grid_n - 1)
        j0 = np.clip(fy.astype(int), 0, grid_n - 1)
        tx, ty = fx - i0, fy - j0
        return (
            U[i0, j0] * (1 - tx) * (1 - ty)
            + U[i0 + 1, j0] * tx * (1 - ty)
            + U[i0, j0 + 1] * (1 - tx) * ty
            + U[i0 + 1, j0 + 1] * tx * ty
        )

    field = ReferenceField(evaluator=evaluate, provenance="finite_difference",
                           resolution=(grid_n,))
    object.__setattr__(field, "grid_values", U)
    object.__setattr__(field, "grid_coords", xs)
    return field

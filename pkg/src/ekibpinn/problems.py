"""The six benchmark inverse problems as data.

Each problem bundles its domain, datasets (forward measurements, residual
collocation points, boundary points), physical-parameter priors and
transforms, the differential/boundary operators, and a reference solution
for error reporting.  The observation operator concatenates predictions
in the fixed order [u, f, b].

Conventions adopted where the setup leaves room:
  - a scalar second argument of a Gaussian is a standard deviation;
  - boundary points on 2D rectangles are spread uniformly along the
    perimeter arc length, corners never duplicated;
  - inference runs in transformed (raw) coordinates, reporting is in
    back-transformed physical coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import datagen
from .linalg import RngStream
from .surrogate import (
    JetBundle,
    MlpArchitecture,
    forward_batch,
    forward_jet_batch,
)


class UnknownProblem(KeyError):
    pass


class NonFiniteOutput(ArithmeticError):
    pass


PROBLEM_NAMES = (
    "poisson1d_linear",
    "poisson1d_nonlinear",
    "diffreact2d",
    "kraichnan_orszag",
    "burgers",
    "source_localization",
)

# Purpose tags for the per-problem data-generation streams.
_STREAM_LOCS = 0
_STREAM_NOISE = 1


@dataclass(frozen=True)
class Dataset:
    """Point set with observed values; components picks an output channel."""

    locations: np.ndarray  # (N, d)
    values: np.ndarray  # (N,)
    role: str  # forward | residual | boundary
    components: np.ndarray = None  # (N,) ints

    def __post_init__(self):
        locs = np.atleast_2d(np.asarray(self.locations, dtype=float))
        vals = np.asarray(self.values, dtype=float).ravel()
        if locs.shape[0] != vals.shape[0]:
            raise ValueError("locations and values must have equal length")
        comps = self.components
        comps = np.zeros(locs.shape[0], dtype=int) if comps is None else np.asarray(comps, int)
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "components", comps)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class PhysParamSpec:
    names: tuple[str, ...]
    prior_mean: np.ndarray
    prior_std: np.ndarray
    transforms: tuple[str, ...]  # identity | log, per parameter
    true_values: np.ndarray  # physical coordinates

    def __post_init__(self):
        object.__setattr__(self, "prior_mean", np.asarray(self.prior_mean, float))
        object.__setattr__(self, "prior_std", np.asarray(self.prior_std, float))
        object.__setattr__(self, "true_values", np.asarray(self.true_values, float))
        if np.any(self.prior_std <= 0):
            raise ValueError("prior stds must be positive")

    @property
    def n(self) -> int:
        return len(self.names)


def transform(params: PhysParamSpec, lambda_raw: np.ndarray) -> np.ndarray:
    """Raw (inference) coordinates -> physical values, per component."""
    raw = np.asarray(lambda_raw, dtype=float)
    out = raw.copy()
    for i, tr in enumerate(params.transforms):
        if tr == "log":
            out[..., i] = np.exp(raw[..., i])
        elif tr != "identity":
            raise ValueError(f"unknown transform {tr!r}")
    return out


def back_transform(params: PhysParamSpec, lambda_phys: np.ndarray) -> np.ndarray:
    """Physical values -> raw coordinates; inverse of `transform`."""
    phys = np.asarray(lambda_phys, dtype=float)
    out = phys.copy()
    for i, tr in enumerate(params.transforms):
        if tr == "log":
            out[..., i] = np.log(phys[..., i])
    return out


@dataclass(frozen=True)
class InverseProblem:
    name: str
    arch: MlpArchitecture
    params: PhysParamSpec
    data_u: Dataset
    data_f: Dataset
    data_b: Dataset
    residual_op: Callable  # (JetBundle, lam_phys (J, n), locs, comps) -> (J, N)
    boundary_op: Callable  # same shape
    sigma_u: float
    sigma_f: float
    sigma_b: float
    test_grid: np.ndarray  # (Nt, d)
    test_values: np.ndarray  # (Nt,) or (Nt, output_dim)
    jet_directions: tuple[int, ...]
    noise_level: float
    seed: int

    @property
    def n_lambda(self) -> int:
        return self.params.n

    @property
    def n_y(self) -> int:
        return len(self.data_u) + len(self.data_f) + len(self.data_b)

    @property
    def n_xi(self) -> int:
        from .surrogate import param_count

        return self.params.n + param_count(self.arch)

    def observation_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.data_u.values, self.data_f.values, self.data_b.values]
        )

    def split(self, xi: np.ndarray):
        """Flat [lambda | theta] -> (lambda_raw, theta), batched or not."""
        xi = np.asarray(xi, dtype=float)
        return xi[..., : self.params.n], xi[..., self.params.n :]


def value_boundary_op(bundle: JetBundle, lam, locs, comps) -> np.ndarray:
    """Default boundary operator: the surrogate value itself."""
    return np.take_along_axis(bundle.value, comps[None, :, None], axis=2)[..., 0]


def observe_ensemble(
    problem: InverseProblem,
    Xi: np.ndarray,
    workers: int = 1,
    member_chunk: int | None = None,
) -> np.ndarray:
    """G applied to every row of Xi (J x N_xi) -> (J x N_y).

    Members are processed in chunks (optionally across threads); chunking
    never changes the result, only the peak memory.
    """
    Xi = np.atleast_2d(np.asarray(Xi, dtype=float))
    J = Xi.shape[0]
    if member_chunk is None:
        n_pts = max(1, problem.n_y)
        member_chunk = int(np.clip(4_000_000 // (n_pts * 50), 8, 256))
    chunks = [
        (lo, min(lo + member_chunk, J)) for lo in range(0, J, member_chunk)
    ]

    from .surrogate import JetBundle, _propagate, unflatten_theta

    n_u, n_b = len(problem.data_u), len(problem.data_b)
    ub_locs = np.vstack([problem.data_u.locations, problem.data_b.locations])

    def eval_chunk(lo, hi):
        lam_raw, theta = problem.split(Xi[lo:hi])
        lam = transform(problem.params, lam_raw)
        layers = unflatten_theta(problem.arch, theta)
        parts = []
        # One value-only sweep covers both forward and boundary points.
        if n_u or n_b:
            vb = _propagate(layers, ub_locs, ())
        if n_u:
            comps = problem.data_u.components
            parts.append(
                np.take_along_axis(vb.value[:, :n_u], comps[None, :, None], axis=2)[..., 0]
            )
        if len(problem.data_f):
            bundle = _propagate(layers, problem.data_f.locations, problem.jet_directions)
            parts.append(
                problem.residual_op(
                    bundle, lam, problem.data_f.locations, problem.data_f.components
                )
            )
        if n_b:
            b_bundle = JetBundle(vb.value[:, n_u:], (), vb.d1, vb.d2)
            parts.append(
                problem.boundary_op(
                    b_bundle, lam, problem.data_b.locations, problem.data_b.components
                )
            )
        # parts is already assembled in the fixed [u, f, b] order.
        return np.concatenate(parts, axis=1)

    if workers > 1 and len(chunks) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: eval_chunk(*c), chunks))
    else:
        results = [eval_chunk(lo, hi) for lo, hi in chunks]
    return np.concatenate(results, axis=0)


def observe(problem: InverseProblem, xi: np.ndarray) -> np.ndarray:
    """G(xi) for a single parameter vector; raises on non-finite output."""
    out = observe_ensemble(problem, np.asarray(xi, dtype=float)[None, :])[0]
    if not np.all(np.isfinite(out)):
        raise NonFiniteOutput(f"non-finite observation for problem {problem.name}")
    return out


# ---------------------------------------------------------------------------
# Geometry helpers


def rectangle_boundary(n: int, x_range, y_range) -> np.ndarray:
    """n points uniformly spaced along the perimeter, corners not duplicated."""
    (x0, x1), (y0, y1) = x_range, y_range
    lx, ly = x1 - x0, y1 - y0
    per = 2 * (lx + ly)
    s = per * np.arange(n) / n
    pts = np.empty((n, 2))
    for i, si in enumerate(s):
        if si < lx:  # bottom, left -> right
            pts[i] = (x0 + si, y0)
        elif si < lx + ly:  # right, bottom -> top
            pts[i] = (x1, y0 + (si - lx))
        elif si < 2 * lx + ly:  # top, right -> left
            pts[i] = (x1 - (si - lx - ly), y1)
        else:  # left, top -> bottom
            pts[i] = (x0, y1 - (si - 2 * lx - ly))
    return pts


def _interior_equispaced(n: int, a: float, b: float) -> np.ndarray:
    """n equispaced points strictly inside (a, b): x_i = a + (b-a) i/(n+1)."""
    return a + (b - a) * np.arange(1, n + 1) / (n + 1)


# ---------------------------------------------------------------------------
# Problem constructors


def _poisson1d_linear(noise_level: float, seed: int) -> InverseProblem:
    # u_true = k cos(x) with k = 1; residual pairs u_xx with -k cos(x).
    stream = RngStream(seed)
    x_u = _interior_equispaced(8, 0.0, 8.0)
    u_clean = np.cos(x_u)
    u_vals = datagen.add_noise(u_clean, noise_level, stream.child(_STREAM_NOISE))

    x_f = datagen.equispaced(100, 0.0, 8.0)
    x_b = np.array([0.0, 8.0])
    b_vals = np.cos(x_b)

    def residual(bundle, lam, locs, comps):
        k = lam[:, [0]]
        return bundle.d2u(0) + k * np.cos(locs[:, 0])[None, :]

    test_x = datagen.equispaced(200, 0.0, 8.0)
    return InverseProblem(
        name="poisson1d_linear",
        arch=MlpArchitecture(1),
        params=PhysParamSpec(("k",), [0.0], [1.0], ("identity",), [1.0]),
        data_u=Dataset(x_u[:, None], u_vals, "forward"),
        data_f=Dataset(x_f[:, None], np.zeros(100), "residual"),
        data_b=Dataset(x_b[:, None], b_vals, "boundary"),
        residual_op=residual,
        boundary_op=value_boundary_op,
        sigma_u=noise_level,
        sigma_f=0.01,
        sigma_b=0.01,
        test_grid=test_x[:, None],
        test_values=np.cos(test_x),
        jet_directions=(0,),
        noise_level=noise_level,
        seed=seed,
    )


def _sin3_solution(x):
    s = np.sin(6.0 * x)
    return s**3


def _sin3_uxx(x):
    # d2/dx2 sin^3(6x) = 108 sin(6x) (2 cos^2(6x) - sin^2(6x))
    s, c = np.sin(6.0 * x), np.cos(6.0 * x)
    return 108.0 * s * (2.0 * c * c - s * s)


def _poisson1d_nonlinear(noise_level: float, seed: int) -> InverseProblem:
    # 0.01 u_xx + k tanh(u) = f with u_true = sin^3(6x), k = 0.7.
    stream = RngStream(seed)
    lam_fixed, k_true = 0.01, 0.7
    x_u = _interior_equispaced(6, -0.7, 0.7)
    u_vals = datagen.add_noise(
        _sin3_solution(x_u), noise_level, stream.child(_STREAM_NOISE)
    )
    x_f = datagen.equispaced(32, -0.7, 0.7)
    f_vals = lam_fixed * _sin3_uxx(x_f) + k_true * np.tanh(_sin3_solution(x_f))
    x_b = np.array([-0.7, 0.7])
    b_vals = _sin3_solution(x_b)

    def residual(bundle, lam, locs, comps):
        k = lam[:, [0]]
        return lam_fixed * bundle.d2u(0) + k * np.tanh(bundle.u())

    test_x = datagen.equispaced(200, -0.7, 0.7)
    return InverseProblem(
        name="poisson1d_nonlinear",
        arch=MlpArchitecture(1),
        params=PhysParamSpec(("k",), [0.0], [1.0], ("identity",), [k_true]),
        data_u=Dataset(x_u[:, None], u_vals, "forward"),
        data_f=Dataset(x_f[:, None], f_vals, "residual"),
        data_b=Dataset(x_b[:, None], b_vals, "boundary"),
        residual_op=residual,
        boundary_op=value_boundary_op,
        sigma_u=noise_level,
        sigma_f=0.01,
        sigma_b=0.01,
        test_grid=test_x[:, None],
        test_values=_sin3_solution(test_x),
        jet_directions=(0,),
        noise_level=noise_level,
        seed=seed,
    )


def _diffreact2d(noise_level: float, seed: int) -> InverseProblem:
    # 0.01 Laplace(u) + k u^2 = f with u_true = sin(pi x) sin(pi y), k = 1.
    stream = RngStream(seed)
    lam_fixed, k_true = 0.01, 1.0
    u_true = lambda p: np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])

    bounds = [(-1.0, 1.0), (-1.0, 1.0)]
    p_u = datagen.latin_hypercube(100, bounds, stream.child(_STREAM_LOCS, 0))
    u_vals = datagen.add_noise(u_true(p_u), noise_level, stream.child(_STREAM_NOISE))
    p_f = datagen.latin_hypercube(100, bounds, stream.child(_STREAM_LOCS, 1))
    f_vals = lam_fixed * (-2.0 * np.pi**2) * u_true(p_f) + k_true * u_true(p_f) ** 2
    p_b = rectangle_boundary(100, (-1.0, 1.0), (-1.0, 1.0))

    def residual(bundle, lam, locs, comps):
        k = lam[:, [0]]
        return lam_fixed * bundle.laplacian() + k * bundle.u() ** 2

    g = datagen.equispaced(50, -1.0, 1.0)
    GX, GY = np.meshgrid(g, g, indexing="ij")
    test = np.column_stack([GX.ravel(), GY.ravel()])
    return InverseProblem(
        name="diffreact2d",
        arch=MlpArchitecture(2),
        params=PhysParamSpec(("k",), [0.0], [1.0], ("identity",), [k_true]),
        data_u=Dataset(p_u, u_vals, "forward"),
        data_f=Dataset(p_f, f_vals, "residual"),
        data_b=Dataset(p_b, np.zeros(100), "boundary"),
        residual_op=residual,
        boundary_op=value_boundary_op,
        sigma_u=noise_level,
        sigma_f=0.01,
        sigma_b=0.01,
        test_grid=test,
        test_values=u_true(test),
        jet_directions=(0, 1),
        noise_level=noise_level,
        seed=seed,
    )


def _kraichnan_orszag(noise_level: float, seed: int) -> InverseProblem:
    # Three coupled quadratic ODEs; a = b = 1, ICs known to the data
    # generator but not observed (N_b = 0).
    stream = RngStream(seed)
    a_true, b_true = 1.0, 1.0
    ic = (1.0, 0.8, 0.5)

    t_u = datagen.equispaced(12, 1.0, 10.0)
    traj_u = datagen.ko_solve(a_true, b_true, ic, t_u)
    locs_u = np.concatenate([t_u, t_u[:7], t_u])[:, None]
    comps_u = np.concatenate([np.zeros(12), np.ones(7), np.full(12, 2)]).astype(int)
    clean_u = np.concatenate([traj_u[:, 0], traj_u[:7, 1], traj_u[:, 2]])
    u_vals = datagen.add_noise(clean_u, noise_level, stream.child(_STREAM_NOISE))

    t_f = datagen.equispaced(100, 0.0, 10.0)
    locs_f = np.concatenate([t_f, t_f, t_f])[:, None]
    comps_f = np.repeat(np.arange(3), 100)

    def residual(bundle, lam, locs, comps):
        a, b = lam[:, [0]], lam[:, [1]]
        u1, u2, u3 = bundle.u(0), bundle.u(1), bundle.u(2)
        rhs = np.stack(
            [a * u2 * u3, b * u1 * u3, -(a + b) * u1 * u2], axis=2
        )
        ut = np.take_along_axis(bundle.d1[0], comps[None, :, None], axis=2)[..., 0]
        return ut - np.take_along_axis(rhs, comps[None, :, None], axis=2)[..., 0]

    test_t = datagen.equispaced(300, 0.0, 10.0)
    test_vals = datagen.ko_solve(a_true, b_true, ic, test_t)
    return InverseProblem(
        name="kraichnan_orszag",
        arch=MlpArchitecture(1, output_dim=3),
        params=PhysParamSpec(
            ("a", "b"), [0.0, 0.0], [2.0, 2.0], ("identity", "identity"), [a_true, b_true]
        ),
        data_u=Dataset(locs_u, u_vals, "forward", comps_u),
        data_f=Dataset(locs_f, np.zeros(300), "residual", comps_f),
        data_b=Dataset(np.zeros((0, 1)), np.zeros(0), "boundary"),
        residual_op=residual,
        boundary_op=value_boundary_op,
        sigma_u=noise_level,
        sigma_f=0.01,
        sigma_b=0.01,
        test_grid=test_t[:, None],
        test_values=test_vals,
        jet_directions=(0,),
        noise_level=noise_level,
        seed=seed,
    )


def _burgers(noise_level: float, seed: int) -> InverseProblem:
    # u_t + u u_x - nu u_xx = 0, inferring log(nu); sigma_f = 0.1 here.
    stream = RngStream(seed)
    nu_true = 0.1 / np.pi
    t_max = 3.0 / np.pi

    xs = datagen.equispaced(256, -1.0, 1.0)
    ts = datagen.equispaced(100, 0.0, t_max)
    GX, GT = np.meshgrid(xs, ts, indexing="ij")  # x-major grid ordering
    grid = np.column_stack([GX.ravel(), GT.ravel()])
    grid_u = datagen.burgers_reference(nu_true, GX, GT).ravel()

    rng = stream.child(_STREAM_LOCS, 0).generator()
    pick = rng.choice(grid.shape[0], size=100, replace=False)
    u_vals = datagen.add_noise(grid_u[pick], noise_level, stream.child(_STREAM_NOISE))

    # 75 boundary points split across the initial segment (length 2) and
    # the two temporal edges (length 3/pi each), proportionally to length.
    n_init = 39
    n_edge = 18
    x_init = datagen.equispaced(n_init, -1.0, 1.0)
    t_edge = t_max * np.arange(1, n_edge + 1) / n_edge
    locs_b = np.vstack(
        [
            np.column_stack([x_init, np.zeros(n_init)]),
            np.column_stack([-np.ones(n_edge), t_edge]),
            np.column_stack([np.ones(n_edge), t_edge]),
        ]
    )
    b_vals = np.concatenate([-np.sin(np.pi * x_init), np.zeros(2 * n_edge)])

    p_f = datagen.latin_hypercube(
        100, [(-1.0, 1.0), (0.0, t_max)], stream.child(_STREAM_LOCS, 1)
    )

    def residual(bundle, lam, locs, comps):
        nu = lam[:, [0]]
        return bundle.du(1) + bundle.u() * bundle.du(0) - nu * bundle.d2u(0)

    return InverseProblem(
        name="burgers",
        arch=MlpArchitecture(2),
        params=PhysParamSpec(("nu",), [0.0], [3.0], ("log",), [nu_true]),
        data_u=Dataset(grid[pick], u_vals, "forward"),
        data_f=Dataset(p_f, np.zeros(100), "residual"),
        data_b=Dataset(locs_b, b_vals, "boundary"),
        residual_op=residual,
        boundary_op=value_boundary_op,
        sigma_u=noise_level,
        sigma_f=0.1,
        sigma_b=0.01,
        test_grid=grid,
        test_values=grid_u,
        jet_directions=(0, 1),
        noise_level=noise_level,
        seed=seed,
    )


_SRC_AMPLITUDES = (2.0, -3.0, 0.5)
_SRC_LENGTH = 0.15
_SRC_CENTERS_TRUE = ((0.3, 0.3), (0.75, 0.75), (0.2, 0.7))
_SRC_LAMBDA = 0.02


def _f1_known(points: np.ndarray) -> np.ndarray:
    p = np.atleast_2d(points)
    return 0.1 * np.sin(np.pi * p[:, 0]) * np.sin(np.pi * p[:, 1])


def _source_localization(noise_level: float, seed: int) -> InverseProblem:
    # -0.02 Laplace(u) - f2(x; centers) = f1; infer the three source
    # centers through log coordinates.
    stream = RngStream(seed)

    def forcing(points):
        return _f1_known(points) + datagen.gaussian_sources(
            points, _SRC_AMPLITUDES, _SRC_CENTERS_TRUE, _SRC_LENGTH
        )

    field = datagen.poisson2d_solve(_SRC_LAMBDA, forcing, grid_n=128)
    xs = field.grid_coords
    GX, GY = np.meshgrid(xs, xs, indexing="ij")
    nodes = np.column_stack([GX.ravel(), GY.ravel()])
    interior = (
        (nodes[:, 0] > 0) & (nodes[:, 0] < 1) & (nodes[:, 1] > 0) & (nodes[:, 1] < 1)
    )
    idx = np.flatnonzero(interior)
    rng = stream.child(_STREAM_LOCS, 0).generator()
    pick = idx[rng.choice(idx.size, size=100, replace=False)]
    p_u = nodes[pick]
    u_vals = datagen.add_noise(
        field.grid_values.ravel()[pick], noise_level, stream.child(_STREAM_NOISE)
    )

    p_b = rectangle_boundary(100, (0.0, 1.0), (0.0, 1.0))
    p_f = datagen.latin_hypercube(
        100, [(0.0, 1.0), (0.0, 1.0)], stream.child(_STREAM_LOCS, 1)
    )
    f_vals = _f1_known(p_f)

    def residual(bundle, lam, locs, comps):
        out = -_SRC_LAMBDA * bundle.laplacian()
        for s, amp in enumerate(_SRC_AMPLITUDES):
            cx, cy = lam[:, [2 * s]], lam[:, [2 * s + 1]]
            r2 = (locs[None, :, 0] - cx) ** 2 + (locs[None, :, 1] - cy) ** 2
            out = out - amp * np.exp(-r2 / (2.0 * _SRC_LENGTH**2))
        return out

    g = datagen.equispaced(50, 0.0, 1.0)
    TX, TY = np.meshgrid(g, g, indexing="ij")
    test = np.column_stack([TX.ravel(), TY.ravel()])
    names = ("x1", "y1", "x2", "y2", "x3", "y3")
    true_flat = np.asarray(_SRC_CENTERS_TRUE).ravel()
    return InverseProblem(
        name="source_localization",
        arch=MlpArchitecture(2),
        params=PhysParamSpec(
            names, np.zeros(6), np.ones(6), ("log",) * 6, true_flat
        ),
        data_u=Dataset(p_u, u_vals, "forward"),
        data_f=Dataset(p_f, f_vals, "residual"),
        data_b=Dataset(p_b, np.zeros(100), "boundary"),
        residual_op=residual,
        boundary_op=value_boundary_op,
        sigma_u=noise_level,
        sigma_f=0.01,
        sigma_b=0.01,
        test_grid=test,
        test_values=field(test),
        jet_directions=(0, 1),
        noise_level=noise_level,
        seed=seed,
    )


_CONSTRUCTORS = {
    "poisson1d_linear": _poisson1d_linear,
    "poisson1d_nonlinear": _poisson1d_nonlinear,
    "diffreact2d": _diffreact2d,
    "kraichnan_orszag": _kraichnan_orszag,
    "burgers": _burgers,
    "source_localization": _source_localization,
}


def make_problem(name: str, noise_level: float = 0.01, seed: int = 0) -> InverseProblem:
    """Build one of the six benchmark problems with seeded synthetic data."""
    try:
        ctor = _CONSTRUCTORS[name]
    except KeyError:
        raise UnknownProblem(
            f"unknown problem {name!r}; choose from {PROBLEM_NAMES}"
        ) from None
    return ctor(noise_level, seed)


def export_datasets_csv(problem: InverseProblem, path) -> None:
    """Dump all datasets as CSV rows: role, coordinates..., value."""
    import csv

    dim = problem.test_grid.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["role"] + [f"x{i}" for i in range(dim)] + ["component", "value"])
        for ds in (problem.data_u, problem.data_f, problem.data_b):
            for loc, comp, val in zip(ds.locations, ds.components, ds.values):
                writer.writerow([ds.role, *loc, comp, val])

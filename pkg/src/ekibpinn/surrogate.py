"""Fully connected tanh surrogate with a flat parameter layout.

The flat theta layout is fixed and documented so ensembles serialize
stably: [W1 row-major | b1 | W2 | b2 | ... | W_out | b_out], with each
W of shape (fan_in, fan_out).

Evaluation is offered in two granularities that share the same numerics:
a scalar API (one member, one point) and a batched API used by the
inversion loop (all members, all points at once).  The batched jet pass
reuses the value channel across directions, so a Laplacian in d
dimensions costs one value sweep plus d derivative sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Jet2
from .linalg import RngStream


@dataclass(frozen=True)
class MlpArchitecture:
    input_dim: int
    hidden_widths: tuple[int, ...] = (50, 50, 50)
    output_dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(self.hidden_widths))
        if self.input_dim < 1 or self.output_dim < 1 or not self.hidden_widths:
            raise ValueError("architecture dimensions must be positive")

    def layer_shapes(self) -> list[tuple[int, int]]:
        dims = (self.input_dim, *self.hidden_widths, self.output_dim)
        return list(zip(dims[:-1], dims[1:]))


def param_count(arch: MlpArchitecture) -> int:
    """Total number of weights and biases, layer by layer."""
    return sum(fi * fo + fo for fi, fo in arch.layer_shapes())


def sample_theta_prior(
    arch: MlpArchitecture, sigma_theta_prior: float, stream: RngStream
) -> np.ndarray:
    """Draw a flat theta block with i.i.d. N(0, sigma^2) entries."""
    if sigma_theta_prior <= 0:
        raise ValueError("sigma_theta_prior must be positive")
    return sigma_theta_prior * stream.generator().standard_normal(param_count(arch))


def unflatten_theta(arch: MlpArchitecture, theta: np.ndarray):
    """Split flat theta (..., N_theta) into per-layer (W, b) arrays.

    Leading axes are preserved, so a (J, N_theta) ensemble block becomes
    batched weight stacks ready for np.matmul.
    """
    theta = np.asarray(theta, dtype=float)
    expected = param_count(arch)
    if theta.shape[-1] != expected:
        raise ValueError(f"theta has {theta.shape[-1]} entries, expected {expected}")
    lead = theta.shape[:-1]
    layers = []
    off = 0
    for fi, fo in arch.layer_shapes():
        W = theta[..., off : off + fi * fo].reshape(lead + (fi, fo))
        off += fi * fo
        b = theta[..., off : off + fo].reshape(lead + (1, fo))
        off += fo
        layers.append((W, b))
    return layers


@dataclass
class JetBundle:
    """Batched jet evaluation of the surrogate.

    value: (J, N, out); d1, d2: (n_dir, J, N, out), indexed by the
    position of the direction in `directions` (input coordinate index).
    """

    value: np.ndarray
    directions: tuple[int, ...]
    d1: np.ndarray
    d2: np.ndarray
    _dir_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self._dir_index = {d: i for i, d in enumerate(self.directions)}

    def u(self, component: int = 0) -> np.ndarray:
        return self.value[..., component]

    def du(self, direction: int, component: int = 0) -> np.ndarray:
        return self.d1[self._dir_index[direction]][..., component]

    def d2u(self, direction: int, component: int = 0) -> np.ndarray:
        return self.d2[self._dir_index[direction]][..., component]

    def laplacian(self, component: int = 0) -> np.ndarray:
        return sum(self.d2u(d, component) for d in self.directions)


def _propagate(layers, X: np.ndarray, directions: tuple[int, ...]) -> JetBundle:
    """Core jet sweep over pre-split layers.  The value channel is shared
    across all directions; first-layer zero second derivatives are
    exploited instead of propagated."""
    n_dir = len(directions)
    J = layers[0][0].shape[0]
    v = np.broadcast_to(X, (J,) + X.shape)
    d1 = [None] * n_dir
    d2 = [None] * n_dir

    last = len(layers) - 1
    for li, (W, b) in enumerate(layers):
        a = v @ W
        a += b
        if li == 0:
            # Seeded inputs: d1 = e_k and d2 = 0, so the first linear map
            # picks out row k of W and the a2 channel vanishes.
            a1 = [np.broadcast_to(W[:, None, k, :], a.shape) for k in directions]
            a2 = None
        else:
            a1 = [d1[i] @ W for i in range(n_dir)]
            a2 = [d2[i] @ W for i in range(n_dir)]
        if li < last:
            t = np.tanh(a)
            v = t
            if n_dir:
                s = 1.0 - t * t
                u2 = (2.0 * t) * s  # -tanh'' factor, shared across directions
                for i in range(n_dir):
                    curv = a1[i] * a1[i]
                    curv *= u2
                    if a2 is None:
                        np.negative(curv, out=curv)
                        d2[i] = curv
                    else:
                        t2 = a2[i]
                        t2 *= s
                        t2 -= curv
                        d2[i] = t2
                    d1[i] = s * a1[i]
        else:
            v = a
            d1 = a1
            d2 = a2 if a2 is not None else [np.zeros_like(a) for _ in a1]

    stack = lambda arrs: np.stack(arrs) if arrs else np.zeros((0,) + v.shape)
    return JetBundle(v, tuple(directions), stack(d1), stack(d2))


def forward_jet_batch(
    arch: MlpArchitecture,
    theta: np.ndarray,
    X: np.ndarray,
    directions: tuple[int, ...] = (),
) -> JetBundle:
    """Evaluate members x points with jets along the given input directions.

    theta: (J, N_theta) or (N_theta,); X: (N, input_dim) or (input_dim,).
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != arch.input_dim:
        raise ValueError(f"points have dim {X.shape[1]}, expected {arch.input_dim}")
    return _propagate(unflatten_theta(arch, theta), X, tuple(directions))


def forward_batch(arch: MlpArchitecture, theta: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Values only: (J, N, output_dim)."""
    return forward_jet_batch(arch, theta, X, ()).value


def forward(arch: MlpArchitecture, theta_block: np.ndarray, x) -> np.ndarray:
    """Single member, single point -> (output_dim,) values."""
    return forward_batch(arch, theta_block, np.asarray(x, dtype=float))[0, 0]


def forward_jet(
    arch: MlpArchitecture, theta_block: np.ndarray, x, direction: int
) -> list[Jet2]:
    """Single member, single point -> output_dim jets along one direction.

    The value channel is computed by the exact same operation sequence as
    `forward`, so the two agree bitwise.
    """
    bundle = forward_jet_batch(arch, theta_block, np.asarray(x, dtype=float), (direction,))
    return [
        Jet2(bundle.value[0, 0, c], bundle.d1[0, 0, 0, c], bundle.d2[0, 0, 0, c])
        for c in range(arch.output_dim)
    ]

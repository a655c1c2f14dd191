"""Dense linear algebra and seeded random streams for the ensemble update.

Everything here is small and dense on purpose: the observation dimension
never exceeds a few hundred in the benchmark suite, so a Cholesky solve
with escalating jitter is both the simplest and the fastest option.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class NotSymmetric(ValueError):
    """Matrix handed to spd_solve is not symmetric within tolerance."""


class SingularAfterJitter(np.linalg.LinAlgError):
    """Cholesky failed at every jitter level."""


class EnsembleTooSmall(ValueError):
    """Sample covariance needs at least two ensemble members."""


_JITTER_LEVELS = (0.0, 1e-10, 1e-8, 1e-6)


@dataclass(frozen=True)
class RngStream:
    """Reproducible, splittable random stream.

    Two streams with identical (seed, path) produce identical sequences;
    distinct paths are statistically independent.  ``child`` extends the
    path, which is how per-member / per-iteration / per-purpose streams
    are derived without any shared state.
    """

    seed: int
    path: tuple[int, ...] = ()

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.path + ids)

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.default_rng(seq)


def standard_normal(stream: RngStream, n: int) -> np.ndarray:
    """Draw n i.i.d. N(0,1) samples from the given stream."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return stream.generator().standard_normal(n)


def spd_solve(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve A X = B for symmetric positive (semi-)definite A.

    Uses a Cholesky factorization; on failure the diagonal is jittered by
    delta * trace(A)/n for delta in 1e-10, 1e-8, 1e-6 before giving up.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got shape {A.shape}")
    if B.shape[0] != A.shape[0]:
        raise ValueError("B row count must equal A dimension")
    scale = np.abs(A).max()
    if scale > 0 and np.abs(A - A.T).max() > 1e-10 * scale:
        raise NotSymmetric("A is not symmetric within 1e-10 relative")

    n = A.shape[0]
    base = np.trace(A) / n if n else 0.0
    for delta in _JITTER_LEVELS:
        try:
            c, low = scipy.linalg.cho_factor(
                A + delta * base * np.eye(n), lower=True, check_finite=False
            )
        except np.linalg.LinAlgError:
            continue
        return scipy.linalg.cho_solve((c, low), B, check_finite=False)
    raise SingularAfterJitter("Cholesky failed at every jitter level")


def cross_covariance(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Sample cross-covariance of rows of X (J x p) and Y (J x q).

    Normalized by 1/(J-1).  cross_covariance(X, X) is symmetric PSD.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y must have the same number of rows")
    J = X.shape[0]
    if J < 2:
        raise EnsembleTooSmall(f"need J >= 2 ensemble members, got {J}")
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    return (Xc.T @ Yc) / (J - 1)

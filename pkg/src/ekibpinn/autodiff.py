"""Second-order forward-mode AD along a single direction.

A Jet2 carries (value, first derivative, second derivative) of a scalar
expression with respect to one seeded input direction.  Components may be
floats or numpy arrays of matching shape, so the same rules drive both
the scalar API and vectorized ensemble evaluation.

Mixed partials are deliberately unsupported: every benchmark operator
needs only pure derivatives (u_x, u_xx, u_t, Laplacians), and a Laplacian
is d independent single-direction passes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DivisionByZero(ZeroDivisionError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class Jet2:
    v: object  # value
    d1: object = 0.0  # first directional derivative
    d2: object = 0.0  # second directional derivative

    @staticmethod
    def constant(c):
        return Jet2(c, 0.0, 0.0)

    def _coerce(self, other):
        return other if isinstance(other, Jet2) else Jet2.constant(other)

    def __add__(self, other):
        o = self._coerce(other)
        return Jet2(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.v, -self.d1, -self.d2)

    def __sub__(self, other):
        o = self._coerce(other)
        return Jet2(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        return Jet2(
            self.v * o.v,
            self.d1 * o.v + self.v * o.d1,
            self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if np.any(o.v == 0):
            raise DivisionByZero("jet division by zero value")
        w = 1.0 / o.v
        v = self.v * w
        d1 = (self.d1 - v * o.d1) * w
        d2 = (self.d2 - 2.0 * d1 * o.d1 - v * o.d2) * w
        return Jet2(v, d1, d2)

    def __rtruediv__(self, other):
        return self._coerce(other) / self


def jet_arith(a: Jet2, b: Jet2, op: str) -> Jet2:
    """Binary arithmetic on jets: op in {add, sub, mul, div}."""
    try:
        return {
            "add": Jet2.__add__,
            "sub": Jet2.__sub__,
            "mul": Jet2.__mul__,
            "div": Jet2.__truediv__,
        }[op](a, b)
    except KeyError:
        raise ValueError(f"unknown op {op!r}") from None


def _chain(a: Jet2, f, f1, f2) -> Jet2:
    """Univariate chain rule: (f(v), f'(v) d1, f''(v) d1^2 + f'(v) d2)."""
    v = a.v
    return Jet2(f(v), f1(v) * a.d1, f2(v) * a.d1 * a.d1 + f1(v) * a.d2)


def jet_tanh(a: Jet2) -> Jet2:
    t = np.tanh(a.v)
    s = 1.0 - t * t  # tanh'
    return Jet2(t, s * a.d1, -2.0 * t * s * a.d1 * a.d1 + s * a.d2)


def jet_sin(a: Jet2) -> Jet2:
    return _chain(a, np.sin, np.cos, lambda v: -np.sin(v))


def jet_cos(a: Jet2) -> Jet2:
    return _chain(a, np.cos, lambda v: -np.sin(v), lambda v: -np.cos(v))


def jet_exp(a: Jet2) -> Jet2:
    return _chain(a, np.exp, np.exp, np.exp)


def jet_log(a: Jet2) -> Jet2:
    if np.any(np.asarray(a.v) <= 0):
        raise DomainError("log of non-positive jet value")
    return _chain(a, np.log, lambda v: 1.0 / v, lambda v: -1.0 / (v * v))


def jet_square(a: Jet2) -> Jet2:
    return Jet2(a.v * a.v, 2.0 * a.v * a.d1, 2.0 * (a.d1 * a.d1 + a.v * a.d2))


_FUNCS = {
    "tanh": jet_tanh,
    "sin": jet_sin,
    "cos": jet_cos,
    "exp": jet_exp,
    "log": jet_log,
    "square": jet_square,
}


def jet_func(a: Jet2, f: str) -> Jet2:
    """Apply a supported elementary function to a jet."""
    try:
        return _FUNCS[f](a)
    except KeyError:
        raise ValueError(f"unknown function {f!r}") from None


def directional_jet(x, direction: int) -> list[Jet2]:
    """Seed the components of a point: d1 = 1 on the chosen direction."""
    x = np.asarray(x, dtype=float)
    if not 0 <= direction < x.size:
        raise ValueError(f"direction {direction} out of range for dim {x.size}")
    return [
        Jet2(float(xk), 1.0 if k == direction else 0.0, 0.0)
        for k, xk in enumerate(x.ravel())
    ]

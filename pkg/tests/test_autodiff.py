import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ekibpinn.autodiff import (
    DivisionByZero,
    DomainError,
    Jet2,
    directional_jet,
    jet_cos,
    jet_exp,
    jet_log,
    jet_sin,
    jet_square,
    jet_tanh,
)

finite = st.floats(-3.0, 3.0, allow_nan=False)


def fd_jet(f, x0, v, h=1e-5):
    """Central-difference oracle for value / first / second directional derivative."""
    g = lambda t: f(x0 + t * v)
    d1 = (g(h) - g(-h)) / (2 * h)
    d2 = (g(h) - 2 * g(0.0) + g(-h)) / h**2
    return g(0.0), d1, d2


def seed_jet(x0, v):
    return Jet2(x0, v, 0.0)


class TestArithmetic:
    def test_add_constants_and_jets(self):
        a = Jet2(1.0, 2.0, 3.0)
        b = Jet2(10.0, 20.0, 30.0)
        s = a + b
        assert (s.v, s.d1, s.d2) == (11.0, 22.0, 33.0)
        s = a + 5.0
        assert (s.v, s.d1, s.d2) == (6.0, 2.0, 3.0)
        s = 5.0 + a
        assert (s.v, s.d1, s.d2) == (6.0, 2.0, 3.0)

    def test_sub_neg(self):
        a = Jet2(1.0, 2.0, 3.0)
        b = Jet2(0.5, 1.0, 7.0)
        d = a - b
        assert (d.v, d.d1, d.d2) == (0.5, 1.0, -4.0)
        n = -a
        assert (n.v, n.d1, n.d2) == (-1.0, -2.0, -3.0)
        r = 1.0 - a
        assert (r.v, r.d1, r.d2) == (0.0, -2.0, -3.0)

    def test_mul_product_rule_hand(self):
        # f = x*x at x=3 along v=1: value 9, slope 6, curvature 2
        x = seed_jet(3.0, 1.0)
        y = x * x
        assert (y.v, y.d1, y.d2) == (9.0, 6.0, 2.0)

    def test_div_hand(self):
        # f = 1/x at x=2: value 0.5, slope -0.25, curvature 0.25
        x = seed_jet(2.0, 1.0)
        y = 1.0 / x
        assert np.allclose([y.v, y.d1, y.d2], [0.5, -0.25, 0.25])

    def test_div_by_zero(self):
        with pytest.raises(DivisionByZero):
            Jet2(1.0, 0.0, 0.0) / Jet2(0.0, 1.0, 0.0)

    @settings(max_examples=50, deadline=None)
    @given(finite, finite, finite, finite, finite, finite)
    def test_mul_matches_fd(self, av, a1, a2, bv, b1, b2):
        a = Jet2(av, a1, a2)
        b = Jet2(bv, b1, b2)
        p = a * b
        # product rule identities checked against expanded polynomial in t:
        # (av + a1 t + a2 t^2/2)(bv + b1 t + b2 t^2/2)
        assert p.v == pytest.approx(av * bv)
        assert p.d1 == pytest.approx(av * b1 + a1 * bv)
        assert p.d2 == pytest.approx(av * b2 + 2 * a1 * b1 + a2 * bv)


UNARY_CASES = [
    (jet_tanh, np.tanh, (-2.0, 2.0)),
    (jet_sin, np.sin, (-3.0, 3.0)),
    (jet_cos, np.cos, (-3.0, 3.0)),
    (jet_exp, np.exp, (-2.0, 2.0)),
    (jet_log, np.log, (0.1, 5.0)),
    (jet_square, np.square, (-3.0, 3.0)),
]


class TestUnaryFunctions:
    @pytest.mark.parametrize("jf,npf,dom", UNARY_CASES)
    def test_matches_finite_differences(self, jf, npf, dom):
        rng = np.random.default_rng(11)
        for _ in range(20):
            x0 = rng.uniform(*dom)
            v = rng.uniform(-2.0, 2.0)
            got = jf(seed_jet(x0, v))
            ev, e1, e2 = fd_jet(npf, x0, v)
            assert got.v == pytest.approx(ev, abs=1e-12)
            assert got.d1 == pytest.approx(e1, rel=1e-6, abs=1e-6)
            assert got.d2 == pytest.approx(e2, rel=1e-4, abs=1e-4)

    def test_exp_chain_hand(self):
        # f = exp(x^2) at x=1 along v=1: f'=2x e^{x^2}=2e, f''=(4x^2+2)e^{x^2}=6e
        x = seed_jet(1.0, 1.0)
        y = jet_exp(x * x)
        e = np.e
        assert np.allclose([y.v, y.d1, y.d2], [e, 2 * e, 6 * e], rtol=1e-12)

    def test_log_domain_error(self):
        with pytest.raises(DomainError):
            jet_log(Jet2(-1.0, 1.0, 0.0))

    def test_array_components(self):
        x = Jet2(np.array([0.0, 1.0]), np.array([1.0, 1.0]), np.array([0.0, 0.0]))
        y = jet_sin(x)
        assert np.allclose(y.v, np.sin([0.0, 1.0]))
        assert np.allclose(y.d1, np.cos([0.0, 1.0]))
        assert np.allclose(y.d2, -np.sin([0.0, 1.0]))


class TestDirectionalJet:
    def test_seeds_chosen_coordinate(self):
        jets = directional_jet([0.3, 0.7], 1)
        assert (jets[0].v, jets[0].d1, jets[0].d2) == (0.3, 0.0, 0.0)
        assert (jets[1].v, jets[1].d1, jets[1].d2) == (0.7, 1.0, 0.0)

    def test_direction_out_of_range(self):
        with pytest.raises(ValueError):
            directional_jet([1.0], 1)

    def test_composite_function_fd(self):
        def f(x):
            return np.tanh(x) * np.sin(2 * x) + x**2 / (1 + np.exp(x))

        def fj(x):
            return jet_tanh(x) * jet_sin(2.0 * x) + (x * x) / (1.0 + jet_exp(x))

        for x0 in [-1.5, -0.3, 0.7, 2.1]:
            j = fj(directional_jet([x0], 0)[0])
            ev, e1, e2 = fd_jet(f, x0, 1.0)
            assert j.v == pytest.approx(ev, rel=1e-12)
            assert j.d1 == pytest.approx(e1, rel=1e-6, abs=1e-8)
            assert j.d2 == pytest.approx(e2, rel=1e-4, abs=1e-5)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-2.0, 2.0, allow_nan=False), st.floats(0.1, 2.0))
    def test_scaled_seed_scales_derivatives(self, x0, c):
        # propagating a seed with d1 = c scales f' by c and f'' by c^2
        j1 = jet_tanh(Jet2(x0, 1.0, 0.0))
        jc = jet_tanh(Jet2(x0, c, 0.0))
        assert jc.d1 == pytest.approx(c * j1.d1, rel=1e-10, abs=1e-12)
        assert jc.d2 == pytest.approx(c * c * j1.d2, rel=1e-10, abs=1e-12)

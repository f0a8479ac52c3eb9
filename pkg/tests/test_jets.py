"""Tests for truncated Taylor jets."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from conelag import jets as J
from conelag.jets import Jet

coord = st.floats(min_value=-1.5, max_value=1.5, allow_nan=False)


def point(x, y, order=4):
    return Jet.variables(np.array([x]), np.array([y]), order)


class TestLayout:
    def test_variables_seed_unit_derivatives(self):
        x, y = point(0.3, -0.2, 2)
        assert x.derivative(1, 0)[0] == 1.0 and x.derivative(0, 1)[0] == 0.0
        assert y.derivative(0, 1)[0] == 1.0 and y.derivative(1, 0)[0] == 0.0

    def test_polynomial_derivatives(self):
        x, y = point(0.5, 2.0, 3)
        f = x**2 * y + 3 * y**3
        # f_x = 2xy, f_yy = 18y, f_xxy = 2
        assert f.derivative(1, 0)[0] == pytest.approx(2.0)
        assert f.derivative(0, 2)[0] == pytest.approx(36.0)
        assert f.derivative(2, 1)[0] == pytest.approx(2.0)

    def test_truncate_and_order_mixing(self):
        x, y = point(0.1, 0.2, 4)
        a = J.exp(x) * J.sin(y)
        b = a.truncate(2) + a
        assert b.order == 2
        np.testing.assert_allclose(b.value, 2 * a.value)

    def test_d_lowers_order(self):
        x, y = point(0.3, 0.4, 3)
        f = J.sin(x * y)
        fx = f.d(0)
        assert fx.order == 2
        np.testing.assert_allclose(fx.derivative(0, 1), f.derivative(1, 1))

    def test_cannot_raise_order(self):
        x, _ = point(0.0, 0.0, 2)
        with pytest.raises(ValueError):
            x.truncate(3)


class TestElementary:
    def test_exp_sin_mixed_derivative(self):
        x, y = point(0.7, 0.3, 4)
        f = J.exp(x) * J.sin(y)
        assert f.derivative(2, 1)[0] == pytest.approx(np.exp(0.7) * np.cos(0.3))

    def test_sech_tanh_finite_far_out(self):
        x, _ = Jet.variables(np.array([-800.0, 800.0]), np.array([0.0, 0.0]), 3)
        s, t = J.sech(x), J.tanh(x)
        assert np.all(np.isfinite(s.c)) and np.all(np.isfinite(t.c))
        np.testing.assert_allclose(t.value, [-1.0, 1.0])

    def test_sech_derivative(self):
        x, _ = point(0.4, 0.0, 3)
        s = J.sech(x)
        # d/dx sech = -sech tanh
        assert s.derivative(1, 0)[0] == pytest.approx(-np.tanh(0.4) / np.cosh(0.4))

    def test_plain_arrays_fall_back(self):
        a = np.linspace(-2, 2, 5)
        np.testing.assert_allclose(J.sech(a), 1 / np.cosh(a))
        np.testing.assert_allclose(J.tanh(a), np.tanh(a))

    @pytest.mark.parametrize("m", [0.0, 0.36, 0.9, 1.69])
    def test_jacobi_matches_scipy_and_odes(self, m):
        u0 = np.array([0.3, -0.7])
        x, _ = Jet.variables(u0, 0 * u0, 4)
        sn, cn, dn = J.jacobi(x, m)
        if m <= 1:
            ref = special.ellipj(u0, m)
            np.testing.assert_allclose(sn.value, ref[0], atol=1e-13)
            np.testing.assert_allclose(cn.value, ref[1], atol=1e-13)
        # sn' = cn dn and dn' = -m sn cn
        np.testing.assert_allclose(sn.derivative(1, 0), (cn * dn).value, atol=1e-12)
        np.testing.assert_allclose(dn.derivative(1, 0), (-m * sn * cn).value, atol=1e-12)
        np.testing.assert_allclose((sn * sn + cn * cn).c[1:], 0.0, atol=1e-12)

    def test_complex_jets(self):
        x, y = point(0.2, 0.1, 2)
        z = x + 1j * y
        w = z * z
        np.testing.assert_allclose(w.real.value, 0.2**2 - 0.1**2)
        np.testing.assert_allclose(w.imag.derivative(0, 1), 2 * 0.2)
        np.testing.assert_allclose(z.conj().imag.value, -0.1)

    def test_integral_jet(self):
        x, _ = point(0.5, 0.0, 3)
        F = J.integral(x, np.array([np.sin(0.5)]), J.cos)
        assert F.value[0] == pytest.approx(np.sin(0.5))
        assert F.derivative(2, 0)[0] == pytest.approx(-np.sin(0.5))
        assert F.derivative(3, 0)[0] == pytest.approx(-np.cos(0.5))


class TestAlgebraicProperties:
    @settings(max_examples=40, deadline=None)
    @given(coord, coord)
    def test_product_rule(self, a, b):
        x, y = point(a, b, 3)
        f, g = J.sin(x + 2 * y), J.exp(0.3 * x * y)
        lhs = (f * g).d(0)
        rhs = f.d(0) * g.truncate(2) + f.truncate(2) * g.d(0)
        np.testing.assert_allclose(lhs.c, rhs.c, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(coord, coord)
    def test_division_inverts_multiplication(self, a, b):
        x, y = point(a, b, 4)
        f = 1 + x * x + J.cos(y)
        g = 2 + J.sin(x * y)
        np.testing.assert_allclose(((f * g) / g).c, f.c, atol=1e-11)

    @settings(max_examples=40, deadline=None)
    @given(coord, coord)
    def test_log_exp_and_sqrt_roundtrips(self, a, b):
        x, y = point(a, b, 4)
        f = 1.5 + J.sin(x) * J.cos(y)
        np.testing.assert_allclose(J.log(J.exp(f)).c, f.c, atol=1e-11)
        np.testing.assert_allclose((J.sqrt(f) ** 2).c, f.c, atol=1e-11)

    @settings(max_examples=30, deadline=None)
    @given(coord, coord)
    def test_sech_tanh_identity(self, a, b):
        x, y = point(a, b, 4)
        u = 2 * x - y
        np.testing.assert_allclose((J.sech(u) ** 2 + J.tanh(u) ** 2).c[1:], 0.0, atol=1e-11)

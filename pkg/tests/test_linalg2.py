"""Tests for the 2x2 tensor helpers."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from conelag import linalg2 as L

entry = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)


def spd(a, b, c):
    # A A^T + I is symmetric positive definite
    A = np.array([[a, b], [c, a - b]])
    return A @ A.T + np.eye(2)


class TestAlgebra:
    def test_inverse_and_det(self):
        A = L.from_array(np.array([[2.0, 1.0], [0.5, 3.0]]))
        np.testing.assert_allclose(L.values(L.mul(A, L.inv(A))), np.eye(2), atol=1e-15)
        assert L.det(A) == 5.5

    @settings(max_examples=50, deadline=None)
    @given(entry, entry, entry, entry, entry, entry)
    def test_sqrt_pos_squares_back(self, a, b, c, d, e, f):
        g = spd(a, b, c)
        h = spd(d, e, f)
        M = L.mul(L.inv(L.from_array(g)), L.from_array(h))
        R = L.sqrt_pos(M)
        np.testing.assert_allclose(L.values(L.mul(R, R)), L.values(M), rtol=1e-9, atol=1e-10)
        # the root is g-self-adjoint: g R symmetric
        gR = L.values(L.mul(L.from_array(g), R))
        np.testing.assert_allclose(gR[0, 1], gR[1, 0], atol=1e-9 * (1 + np.abs(gR).max()))

    @settings(max_examples=50, deadline=None)
    @given(entry, entry, entry, entry, entry)
    def test_norm_form_is_chart_invariant(self, a, b, c, s, t):
        g = spd(a, b, c)
        T = np.array([[s, t], [t, -s + 0.3]])
        P = np.array([[1.0, 0.4], [-0.2, 1.5]])
        n1 = L.norm_form(L.from_array(T), L.from_array(g))
        n2 = L.norm_form(L.from_array(P.T @ T @ P), L.from_array(P.T @ g @ P))
        np.testing.assert_allclose(n1, n2, rtol=1e-9, atol=1e-12)

    def test_sym_eig_and_rotation(self):
        g = L.from_array(np.array([[2.0, 0.3], [0.3, 1.0]]))
        B = L.mul(L.inv(g), L.from_array(np.array([[0.5, 0.2], [0.2, -0.4]])))
        lo, hi, e = L.sym_eig(B, g)
        Be = L.matvec(B, e)
        np.testing.assert_allclose(Be, hi * np.asarray(e), atol=1e-14)
        assert abs(L.dot(e, e, g) - 1) < 1e-14
        ep = L.rotate_quarter(e, g)
        assert abs(L.dot(e, ep, g)) < 1e-14 and abs(L.dot(ep, ep, g) - 1) < 1e-14

    def test_gen_eigvals(self):
        G = L.from_array(np.diag([4.0, 1.0]))
        H = L.from_array(np.eye(2))
        lo, hi = L.gen_eigvals(G, H)
        assert (lo, hi) == (1.0, 4.0)

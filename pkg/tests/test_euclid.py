"""Tests for potentials, the immersions sigma and varsigma, recovery and limits."""

import numpy as np
import pytest

from conelag import linalg2 as L
from conelag.chart import ChartDomain, Tensor11Field, codazzi_norm
from conelag.cone import cover_domain
from conelag.euclid import (
    ConditioningError,
    CurvatureCertificateError,
    GateError,
    Potential,
    SingularImmersionError,
    build_sigma,
    build_varsigma,
    codazzi_from_potential,
    dev_kernel,
    equivariance_checks,
    immersion_identity_checks,
    projection_metric,
    puncture_limit_check,
    recover_potential,
    roundtrip_potential,
)
from conelag.registry import DEFAULT_POTENTIAL

ALPHA = 0.6
DOM = cover_domain(ALPHA, (12, 24), decks=3, t_min=-8.0, t_max=-0.5)
PATCH = ChartDomain.logpolar(-3.0, -0.5, (24, 24), theta_max=2.0)
POTENTIALS = ["1", "1+0.3*dev1", DEFAULT_POTENTIAL, "2+0.2*sech(0.6*t)"]


def tensor_values(A, d):
    X, Y = d.grid()
    return L.values(A.values(X, Y))


class TestCodazziFromPotential:
    def test_constant_gives_identity(self):
        A = tensor_values(codazzi_from_potential(Potential("1", ALPHA)), DOM)
        np.testing.assert_allclose(A, np.broadcast_to(np.eye(2)[:, :, None, None], A.shape), atol=1e-13)

    @pytest.mark.parametrize("k", ["dev1", "dev2", "dev3"])
    def test_kernel_elements(self, k):
        A = tensor_values(codazzi_from_potential(Potential(k, ALPHA)), DOM)
        assert np.abs(A).max() < 1e-12

    def test_superposition_with_kernel(self):
        A1 = tensor_values(codazzi_from_potential(Potential("1+0.1*dev1", ALPHA)), DOM)
        A0 = tensor_values(codazzi_from_potential(Potential("1", ALPHA)), DOM)
        np.testing.assert_allclose(A1, A0, atol=1e-12)

    @pytest.mark.parametrize("expr", POTENTIALS)
    def test_codazzi_and_self_adjoint(self, expr):
        u = Potential(expr, ALPHA)
        A = codazzi_from_potential(u)
        X, Y = DOM.grid()
        assert codazzi_norm(u.metric, A, (X, Y)).max() < 1e-8
        Av, gv = A.values(X, Y), u.metric.values(X, Y)
        low = L.values(L.mul(gv, Av))
        assert np.abs(low[0, 1] - low[1, 0]).max() < 1e-12 * np.abs(low).max()

    def test_refuses_uncertified_metric(self):
        u = Potential("1", ALPHA)
        with pytest.raises(CurvatureCertificateError):
            codazzi_from_potential(u, u.metric, certified=False)

    def test_bad_expression(self):
        with pytest.raises(ValueError):
            Potential("import os", ALPHA)


class TestImmersions:
    def test_unit_potential_is_dev(self):
        u = Potential("1", ALPHA)
        X, Y = DOM.grid()
        dev = np.stack(u.dev.values(X, Y))
        np.testing.assert_allclose(np.stack(build_sigma(u).map.values(X, Y)), dev, atol=1e-14)
        np.testing.assert_allclose(np.stack(build_varsigma(u).map.values(X, Y)), dev, atol=1e-14)

    def test_constant_potential_scales(self):
        u = Potential("2.5", ALPHA)
        X, Y = DOM.grid()
        np.testing.assert_allclose(np.stack(build_sigma(u).map.values(X, Y)), 2.5 * np.stack(u.dev.values(X, Y)),
                                   atol=1e-14)

    def test_varsigma_is_midpoint(self):
        u = Potential(DEFAULT_POTENTIAL, ALPHA)
        X, Y = DOM.grid()
        s = np.stack(build_sigma(u).map.values(X, Y))
        v = np.stack(build_varsigma(u).map.values(X, Y))
        np.testing.assert_allclose(v, 0.5 * (s + np.stack(u.dev.values(X, Y))), atol=1e-14)

    @pytest.mark.parametrize("expr", ["1", "2+0.2*sech(0.6*t)", "1+0.1*dev3**2"])
    def test_equivariance_for_invariant_potentials(self, expr):
        u = Potential(expr, ALPHA)
        assert u.deck_invariant(DOM)
        for stats in equivariance_checks(u, DOM).values():
            assert stats.max < 1e-10

    def test_generic_potential_not_invariant(self):
        assert not Potential("1+0.3*dev1", ALPHA).deck_invariant(DOM)

    def test_rank_drop_refused(self):
        u = Potential("dev1", ALPHA)
        with pytest.raises(SingularImmersionError):
            immersion_identity_checks(u, DOM)


class TestIdentityChecks:
    def test_unit_potential(self):
        res = immersion_identity_checks(Potential("1", ALPHA), DOM)
        for name in ("sigma_normal", "sigma_first_form", "sigma_shape", "varsigma_first_form"):
            assert res[name].max < 1e-12, name
        assert res["lawson_gauss"].max < 1e-10

    @pytest.mark.parametrize("expr", POTENTIALS[1:])
    def test_generic_potentials(self, expr):
        res = immersion_identity_checks(Potential(expr, ALPHA), DOM)
        for name in ("sigma_normal", "sigma_first_form", "sigma_shape", "varsigma_first_form"):
            assert res[name].max < 1e-8, name
        assert res["sigma_differential"].max < 1e-9
        assert res["sigma_normal_orthogonality"].max < 1e-12
        assert res["lawson_gauss"].max < 1e-7

    def test_sphere_patch(self):
        """Same bounds in the smooth case alpha = 1."""
        d = ChartDomain.logpolar(-3.0, -0.2, (10, 10), theta_max=2.0)
        res = immersion_identity_checks(Potential("1+0.1*dev1*dev2", 1.0), d)
        assert max(s.max for s in res.values()) < 1e-7


class TestRecovery:
    def test_roundtrip(self):
        rt = roundtrip_potential(Potential(DEFAULT_POTENTIAL, ALPHA), PATCH)
        assert rt["roundtrip_A"] < 1e-6
        assert rt["off_kernel"] < 1e-6 and rt["kernel_dim"] == 3

    def test_identity_tensor(self):
        u = Potential("1", ALPHA)
        A = Tensor11Field(lambda x, y: L.eye(1 + 0 * x))
        rec = recover_potential(A, u.metric, PATCH, kernel=dev_kernel(ALPHA))
        assert rec.residual < 1e-8
        P = np.stack([k(rec.X, rec.Y).ravel() for k in dev_kernel(ALPHA)], axis=1)
        diff = rec.u.ravel() - 1
        coef, *_ = np.linalg.lstsq(P, diff, rcond=None)
        assert np.linalg.norm(diff - P @ coef) / np.sqrt(diff.size) < 1e-8

    def test_non_codazzi_detected(self):
        u = Potential("1", ALPHA)
        A = Tensor11Field(lambda x, y: ((1 + 0.3 * y, 0 * x), (0 * x, 1 + 0 * x)))
        rec = recover_potential(A, u.metric, PATCH, kernel=dev_kernel(ALPHA))
        assert rec.residual > 1e-3

    def test_missing_gauge_refused(self):
        u = Potential("1", ALPHA)
        A = codazzi_from_potential(u)
        with pytest.raises(ConditioningError):
            recover_potential(A, u.metric, PATCH)

    def test_finite_difference_method(self):
        rt = roundtrip_potential(Potential(DEFAULT_POTENTIAL, ALPHA), PATCH, method="fd2", shape=(40, 40))
        # second-order stencils: the round trip closes only to truncation error
        assert rt["roundtrip_A"] < 1e-2 and rt["equation_misfit"] < 1e-2


class TestProjection:
    def test_unit_potential_tends_to_one(self):
        u = Potential("1", ALPHA)
        Cs = [projection_metric(u, ChartDomain.logpolar(tm, tm + 1, (6, 12)))["C"] for tm in (-4.0, -8.0, -12.0)]
        assert Cs[0] > Cs[1] > Cs[2] and Cs[2] - 1 < 1e-4

    def test_finite_constant_and_sandwich(self):
        d = cover_domain(ALPHA, (12, 24), t_min=-8.0, t_max=-2.0)
        pm = projection_metric(Potential(DEFAULT_POTENTIAL, ALPHA), d)
        assert np.isfinite(pm["C"]) and pm["sandwich_ok"] and pm["sandwich_margin"] >= 0

    def test_gate(self):
        d = ChartDomain.logpolar(-4.0, 0.0, (6, 12))
        with pytest.raises(GateError):
            projection_metric(Potential("1", ALPHA), d)


class TestPunctureLimit:
    def test_unit_potential(self):
        lim = puncture_limit_check(Potential("1", ALPHA))
        np.testing.assert_allclose(lim["limit_point"], (0, 0, 1), atol=1e-12)
        assert lim["monotone"]

    def test_radial_potential_limit_on_axis(self):
        lim = puncture_limit_check(Potential("2+0.2*sech(0.6*t)", ALPHA))
        assert lim["axis_distance"] < 1e-8
        t = lim["t_sequence"].index(-8.0)
        assert lim["centre_axis_distance"][t] < 1e-8
        assert lim["deck_spread"] < 1e-10 and lim["monotone"]
        assert lim["scale"] == pytest.approx(1.5, rel=1e-6)

    def test_generic_invariant_potential(self):
        lim = puncture_limit_check(Potential("1+0.1*dev3**2", ALPHA))
        assert lim["axis_distance"] < 1e-6 and lim["monotone"]

"""Tests for chart calculus: connection, curvature, Laplacian, Codazzi, pullbacks."""

import numpy as np
import pytest

from conelag import jets as J
from conelag import linalg2 as L
from conelag.chart import (
    ChartDomain,
    ChartMap,
    ConfigurationError,
    DegenerateMetricError,
    MetricField,
    ScalarField,
    SingularMapError,
    Tensor11Field,
    christoffel,
    codazzi_jets,
    codazzi_residual,
    connection_transfer_check,
    gauss_curvature,
    hess11,
    hess11_jets,
    laplace_beltrami,
    metric_compatibility,
    pullback_metric,
    pullback_metric_3d,
)
from conelag.cone import developing_map, inverse_stereographic, spherical_cone_metric

FLAT = MetricField(lambda x, y: ((1 + 0 * x, 0 * x), (0 * x, 1 + 0 * x)), name="flat")
ROUND = spherical_cone_metric(1.0, "z")


def random_points(n=100, r=0.8, seed=0):
    rng = np.random.default_rng(seed)
    rad = rng.uniform(0.05, r, n)
    th = rng.uniform(0, 2 * np.pi, n)
    return rad * np.cos(th), rad * np.sin(th)


def hessian_tensor(g, u):
    """A = nabla grad u + u Id as a tensor field."""
    return Tensor11Field(lambda x, y: L.shift(hess11_jets(g(x, y), u(x, y)), u(x, y)), loss=2)


class TestDomain:
    def test_logpolar_excludes_puncture(self):
        with pytest.raises(ValueError):
            ChartDomain.logpolar(-2.0, 0.5, (8, 8))

    def test_empty_bounds_rejected(self):
        with pytest.raises(ValueError):
            ChartDomain.rectangle(1.0, 1.0, 0.0, 1.0, (8, 8))

    def test_spacing_and_grid(self):
        d = ChartDomain.logpolar(-4.0, 0.0, (5, 9))
        assert d.spacing == (1.0, 2 * np.pi / 8)
        T, TH = d.grid()
        assert T.shape == (5, 9) and T[1, 0] == -3.0 and d.periodic


class TestChristoffel:
    def test_flat_vanishes(self):
        np.testing.assert_allclose(christoffel(FLAT, (0.3, -0.2)), 0.0)

    def test_round_vanishes_at_origin(self):
        np.testing.assert_allclose(christoffel(ROUND, (0.0, 0.0)), 0.0, atol=1e-15)

    def test_cone_matches_central_differences(self):
        g = spherical_cone_metric(0.5, "z")
        p = (np.array([0.5]), np.array([0.0]))
        exact = christoffel(g, p)
        errs = [np.abs(christoffel(g, p, backend="fd", h=h) - exact).max() for h in (1e-2, 5e-3)]
        assert errs[1] < 1e-3
        assert 1.7 <= np.log2(errs[0] / errs[1]) <= 2.3

    def test_lower_symmetry(self):
        G = christoffel(ROUND, random_points(10))
        np.testing.assert_allclose(G[:, 0, 1], G[:, 1, 0])

    @pytest.mark.parametrize("metric", [ROUND, spherical_cone_metric(0.7, "z"), spherical_cone_metric(1.4, "z")])
    def test_metric_compatibility(self, metric):
        assert metric_compatibility(metric, random_points()).max() < 1e-10

    def test_degenerate_metric_names_point(self):
        g = MetricField(lambda x, y: ((x * x + 0 * y, 0 * x), (0 * x, 1 + 0 * x)))
        with pytest.raises(DegenerateMetricError) as err:
            christoffel(g, (np.array([0.0, 1.0]), np.array([0.5, 0.5])))
        assert err.value.point[0] == 0.0


class TestCurvature:
    def test_flat(self):
        assert gauss_curvature(FLAT, (0.2, 0.1)) == 0.0

    def test_round(self):
        assert abs(gauss_curvature(ROUND, (0.3, 0.4)) - 1) < 1e-10

    def test_spherical_cone(self):
        x, y = 0.5 * np.cos(np.linspace(0, 6, 7)), 0.5 * np.sin(np.linspace(0, 6, 7))
        assert np.abs(gauss_curvature(spherical_cone_metric(0.7, "z"), (x, y)) - 1).max() < 1e-8

    def test_backend_agreement_order(self):
        p = (np.array([0.3]), np.array([0.2]))
        errs = [abs(gauss_curvature(ROUND, p, backend="fd", h=h)[0] - 1) for h in (2e-2, 1e-2)]
        assert 1.7 <= np.log2(errs[0] / errs[1]) <= 2.3


class TestLaplacian:
    def test_flat_quadratic(self):
        u = ScalarField(lambda x, y: x * x + y * y)
        assert laplace_beltrami(FLAT, u, (0.3, 0.7)) == pytest.approx(4.0)

    def test_log_modulus_harmonic(self):
        u = ScalarField(lambda x, y: 0.5 * J.log(x * x + y * y))
        assert abs(laplace_beltrami(FLAT, u, (0.4, -0.3))) < 1e-13

    def test_constant_conformal_factor(self):
        g = MetricField.conformal(lambda x, y: 4.0 + 0 * x)
        u = ScalarField(lambda x, y: x * x)
        assert laplace_beltrami(g, u, (0.1, 0.2)) == pytest.approx(0.5)

    def test_conformal_formula(self):
        f = lambda x, y: 0.3 * x - 0.2 * y * y
        g = MetricField.conformal(lambda x, y: J.exp(2 * f(x, y)))
        u = ScalarField(lambda x, y: J.sin(x) * y)
        x, y = random_points(20)
        flat_lap = -J.sin(x) * y
        np.testing.assert_allclose(laplace_beltrami(g, u, (x, y)), np.exp(-2 * f(x, y)) * flat_lap, atol=1e-13)


class TestHessian:
    def test_flat_examples(self):
        np.testing.assert_allclose(hess11(FLAT, ScalarField(lambda x, y: x * x), (0.1, 0.2)), [[2, 0], [0, 0]])
        np.testing.assert_allclose(hess11(FLAT, ScalarField(lambda x, y: x * y), (0.1, 0.2)), [[0, 1], [1, 0]])

    def test_trace_is_laplacian(self):
        u = ScalarField(lambda x, y: J.exp(x) * J.cos(2 * y))
        p = random_points(50)
        H = hess11(ROUND, u, p)
        np.testing.assert_allclose(H[0, 0] + H[1, 1], laplace_beltrami(ROUND, u, p), atol=1e-12)

    def test_linear_coordinate_of_sphere_in_kernel(self):
        u = ScalarField(lambda x, y: inverse_stereographic(x, y)[2])
        p = random_points(50)
        H = hess11(ROUND, u, p)
        A = H + np.asarray(u.values(*p))[None, None] * np.eye(2)[:, :, None]
        assert np.abs(A).max() < 1e-9


class TestCodazzi:
    def test_identity_is_codazzi(self):
        A = Tensor11Field(lambda x, y: L.eye(1 + 0 * x))
        np.testing.assert_allclose(codazzi_residual(ROUND, A, random_points(10)), 0.0, atol=1e-15)

    def test_hessian_tensor_on_round_patch(self):
        u = lambda x, y: 1 + 0.3 * x * x * y + J.sin(y)
        A = hessian_tensor(ROUND, u)
        assert np.abs(codazzi_residual(ROUND, A, random_points(30))).max() < 1e-8

    def test_hand_expanded_flat_examples(self):
        # d(A dy)_x - d(A dx)_y for A = diag(a(x, y), 1): r = (-a_y, 0)
        p = random_points(5)
        A1 = Tensor11Field(lambda x, y: ((1 + x, 0 * x), (0 * x, 1 + 0 * x)))
        np.testing.assert_allclose(codazzi_residual(FLAT, A1, p), 0.0, atol=1e-15)
        A2 = Tensor11Field(lambda x, y: ((1 + y, 0 * x), (0 * x, 1 + 0 * x)))
        r = codazzi_residual(FLAT, A2, p)
        np.testing.assert_allclose(r[0], -1.0)
        np.testing.assert_allclose(r[1], 0.0)

    def test_missing_jets(self):
        """Jets of too low an order are refused."""
        g = FLAT.jets(np.array([0.1]), np.array([0.1]), 0)
        A = Tensor11Field(lambda x, y: L.eye(1 + 0 * x)).jets(np.array([0.1]), np.array([0.1]), 0)
        with pytest.raises(ConfigurationError):
            codazzi_jets(g, A)

    def test_tensoriality_under_reparametrization(self):
        # chart psi(s, t) = (s + 0.3 t^2, t); r' = det(Dpsi) Dpsi^-1 r(psi)
        a = lambda x, y: 1 + 0.5 * y + 0.2 * x * y
        A = lambda x, y: ((a(x, y), 0.1 * x + 0 * y), (0 * x, 1 + 0 * x))
        psi = lambda s, t: (s + 0.3 * t * t, t)

        def Dpsi(s, t):
            return ((1 + 0 * s, 0.6 * t), (0 * s, 1 + 0 * t))

        gp = MetricField(lambda s, t: L.sandwich(Dpsi(s, t), ((1 + 0 * s, 0 * s), (0 * s, 1 + 0 * s))))
        Ap = Tensor11Field(lambda s, t: L.mul(L.inv(Dpsi(s, t)), L.mul(A(*psi(s, t)), Dpsi(s, t))))
        s, t = random_points(20)
        x, y = psi(s, t)
        r = codazzi_residual(FLAT, Tensor11Field(A), (x, y))
        rp = codazzi_residual(gp, Ap, (s, t))
        D = Dpsi(s, t)
        expect = L.matvec(L.inv(D), (r[0], r[1]))
        np.testing.assert_allclose(rp, np.stack(expect) * L.det(D), atol=1e-8)


class TestPullback:
    def test_identity(self):
        p = random_points(5)
        np.testing.assert_allclose(pullback_metric(ChartMap.identity(), ROUND, p), L.values(ROUND.values(*p)))

    def test_scaling(self):
        phi = ChartMap(lambda x, y: (2 * x, 2 * y))
        np.testing.assert_allclose(pullback_metric(phi, FLAT, (0.1, 0.3)), 4 * np.eye(2))

    def test_dev_is_local_isometry(self):
        g = spherical_cone_metric(0.6, "logpolar")
        T, TH = ChartDomain.logpolar(-4, 0, (20, 20)).grid()
        pulled = L.values(pullback_metric_3d(developing_map(0.6)).values(T, TH))
        np.testing.assert_allclose(pulled, L.values(g.values(T, TH)), atol=1e-9)

    def test_rank_deficient_map(self):
        phi = ChartMap(lambda x, y: (x + y, x + y))
        with pytest.raises(SingularMapError):
            pullback_metric(phi, FLAT, (0.1, 0.2))


class TestConnectionTransfer:
    def test_identity_tensor(self):
        A = Tensor11Field(lambda x, y: L.eye(1 + 0 * x))
        assert connection_transfer_check(ROUND, A, random_points(10)).max() < 1e-13

    def test_homothety(self):
        A = Tensor11Field(lambda x, y: L.scale(2.0, L.eye(1 + 0 * x)))
        assert connection_transfer_check(ROUND, A, random_points(10)).max() < 1e-10

    def test_hessian_tensor(self):
        A = hessian_tensor(ROUND, lambda x, y: 2 + 0.2 * x * x - 0.1 * y + 0.05 * x * y)
        assert connection_transfer_check(ROUND, A, random_points(20, r=0.5)).max() < 1e-7

    def test_singular_tensor(self):
        A = Tensor11Field(lambda x, y: ((1 + 0 * x, 0 * x), (0 * x, 0 * x)))
        with pytest.raises(SingularMapError):
            connection_transfer_check(FLAT, A, (0.1, 0.1))

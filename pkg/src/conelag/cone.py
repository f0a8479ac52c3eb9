"""Cone metrics, the spherical cone model, and its developing map.

Log-polar coordinates ``(t, theta)`` with ``z = exp(t + i theta)`` are used on
the universal cover of the punctured disc; ``theta`` is not reduced mod 2 pi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import jets as J
from . import linalg2 as L
from .chart import ChartDomain, ChartMap, MetricField, gauss_curvature, pullback_metric_3d
from .expr import parse
from .report import ResidualStats

F_BOUND = 1e3


@dataclass
class ConeData:
    alpha: float
    f_expression: str | None = None
    domain: ChartDomain | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"cone parameter alpha must be positive, got {self.alpha}")
        if self.domain is None:
            self.domain = ChartDomain.logpolar(-8.0, 0.0, (32, 64))
        if self.domain.kind != "logpolar":
            raise ValueError("cone data lives on a log-polar domain")
        self._f = None
        if self.f_expression:
            fxy, _ = parse(self.f_expression, ("x", "y"))
            self._f = fxy
            T, TH = self.domain.grid()
            vals = np.asarray(fxy(np.exp(T) * np.cos(TH), np.exp(T) * np.sin(TH)), float)
            vals = np.broadcast_to(vals, T.shape)
            if not np.all(np.isfinite(vals)) or np.max(np.abs(vals)) > F_BOUND:
                raise ValueError(f"conformal factor f is not bounded on the domain (max |f| = {np.max(np.abs(vals)):.3e})")

    @property
    def is_true_cone(self) -> bool:
        return self.alpha != 1.0

    @property
    def cone_angle(self) -> float:
        return 2 * np.pi * self.alpha

    def f(self, x, y):
        if self._f is None:
            return 0 * x
        return self._f(x, y) + 0 * x


def cone_metric(c: ConeData, chart: str = "z") -> MetricField:
    """e^{2f}|z|^{2a-2}|dz|^2 in the z-chart, or e^{2f}e^{2at}(dt^2+dtheta^2) in log-polar."""
    a = c.alpha
    if chart == "z":
        def fn(x, y):
            e = J.exp(2 * c.f(x, y)) * J.power(x * x + y * y, a - 1)
            return ((e, 0 * e), (0 * e, e))
    elif chart == "logpolar":
        def fn(t, th):
            r = J.exp(t)
            e = J.exp(2 * c.f(r * J.cos(th), r * J.sin(th)) + 2 * a * t)
            return ((e, 0 * e), (0 * e, e))
    else:
        raise ValueError(f"unknown chart {chart!r}")
    return MetricField(fn, name=f"cone(alpha={a})")


def spherical_cone_metric(alpha: float, chart: str = "z") -> MetricField:
    """4a^2|z|^{2a-2}/(1+|z|^{2a})^2 |dz|^2, or a^2 sech^2(a t)(dt^2+dtheta^2) in log-polar."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    a = float(alpha)
    if chart == "z":
        def fn(x, y):
            r2 = x * x + y * y
            e = 4 * a * a * J.power(r2, a - 1) / (1 + J.power(r2, a)) ** 2
            return ((e, 0 * e), (0 * e, e))
    elif chart == "logpolar":
        def fn(t, th):
            e = a * a * J.sech(a * t) ** 2 + 0 * th
            return ((e, 0 * e), (0 * e, e))
    else:
        raise ValueError(f"unknown chart {chart!r}")
    return MetricField(fn, name=f"spherical_cone(alpha={a})")


def round_metric() -> MetricField:
    """Round metric of the unit sphere in the stereographic chart."""
    return spherical_cone_metric(1.0, "z")


def log_polar_map() -> ChartMap:
    return ChartMap(lambda t, th: (J.exp(t) * J.cos(th), J.exp(t) * J.sin(th)), name="exp")


def inverse_stereographic(u, v):
    """(2u, 2v, 1 - |w|^2)/(1 + |w|^2), sending 0 to the north pole (0, 0, 1)."""
    n = 1 + u * u + v * v
    return (2 * u / n, 2 * v / n, (1 - u * u - v * v) / n)


def developing_map(alpha: float) -> ChartMap:
    """dev(t, theta) = inverse_stereographic(exp(alpha (t + i theta)))."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    a = float(alpha)

    def fn(t, th):
        # written through sech/tanh to stay finite deep in the puncture
        s = J.sech(a * t)
        return (s * J.cos(a * th), s * J.sin(a * th), -J.tanh(a * t))

    return ChartMap(fn, name=f"dev(alpha={a})")


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def equivariance_residual(F: ChartMap, alpha: float, domain: ChartDomain) -> ResidualStats:
    """max ||F(t, theta + 2 pi) - R_{2 pi alpha} F(t, theta)|| over the grid."""
    T, TH = domain.grid()
    p = np.stack([np.asarray(v) for v in F.values(T, TH)])
    q = np.stack([np.asarray(v) for v in F.values(T, TH + 2 * np.pi)])
    R = rotation_z(2 * np.pi * alpha)
    rp = np.einsum("ij,j...->i...", R, p)
    return ResidualStats.from_values(np.linalg.norm(q - rp, axis=0))


def isometry_residual(alpha: float, domain: ChartDomain) -> ResidualStats:
    """|| dev^* g_{S^2} - g_alpha || relative to g_alpha on a cover grid."""
    dev = developing_map(alpha)
    T, TH = domain.grid()
    pulled = pullback_metric_3d(dev).jets(T, TH, 0)
    target = spherical_cone_metric(alpha, "logpolar").jets(T, TH, 0)
    return ResidualStats.from_values(L.norm_form(L.sub(pulled, target), target))


def deck_variation(metric: MetricField, domain: ChartDomain, decks: int = 3) -> float:
    """Largest change of the metric coefficients under theta -> theta + 2 pi k."""
    T, TH = domain.grid()
    g0 = L.values(metric.jets(T, TH, 0))
    worst = 0.0
    for k in range(1, decks + 1):
        gk = L.values(metric.jets(T, TH + 2 * np.pi * k, 0))
        worst = max(worst, float(np.max(np.abs(gk - g0))))
    return worst


def certify_curvature(alpha: float, n: int = 100, seed: int = 0, r_range=(0.05, 0.95)):
    """Max |K - 1| of the spherical cone metric at random regular points of the z-chart."""
    rng = np.random.default_rng(seed)
    r = rng.uniform(*r_range, size=n)
    th = rng.uniform(0, 2 * np.pi, size=n)
    K = gauss_curvature(spherical_cone_metric(alpha, "z"), (r * np.cos(th), r * np.sin(th)))
    return float(np.max(np.abs(K - 1)))


def area_annulus_exact(alpha: float, r0: float) -> float:
    """Area of {r0 <= |z| <= 1} for the spherical cone metric."""
    return 2 * np.pi * alpha * np.tanh(-alpha * np.log(r0))


def area_annulus_quadrature(alpha: float, r0: float) -> float:
    """Same area by adaptive quadrature of the z-chart density r * 4a^2 r^{2a-2}/(1+r^{2a})^2."""
    dens = lambda r: 2 * np.pi * r * 4 * alpha**2 * r ** (2 * alpha - 2) / (1 + r ** (2 * alpha)) ** 2
    val, _ = integrate.quad(dens, r0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def cone_angle_ratio(metric: MetricField, t: float, t_floor: float = -np.inf) -> float:
    """Circumference / radius of the circle {t} for a theta-invariant log-polar metric.

    The radius is the length of the radial segment from the puncture (t_floor)
    up to t.  For a cone point of angle 2 pi a this ratio tends to 2 pi a.
    """
    th0 = np.zeros(1)

    def coeff(tt, i):
        g = metric.raw_values(np.array([tt]), th0)
        return float(np.asarray(J.value(g[i][i]))[0])

    circ = 2 * np.pi * np.sqrt(coeff(t, 1))
    radius, _ = integrate.quad(lambda s: np.sqrt(coeff(s, 0)), t_floor, t, epsabs=1e-14, epsrel=1e-12, limit=400)
    return circ / radius


def dev_pole_alignment(alpha: float, t: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """<dev, (0, 0, 1)> at the given cover points."""
    return np.asarray(developing_map(alpha).values(t, theta)[2])


def cover_domain(alpha: float, shape=(64, 128), decks: int = 3, t_min: float = -8.0, t_max: float = 0.0,
                 coeff_floor: float = 1e-3) -> ChartDomain:
    """Log-polar cover grid spanning ``decks`` sheets.

    The inner radius is pulled in from ``t_min`` when needed so the lifted
    metric coefficient a sech(a t) stays above ``coeff_floor``; below that the
    determinant drops under the degeneracy floor of the chart layer.
    """
    a = float(alpha)
    limit = -np.arccosh(max(a / coeff_floor, 1.0)) / a
    return ChartDomain.logpolar(max(t_min, limit), t_max, shape, theta_max=2 * np.pi * decks)

"""Surfaces of revolution with constant Gaussian curvature 1.

Profile: radius r(s) = c cos s, height h(s) = int_0^s sqrt(1 - c^2 sin^2 u) du,
parametrized by arclength s.  For c < 1 the two ends s -> +-pi/2 are cone
tips; c = 1 is the unit sphere.

Two charts are provided:

* log-polar ``(t, theta)`` with sin s = -tanh(ct), cos s = sech(ct), in which
  the first fundamental form is c^2 sech^2(ct)(dt^2 + dtheta^2);
* ``(w, theta)`` with s = am(w | c^2), in which the metric G built from the
  Gauss-map pair is conformal: G = (c cn + dn)^2 / 4 (dw^2 + dtheta^2).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from . import jets as J
from .chart import ChartDomain, ChartMap, MetricField
from .cone import cone_angle_ratio
from .mlmap import LagrangianPair


def _radicand(c, s):
    return 1.0 - c * c * np.sin(s) ** 2


@lru_cache(maxsize=200_000)
def _height_scalar(c: float, s: float) -> float:
    val, _ = integrate.quad(lambda u: np.sqrt(_radicand(c, u)), 0.0, s, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def profile_height(c: float, s) -> np.ndarray:
    """h(s) by adaptive quadrature, cached per distinct s."""
    s = np.asarray(s, float)
    flat = s.ravel()
    uniq, inv = np.unique(flat, return_inverse=True)
    vals = np.array([_height_scalar(float(c), float(v)) for v in uniq])
    return vals[inv].reshape(s.shape)


def profile_height_halving(c: float, s: float, panels: int = 64, tol: float = 1e-13, max_panels: int = 1 << 16):
    """Independent estimate of h(s): composite Simpson with interval halving until stable."""
    prev = None
    n = panels
    while n <= max_panels:
        u = np.linspace(0.0, s, 2 * n + 1)
        f = np.sqrt(_radicand(c, u))
        hstep = s / (2 * n)
        val = hstep / 3 * (f[0] + f[-1] + 4 * f[1:-1:2].sum() + 2 * f[2:-1:2].sum())
        if prev is not None and abs(val - prev) < tol:
            return val
        prev, n = val, 2 * n
    return prev


@dataclass
class RevolutionK1:
    """K = 1 surface of revolution.

    ``s_max`` bounds the symmetric arclength window used for residual sweeps;
    ``t_range`` is the log-polar cone-end annulus used near a tip (c < 1).
    """

    c: float
    s_max: float = 1.0
    t_range: tuple[float, float] = (-6.0, -0.5)

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.c > 1:
            # keep 1 - c^2 sin^2 s >= 0.01 on the window
            self.s_max = min(self.s_max, float(np.arcsin(np.sqrt(0.99) / self.c)))
            tmin = -np.arctanh(np.sin(self.s_max)) / self.c
            self.t_range = (max(self.t_range[0], tmin), self.t_range[1])
        if not 0 < self.s_max < np.pi / 2:
            raise ValueError(f"s_max must lie in (0, pi/2), got {self.s_max}")

    @property
    def m(self):
        return self.c * self.c

    @property
    def has_cone_tips(self) -> bool:
        return self.c < 1

    # log-polar chart ---------------------------------------------------------
    def _hp(self, t):
        c = self.c
        return J.sqrt(1 - c * c * J.tanh(c * t) ** 2)

    def g1(self) -> MetricField:
        c = self.c

        def fn(t, th):
            e = c * c * J.sech(c * t) ** 2 + 0 * th
            return ((e, 0 * e), (0 * e, e))

        return MetricField(fn, name="first_form")

    def g3(self) -> MetricField:
        """Third fundamental form nu^* g_{S^2}."""
        c = self.c

        def fn(t, th):
            hp = self._hp(t)
            a = c**4 * J.sech(c * t) ** 4 / hp**2 + 0 * th
            d = hp**2 + 0 * th
            return ((a, 0 * a), (0 * a, d))

        return MetricField(fn, name="third_form")

    def shape_operator(self, t):
        c = self.c
        hp = self._hp(t)
        k1 = c * J.sech(c * t) / hp
        k2 = hp * J.cosh(c * t) / c
        return ((k1, 0 * k1), (0 * k1, k2))

    def height(self, t):
        """H(t) = h(s(t)) with Taylor jets from dH/dt = -c sech(ct) h'."""
        c = self.c
        t0 = J.value(t)
        s0 = -np.arctan(np.sinh(c * np.asarray(t0, float)))
        val = profile_height(c, s0)
        return J.integral(t, val, lambda u: -c * J.sech(c * u) * self._hp(u))

    def immersion(self) -> ChartMap:
        c = self.c

        def fn(t, th):
            r = c * J.sech(c * t)
            return (r * J.cos(th), r * J.sin(th), self.height(t) + 0 * th)

        return ChartMap(fn, name="revolution")

    def gauss_map(self) -> ChartMap:
        c = self.c

        def fn(t, th):
            hp = self._hp(t)
            return (hp * J.cos(th), hp * J.sin(th), -c * J.tanh(c * t) + 0 * th)

        return ChartMap(fn, name="gauss_map")

    def cone_end_domain(self, shape=(128, 256)) -> ChartDomain:
        return ChartDomain.logpolar(self.t_range[0], self.t_range[1], shape)

    def pair(self, shape=(128, 256)) -> LagrangianPair:
        """Gauss-map pair on the cone-end annulus: (g1 = I, g2 = III, phi = identity)."""
        return LagrangianPair(self.g1(), self.g3(), ChartMap.identity(), self.cone_end_domain(shape),
                              name=f"revolution(c={self.c})")

    # conformal chart -----------------------------------------------------------
    def s_of_t(self, t):
        return -np.arctan(np.sinh(self.c * np.asarray(t, float)))

    def w_of_s(self, s):
        s = np.asarray(s, float)
        if self.m <= 1:
            return special.ellipkinc(s, self.m)
        return np.vectorize(lambda v: integrate.quad(lambda u: 1 / np.sqrt(_radicand(self.c, u)), 0, v,
                                                     epsabs=1e-14, epsrel=1e-13)[0])(s)

    def conformal_domain(self, shape=(128, 256)) -> ChartDomain:
        """The window |s| <= s_max in the (w, theta) chart."""
        w = float(self.w_of_s(self.s_max))
        return ChartDomain.rectangle(-w, w, 0.0, 2 * np.pi, shape)

    def g1_conformal(self) -> MetricField:
        c, m = self.c, self.m

        def fn(w, th):
            sn, cn, dn = J.jacobi(w, m)
            a = dn * dn + 0 * th
            d = c * c * cn * cn + 0 * th
            return ((a, 0 * a), (0 * a, d))

        return MetricField(fn, name="first_form_w")

    def g3_conformal(self) -> MetricField:
        c, m = self.c, self.m

        def fn(w, th):
            sn, cn, dn = J.jacobi(w, m)
            a = c * c * cn * cn + 0 * th
            d = dn * dn + 0 * th
            return ((a, 0 * a), (0 * a, d))

        return MetricField(fn, name="third_form_w")

    def G_conformal_factor(self, w):
        sn, cn, dn = J.jacobi(w, self.m)
        return 0.25 * (self.c * cn + dn) ** 2

    def hq_constant(self) -> float:
        return (self.c**2 - 1) / 4

    def conformal_pair(self, shape=(128, 256)) -> LagrangianPair:
        return LagrangianPair(self.g1_conformal(), self.g3_conformal(), ChartMap.identity(),
                              self.conformal_domain(shape), name=f"revolution_w(c={self.c})")

    def immersion_conformal(self) -> ChartMap:
        c, m = self.c, self.m

        def fn(w, th):
            sn, cn, dn = J.jacobi(w, m)
            s0 = np.arctan2(J.value(sn), J.value(cn))
            H = J.integral(w, profile_height(c, s0), lambda u: J.jacobi(u, m)[2] ** 2)
            r = c * cn
            return (r * J.cos(th), r * J.sin(th), H + 0 * th)

        return ChartMap(fn, name="revolution_w")

    def gauss_map_conformal(self) -> ChartMap:
        c, m = self.c, self.m

        def fn(w, th):
            sn, cn, dn = J.jacobi(w, m)
            return (dn * J.cos(th), dn * J.sin(th), c * sn + 0 * th)

        return ChartMap(fn, name="gauss_map_w")

    def shape_operator_conformal(self, w):
        sn, cn, dn = J.jacobi(w, self.m)
        k1 = self.c * cn / dn
        return ((k1, 0 * k1), (0 * k1, 1 / k1))

    # cone tips ---------------------------------------------------------------------
    def cone_angles(self, t_values=(-10.0, -20.0, -30.0)) -> dict:
        """Circumference/radius ratios of I and III toward the tip t -> -inf."""
        out = {"target": 2 * np.pi * self.c, "t": list(t_values), "first_form": [], "third_form": []}
        for t in t_values:
            out["first_form"].append(cone_angle_ratio(self.g1(), t))
            out["third_form"].append(cone_angle_ratio(self.g3(), t))
        return out

"""Minimal Lagrangian maps: the tensor b, the pair (G, B), and their identities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import jets as J
from . import linalg2 as L
from .chart import (
    ChartDomain,
    ChartMap,
    MetricField,
    ScalarField,
    Tensor11Field,
    codazzi_jets,
    gauss_curvature_jets,
    jacobian_jets,
    laplace_beltrami_jets,
    pullback_metric_field,
    tree_map,
    tree_values,
)
from .jets import Jet
from .report import ProbeReport, ResidualStats

CHI_MASK = 1e-12


class DegenerateMapError(ValueError):
    pass


class InverseMapError(ValueError):
    pass


# inverse maps ------------------------------------------------------------------

def newton_inverse(phi: ChartMap, tol: float = 1e-12, max_iter: int = 60) -> ChartMap:
    """Pointwise inverse of a chart map by Newton iteration.

    Values come from Newton's method started at the target point; Taylor
    coefficients from the fixed-Jacobian iteration p <- p + J0^-1 (q - phi(p)),
    each pass of which gains one order.  Points that fail to converge are NaN.
    """

    def solve(qx, qy):
        px, py = np.array(qx, float, copy=True), np.array(qy, float, copy=True)
        for _ in range(max_iter):
            x, y = Jet.variables(px, py, 1)
            f = phi(x, y)
            fx, fy = J.as_jet(f[0], 1, px.shape), J.as_jet(f[1], 1, px.shape)
            rx, ry = qx - fx.value, qy - fy.value
            Jm = ((fx.c[1], fx.c[2]), (fy.c[1], fy.c[2]))
            dx, dy = L.matvec(L.inv(Jm), (rx, ry))
            px, py = px + dx, py + dy
            if np.all(np.hypot(dx, dy) <= tol * (1 + np.hypot(px, py))):
                break
        else:
            bad = np.hypot(dx, dy) > tol * (1 + np.hypot(px, py))
            px, py = np.where(bad, np.nan, px), np.where(bad, np.nan, py)
        return px, py

    def fn(x, y):
        if not isinstance(x, Jet):
            return solve(np.asarray(x, float), np.asarray(y, float))
        p0 = solve(x.value, y.value)
        K = x.order
        xx, yy = Jet.variables(p0[0], p0[1], 1)
        f = phi(xx, yy)
        Jm = tree_values(jacobian_jets(tuple(J.as_jet(c, 1, x.shape) for c in f)))
        Ji = L.inv(Jm)
        p = (J.as_jet(p0[0], K, x.shape), J.as_jet(p0[1], K, x.shape))
        for _ in range(K):
            f = phi(p[0], p[1])
            r = (x - f[0], y - f[1])
            p = tuple(a + d for a, d in zip(p, L.matvec(Ji, r)))
        return p

    return ChartMap(fn, loss=phi.loss, name=f"inverse({phi.name})", inverse=phi.fn)


def inverse_map(phi: ChartMap) -> ChartMap:
    if phi.is_identity:
        return phi
    if phi.inverse is not None:
        return ChartMap(phi.inverse, loss=phi.loss, name=f"inverse({phi.name})", inverse=phi.fn)
    return newton_inverse(phi)


# pair and derived fields ---------------------------------------------------------

@dataclass
class LagrangianPair:
    """Metrics g1, g2 on two charts and a map phi between them."""

    g1: MetricField
    g2: MetricField
    phi: ChartMap
    domain: ChartDomain
    name: str = "pair"
    K1: object = None  # optional analytic curvature of g1 (callable on jets)

    def __post_init__(self):
        self._b = None

    @property
    def pulled(self) -> MetricField:
        return pullback_metric_field(self.phi, self.g2)

    @property
    def b(self) -> Tensor11Field:
        if self._b is None:
            g1, pulled = self.g1, self.pulled

            def fn(x, y):
                return b_from_metrics(g1(x, y), pulled(x, y))

            self._b = Tensor11Field(fn, loss=max(g1.loss, pulled.loss), name="b")
        return self._b

    def swapped(self, domain: ChartDomain | None = None) -> LagrangianPair:
        return LagrangianPair(self.g2, self.g1, inverse_map(self.phi), domain or self.domain,
                              name=f"swap({self.name})")


def b_from_metrics(g1, pulled):
    """The g1-self-adjoint positive root b with g1(b., b.) = pulled."""
    M = L.mul(L.inv(g1), pulled)
    return L.sqrt_pos(M)


@dataclass
class GBpair:
    pair: LagrangianPair

    @property
    def loss(self):
        return self.pair.b.loss

    def G_of(self, g1, b):
        return L.scale(0.25, L.sandwich(L.shift(b, 1.0), g1))

    def B_of(self, b):
        return L.mul(L.inv(L.shift(b, 1.0)), L.shift(b, -1.0))

    @property
    def G(self) -> MetricField:
        g1, b = self.pair.g1, self.pair.b
        return MetricField(lambda x, y: self.G_of(g1(x, y), b(x, y)), loss=self.loss, name="G")

    @property
    def B(self) -> Tensor11Field:
        b = self.pair.b
        return Tensor11Field(lambda x, y: self.B_of(b(x, y)), loss=self.loss, name="B")

    @property
    def minus_det_B(self) -> ScalarField:
        b = self.pair.b
        return ScalarField(lambda x, y: -L.det(self.B_of(b(x, y))), loss=self.loss, name="-det B")

    @property
    def chi(self) -> ScalarField:
        """chi = 1/4 log(-det B); NaN where -det B < 1e-12 (zeros of B)."""
        b = self.pair.b

        def fn(x, y):
            m = -L.det(self.B_of(b(x, y)))
            v = J.value(m)
            ok = v >= CHI_MASK
            safe = J.where(ok, m, 1.0 + 0 * m)
            return J.where(ok, 0.25 * J.log(safe), np.nan)

        return ScalarField(fn, loss=self.loss, name="chi")


def build_GB(pair: LagrangianPair) -> GBpair:
    return GBpair(pair)


# pointwise evaluations ------------------------------------------------------------

def compute_b(pair: LagrangianPair, p):
    """Values of b at points p, shape (2, 2, ...).  Raises if phi^* g2 is not positive."""
    X, Y = np.asarray(p[0], float), np.asarray(p[1], float)
    g1 = pair.g1.values(X, Y)
    pulled = tree_values(pair.pulled.jets(X, Y, 0, check=False))
    M = L.mul(L.inv(g1), pulled)
    if np.any(~(L.det(M) > 0)) or np.any(~(L.trace(M) > 0)):
        raise DegenerateMapError("g1^-1 phi^* g2 is not positive at some point")
    return L.values(L.sqrt_pos(M))


def spectral(GB: GBpair, p):
    """(Lambda, chi, e, e') at points p; chi is NaN where masked.

    Lambda = sqrt(-det B) is the nonnegative eigenvalue of B; e is its G-unit
    eigenvector oriented by the chart convention, e' = J e the companion.
    """
    X, Y = np.asarray(p[0], float), np.asarray(p[1], float)
    b = GB.pair.b.values(X, Y)
    G = GB.G_of(GB.pair.g1.values(X, Y), b)
    B = GB.B_of(b)
    m = -L.det(B)
    masked = m < CHI_MASK
    lam = np.sqrt(np.maximum(m, 0))
    chi = np.where(masked, np.nan, 0.25 * np.log(np.where(masked, 1.0, m)))
    _, _, e = L.sym_eig(B, G)
    return lam, chi, e, L.rotate_quarter(e, G), masked


def eigenframe_jets(GB: GBpair, X, Y, order=1):
    """G-unit eigenvector jets of B for +Lambda, and the connection form omega.

    omega(d_i) = G(nabla_i e, J e), so that nabla_v e = omega(v) J e.
    """
    Gj = GB.G.jets(X, Y, order + 1)
    Bj = GB.B.jets(X, Y, order + 1)
    m = -L.det(Bj)
    lam = J.sqrt(m)
    c1 = (Bj[0][0] + lam, Bj[1][0])
    c2 = (Bj[0][1], Bj[1][1] + lam)
    n1 = J.value(c1[0]) ** 2 + J.value(c1[1]) ** 2
    n2 = J.value(c2[0]) ** 2 + J.value(c2[1]) ** 2
    use1 = n1 >= n2
    e = (J.where(use1, c1[0], c2[0]), J.where(use1, c1[1], c2[1]))
    ev = np.stack([J.value(e[0]), J.value(e[1])])
    flip = (ev[0] < 0) | ((ev[0] == 0) & (ev[1] < 0))
    e = tuple(J.where(flip, -c, c) for c in e)
    nrm = J.sqrt(L.dot(e, e, Gj))
    e = (e[0] / nrm, e[1] / nrm)
    from .chart import covariant_derivative_jets

    K = e[0].order - 1
    ep = L.rotate_quarter(tuple(c.truncate(K) for c in e), tree_map(lambda c: c.truncate(K), Gj))
    omega = []
    for i in range(2):
        v = tuple(J.as_jet(float(i == k), e[0].order, np.shape(X)) for k in range(2))
        de = covariant_derivative_jets(Gj, v, e)
        omega.append(L.dot(de, ep, tree_map(lambda c: c.truncate(K), Gj)))
    return e, ep, tuple(omega), Gj


def connection_form_curvature(GB: GBpair, X, Y):
    """|d omega(d1, d2) / sqrt(det G) + K_G| for the eigenframe connection form."""
    e, ep, omega, Gj = eigenframe_jets(GB, X, Y, order=1)
    domega = omega[1].d(0) - omega[0].d(1)
    KG = gauss_curvature_jets(GB.G.jets(X, Y, 2)).value
    return np.abs(domega.value / np.sqrt(L.det(tree_values(Gj))) + KG)


# residual families -------------------------------------------------------------

def _relnorm_form(T, g):
    return L.norm_form(T, g)


def lagrangian_residuals(pair: LagrangianPair, backend="analytic", h=None, domain=None) -> dict:
    d = domain or pair.domain
    X, Y = d.grid()
    h = d.spacing if h is None and backend == "fd" else h
    g1v = pair.g1.values(X, Y)
    bv = pair.b.values(X, Y)
    pulled = tree_values(pair.pulled.jets(X, Y, 0, check=False))
    out = {}
    out["det_b_minus_1"] = ResidualStats.from_values(L.det(bv) - 1)
    lowered = L.mul(g1v, bv)
    out["self_adjoint_b"] = ResidualStats.from_values((lowered[0][1] - lowered[1][0]) / np.sqrt(L.det(g1v)))
    out["pullback_b"] = ResidualStats.from_values(_relnorm_form(L.sub(L.sandwich(bv, g1v), pulled), g1v))
    g1j = pair.g1.jets(X, Y, 1, backend, h)
    bj = pair.b.jets(X, Y, 1, backend, h)
    out["codazzi_b"] = ResidualStats.from_values(L.norm_twoform_vec(codazzi_jets(g1j, bj), g1j))
    K1 = gauss_curvature_jets(pair.g1.jets(X, Y, 2)).value
    Kp = gauss_curvature_jets(pair.pulled.jets(X, Y, 2)).value
    ok = np.abs(Kp) > 1e-8
    ratio = np.where(ok, K1 / np.where(ok, Kp, 1.0), np.nan)
    out["det_b_curvature_ratio"] = ResidualStats.from_values(L.det(bv) - ratio, ~ok)
    return out


def identity_residuals(GB: GBpair, backend="analytic", h=None, domain=None) -> dict:
    pair = GB.pair
    d = domain or pair.domain
    X, Y = d.grid()
    h = d.spacing if h is None and backend == "fd" else h
    g1v = pair.g1.values(X, Y)
    bv = pair.b.values(X, Y)
    Gv = GB.G_of(g1v, bv)
    Bv = GB.B_of(bv)
    out = {}
    out["trace_B"] = ResidualStats.from_values(L.trace(Bv))
    back = L.mul(L.inv(L.shift(L.scale(-1.0, Bv), 1.0)), L.shift(Bv, 1.0))
    out["roundtrip_b"] = ResidualStats.from_values(L.norm_11(L.sub(back, bv), g1v))
    KG = gauss_curvature_jets(GB.G.jets(X, Y, 2)).value
    K1 = gauss_curvature_jets(pair.g1.jets(X, Y, 2)).value
    detB = L.det(Bv)
    out["gauss_identity"] = ResidualStats.from_values(KG - K1 * (1 + detB))
    out["trace_identity"] = ResidualStats.from_values(KG - 4 * K1 / (2 + L.trace(bv)))
    positive = np.abs(K1) > 1e-12
    out["kg_positivity"] = ResidualStats.from_values(np.maximum(-KG, 0.0), ~positive)
    m = -detB
    masked = m < CHI_MASK
    lam = np.sqrt(np.maximum(m, 0))
    out["lambda_bound"] = ResidualStats.from_values(np.maximum(lam - 1 + 1e-15, 0.0), masked)
    chi = np.where(masked, np.nan, 0.25 * np.log(np.where(masked, 1.0, m)))
    out["chi_sign"] = ResidualStats.from_values(np.maximum(chi, 0.0), masked)
    out["chi_formulas"] = ResidualStats.from_values(chi - 0.5 * np.log(np.where(masked, 1.0, lam)), masked)
    Gj = GB.G.jets(X, Y, 1, backend, h)
    chij = GB.chi.jets(X, Y, 2, backend, h)
    lap = laplace_beltrami_jets(Gj, chij).value
    # masked chi is a NaN constant jet: mask on its value, not on the derivatives
    out["laplacian_identity"] = ResidualStats.from_values(lap - KG, ~np.isfinite(lap) | ~np.isfinite(chij.value))
    Bj = GB.B.jets(X, Y, 1, backend, h)
    out["codazzi_B"] = ResidualStats.from_values(L.norm_twoform_vec(codazzi_jets(Gj, Bj), Gj))
    return out


def inverse_symmetry_check(pair: LagrangianPair, domain=None) -> dict:
    """||phi^* G' - G|| and ||B' + phi_* B|| with (G', B') from (g2, g1, phi^-1)."""
    d = domain or pair.domain
    X, Y = d.grid()
    GB = GBpair(pair)
    swap = GBpair(pair.swapped())
    pj = pair.phi.jets(X, Y, 1) if not pair.phi.is_identity else None
    if pj is None:
        Qx, Qy = X, Y
        Jm = L.eye(np.ones_like(X))
    else:
        Qx, Qy = pj[0].value, pj[1].value
        Jm = tree_values(jacobian_jets(pj))
    Gv = GB.G.values(X, Y)
    Bv = GB.B.values(X, Y)
    failed = ~(np.isfinite(Qx) & np.isfinite(Qy))
    Gs = swap.G.jets(Qx, Qy, 0, check=False)
    Bs = swap.B.values(Qx, Qy)
    Gs = tree_values(Gs)
    failed |= ~np.isfinite(L.values(Gs)).all(axis=(0, 1))
    rG = L.norm_form(L.sub(L.sandwich(Jm, Gs), Gv), Gv)
    pushed = L.mul(Jm, L.mul(Bv, L.inv(Jm)))
    rB = L.norm_11(L.add(Bs, pushed), Gs)
    return {
        "inverse_G": ResidualStats.from_values(rG, failed),
        "inverse_B": ResidualStats.from_values(rB, failed),
    }


# maximum principle ----------------------------------------------------------------

def flat_laplacian_grid(u: np.ndarray, spacing, periodic: bool) -> np.ndarray:
    """5-point flat Laplacian on interior points (NaN elsewhere)."""
    hx, hy = spacing
    out = np.full(u.shape, np.nan)
    if periodic:
        core = u[:, :-1]
        lap = np.full(core.shape, np.nan)
        lap[1:-1] = (core[2:] - 2 * core[1:-1] + core[:-2]) / hx**2 + (
            np.roll(core, -1, 1) - 2 * core + np.roll(core, 1, 1)
        )[1:-1] / hy**2
        out[:, :-1] = lap
        out[:, -1] = lap[:, 0]
    else:
        out[1:-1, 1:-1] = (u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / hx**2 + (
            u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]
        ) / hy**2
    return out


def max_principle_core(chi: np.ndarray, domain: ChartDomain, epsilons=(), tol: float = 1e-6) -> ProbeReport:
    """Interior-vs-boundary maxima of chi and chi + eps t on a log-polar grid."""
    T, _ = domain.grid()
    bmask = domain.boundary_mask()
    valid = np.isfinite(chi)
    frac = float(valid.mean())
    data = {"unmasked_fraction": frac, "grid": list(domain.shape), "tolerance": tol}
    rep = ProbeReport("max_principle", data)
    if frac < 0.9:
        rep.inconclusive = True
        rep.passed = False
        return rep
    chi_max = float(np.nanmax(chi))
    data["chi_max"] = chi_max
    data["chi_negative"] = chi_max < 0
    gaps = {}
    for eps in (0.0,) + tuple(epsilons):
        v = chi + eps * T
        inner = np.where(valid & ~bmask, v, -np.inf).max()
        outer = np.where(valid & bmask, v, -np.inf).max()
        gaps[repr(float(eps))] = {"interior_max": float(inner), "boundary_max": float(outer),
                                  "gap": float(inner - outer)}
    data["by_epsilon"] = gaps
    data["max_principle_gap"] = max(g["gap"] for g in gaps.values())
    lap = flat_laplacian_grid(chi, domain.spacing, domain.periodic)
    ok = np.isfinite(lap)
    data["laplacian_positive_fraction"] = float((lap[ok] > 0).mean()) if ok.any() else None
    data["laplacian_min"] = float(lap[ok].min()) if ok.any() else None
    rep.passed = bool(chi_max < 0 and data["max_principle_gap"] <= tol)
    return rep


def max_principle_probe(GB: GBpair, domain: ChartDomain, epsilons=(1e-2, 1e-3), tol: float = 1e-6,
                        t_sequence=(-6.0, -12.0, -24.0, -48.0, -96.0)) -> ProbeReport:
    T, TH = domain.grid()
    chi = GB.chi.values(T, TH)
    rep = max_principle_core(chi, domain, epsilons, tol)
    if rep.inconclusive:
        return rep
    th = domain.axes[1]
    trend = {}
    bnorm = []
    for t in t_sequence:
        tt = np.full_like(th, t)
        c = GB.chi.values(tt, th)
        bv = GB.pair.b.values(tt, th)
        g1 = GB.pair.g1.raw_values(tt, th)
        bnorm.append({"t": t, "max": float(np.max(L.norm_11(bv, g1)))})
        for eps in epsilons:
            trend.setdefault(repr(float(eps)), []).append(float(np.nanmax(c + eps * t)))
    rep.data["t_sequence"] = list(t_sequence)
    rep.data["inner_boundary_trend"] = trend
    rep.data["inner_boundary_decreasing_tail"] = {
        k: bool(len(v) >= 3 and v[-1] < v[-2] < v[-3]) for k, v in trend.items()
    }
    rep.data["b_norm_near_puncture"] = bnorm
    return rep

"""Quadratic differential attached to a (G, B) pair.

In a chart conformal for G (G = e^{2f}|dz|^2) the traceless G-self-adjoint
tensor B lowers to a symmetric traceless form Q = G(B., .), which is the real
part of a quadratic differential q = hq(z) dz^2:

    Q = [[Re hq, -Im hq], [-Im hq, -Re hq]].

B is G-Codazzi exactly when hq is holomorphic.  With chi_0 = 1/4 log|hq|^2 and
chi = 1/4 log(-det B) one has chi_0 = chi + f, chi_0 harmonic, and therefore
Delta^G chi = -e^{-2f} Delta_0 f = K_G.

The coefficient is called ``hq`` throughout to keep it apart from the map phi.
"""

from __future__ import annotations

import numpy as np

from . import jets as J
from . import linalg2 as L
from .chart import ChartDomain, Field, gauss_curvature_jets, tree_values
from .mlmap import CHI_MASK, GBpair, LagrangianPair
from .report import ResidualStats

CONFORMAL_TOL = 1e-10
HQ_MASK = 1e-12


class NonConformalChartError(ValueError):
    """The chart is not conformal for G; carries the measured anisotropy."""

    def __init__(self, anisotropy: float):
        super().__init__(f"chart is not conformal for G (anisotropy {anisotropy:.3e} > {CONFORMAL_TOL:g})")
        self.anisotropy = anisotropy


def anisotropy(G) -> np.ndarray:
    """|traceless part of G| / (tr G / 2); zero exactly for conformal charts."""
    Gv = L.values(G)
    a, b, d = Gv[0, 0], Gv[0, 1], Gv[1, 1]
    return np.hypot(a - d, 2 * b) / (a + d)


def hq_of_form(T):
    """(Re, Im) of the (2,0)-part psi(T) = (T11 - T22)/2 - i T12 of a symmetric form."""
    return 0.5 * (T[0][0] - T[1][1]), -0.5 * (T[0][1] + T[1][0])


class QuadDifferential(Field):
    """hq(z) dz^2, evaluated as the pair (Re hq, Im hq) of real fields."""

    kind = "quad"

    def __init__(self, fn, loss: int = 0, name: str | None = None, GB: GBpair | None = None,
                 anisotropy: float = 0.0):
        super().__init__(fn, loss, name)
        self.GB = GB
        self.anisotropy = float(anisotropy)

    @classmethod
    def from_complex(cls, fn, name: str | None = None) -> QuadDifferential:
        """Build from a function of the complex coordinate z = x + i y (jets allowed)."""

        def pair(x, y):
            v = fn(x + 1j * y)
            if J.is_jet(v):
                return v.real, v.imag
            v = np.asarray(v, complex)
            return v.real, v.imag

        return cls(pair, name=name or "hq")

    def complex_values(self, X, Y) -> np.ndarray:
        u, v = self.values(X, Y)
        return np.asarray(u) + 1j * np.asarray(v)

    def complex_jets(self, X, Y, order=1, backend="analytic", h=None):
        """(hq, d_z hq, d_zbar hq) as complex arrays; ``order`` >= 1."""
        u, v = self.jets(X, Y, max(order, 1), backend, h)
        ux, uy = u.derivative(1, 0), u.derivative(0, 1)
        vx, vy = v.derivative(1, 0), v.derivative(0, 1)
        hq = u.value + 1j * v.value
        dz = 0.5 * ((ux + vy) + 1j * (vx - uy))
        dzbar = 0.5 * ((ux - vy) + 1j * (vx + uy))
        return hq, dz, dzbar


def hopf_from_GB(GB: GBpair, domain: ChartDomain, strict: bool = True) -> QuadDifferential:
    """The quadratic differential of (G, B) in the chart of ``domain``.

    The chart must be conformal for G within 1e-10 on the grid.  With
    ``strict=False`` a non-conformal chart is accepted and hq is the chart
    (2,0)-part of G(B., .); the measured anisotropy is kept on the result.
    """
    X, Y = domain.grid()
    aniso = float(np.nanmax(anisotropy(GB.G.values(X, Y))))
    if strict and not aniso <= CONFORMAL_TOL:
        raise NonConformalChartError(aniso)
    g1, b = GB.pair.g1, GB.pair.b

    def fn(x, y):
        bb = b(x, y)
        Q = L.mul(GB.G_of(g1(x, y), bb), GB.B_of(bb))
        return hq_of_form(Q)

    return QuadDifferential(fn, loss=GB.loss, name="hq", GB=GB, anisotropy=aniso)


def _grid(domain):
    return domain.grid() if isinstance(domain, ChartDomain) else tuple(np.asarray(p, float) for p in domain)


def hopf_reconstruction(qd: QuadDifferential, domain) -> dict:
    """|Re(q) - G(B., .)| measured in G."""
    X, Y = _grid(domain)
    GB = qd.GB
    Gv = GB.G.values(X, Y)
    Q = L.mul(Gv, GB.B.values(X, Y))
    u, v = qd.values(X, Y)
    re_q = ((u, -v), (-v, -u))
    return {"hopf_reconstruction": ResidualStats.from_values(L.norm_form(L.sub(re_q, Q), Gv))}


def holomorphy_residual(qd: QuadDifferential, domain, backend="fd", h=None) -> dict:
    """Cauchy-Riemann residual e^{-3f} |d_zbar hq|.

    The weight makes it the G-norm of the (2,1)-form dbar q, the same scale as
    the Codazzi residual of B; f = 0 when no G is attached.  With the ``fd``
    backend the step defaults to the grid spacing.
    """
    X, Y = _grid(domain)
    if backend == "fd" and h is None and isinstance(domain, ChartDomain):
        h = domain.spacing
    _, _, dzbar = qd.complex_jets(X, Y, 1, backend, h)
    weight = 1.0
    if qd.GB is not None:
        weight = np.exp(-3 * np.asarray(conformal_factor(qd.GB).values(X, Y), float))
    return {"cauchy_riemann": ResidualStats.from_values(weight * np.abs(dzbar))}


def chi0_jets(qd: QuadDifferential, X, Y, order=2, backend="analytic", h=None):
    """chi_0 = 1/4 log|hq|^2 as a jet, with the mask |hq| < 1e-12."""
    u, v = qd.jets(X, Y, order, backend, h)
    m = u * u + v * v
    ok = np.sqrt(J.value(m)) >= HQ_MASK
    safe = J.where(ok, m, 1.0 + 0 * m)
    return 0.25 * J.log(safe), ~ok


def chi0_identities(qd: QuadDifferential, domain, backend="analytic", h=None) -> dict:
    """d_z chi_0 = d_z hq / (4 hq) and flat harmonicity of chi_0."""
    X, Y = _grid(domain)
    if backend == "fd" and h is None and isinstance(domain, ChartDomain):
        h = domain.spacing
    chi0, masked = chi0_jets(qd, X, Y, 2, backend, h)
    hq, dz, _ = qd.complex_jets(X, Y, 1, backend, h)
    safe = np.where(masked, 1.0, hq)
    dz_chi0 = 0.5 * (chi0.derivative(1, 0) - 1j * chi0.derivative(0, 1))
    grad = np.abs(dz_chi0 - dz / (4 * safe))
    lap = chi0.derivative(2, 0) + chi0.derivative(0, 2)
    return {
        "chi0_gradient": ResidualStats.from_values(grad, masked),
        "chi0_harmonic": ResidualStats.from_values(lap, masked),
    }


def conformal_factor(GB: GBpair) -> Field:
    """f with G = e^{2f}|dz|^2, taken as 1/4 log det G."""
    G = GB.G
    return Field(lambda x, y: 0.25 * J.log(L.det(G(x, y))), loss=G.loss, name="f")


def conformal_change_check(GB: GBpair, qd: QuadDifferential, domain, backend="analytic", h=None) -> dict:
    """|chi_0 - (chi + f)| and |-e^{-2f} Delta_0 f - K_G|."""
    X, Y = _grid(domain)
    if backend == "fd" and h is None and isinstance(domain, ChartDomain):
        h = domain.spacing
    chi0, masked0 = chi0_jets(qd, X, Y, 0)
    chi = np.asarray(GB.chi.values(X, Y), float)
    f = conformal_factor(GB)
    fv = np.asarray(f.values(X, Y), float)
    masked = masked0 | ~np.isfinite(chi)
    chain = chi0.value - (chi + fv)
    fj = f.jets(X, Y, 2, backend, h)
    lap0 = fj.derivative(2, 0) + fj.derivative(0, 2)
    KG = gauss_curvature_jets(GB.G.jets(X, Y, 2)).value
    return {
        "conformal_chain": ResidualStats.from_values(chain, masked),
        "conformal_curvature": ResidualStats.from_values(-np.exp(-2 * fv) * lap0 - KG),
    }


def graph_minimality_decomposition(pair: LagrangianPair, GB: GBpair, qd: QuadDifferential | None, domain) -> dict:
    """Algebraic decompositions of g1 and phi^* g2 through (G, B).

        g1        = (1 - det B) G - 2 G(B., .)
        phi^* g2  = (1 - det B) G + 2 G(B., .)
        G         = 1/4 (1 + 2/tr b)(g1 + phi^* g2)
        B^2 + det B 1 = 0

    and, when a quadratic differential is given, the Hopf differentials
    1/2 psi(g1) = -hq and 1/2 psi(phi^* g2) = +hq, scaled by e^{-2f}.
    """
    X, Y = _grid(domain)
    g1 = pair.g1.values(X, Y)
    pulled = tree_values(pair.pulled.jets(X, Y, 0, check=False))
    b = L.from_array(L.values(L.sqrt_pos(L.mul(L.inv(g1), pulled))))
    trb = L.trace(b)
    if np.any(~(trb > 0)):
        raise ArithmeticError("tr b <= 0 for a positive root; internal error")
    G = GB.G_of(g1, b)
    B = GB.B_of(b)
    detB = L.det(B)
    GBl = L.mul(G, B)
    out = {
        "decomposition_g1": ResidualStats.from_values(
            L.norm_form(L.sub(g1, L.sub(L.scale(1 - detB, G), L.scale(2.0, GBl))), G)),
        "decomposition_g2": ResidualStats.from_values(
            L.norm_form(L.sub(pulled, L.add(L.scale(1 - detB, G), L.scale(2.0, GBl))), G)),
        "conformal_factor_identity": ResidualStats.from_values(
            L.norm_form(L.sub(G, L.scale(0.25 * (1 + 2 / trb), L.add(g1, pulled))), G)),
        "cayley_hamilton": ResidualStats.from_values(
            L.norm_11(L.add(L.mul(B, B), L.scale(detB, L.eye(np.ones_like(detB)))), G)),
    }
    if qd is not None:
        hq = qd.complex_values(X, Y)
        scale = 0.5 * L.trace(G)
        for name, T, sign in (("hopf_assignment_g1", g1, -1.0), ("hopf_assignment_g2", pulled, 1.0)):
            re, im = hq_of_form(T)
            psi = np.asarray(re) + 1j * np.asarray(im)
            out[name] = ResidualStats.from_values(np.abs(0.5 * psi - sign * hq) / scale)
    return out


def hq_modulus_check(qd: QuadDifferential, domain) -> dict:
    """|hq| against Lambda e^{2f}, i.e. -det B0 = |hq|^2 in the flat model."""
    X, Y = _grid(domain)
    GB = qd.GB
    lam2 = np.asarray(GB.minus_det_B.values(X, Y), float)
    fv = np.asarray(conformal_factor(GB).values(X, Y), float)
    hq = qd.complex_values(X, Y)
    target = np.sqrt(np.maximum(lam2, 0)) * np.exp(2 * fv)
    return {"hq_modulus": ResidualStats.from_values((np.abs(hq) - target) * np.exp(-2 * fv),
                                                    lam2 < CHI_MASK)}


def hopf_residuals(pair: LagrangianPair, domain: ChartDomain, strict: bool = True, backend="fd", h=None):
    """Every hopf-layer residual family on one pair; returns (residuals, qd)."""
    GB = GBpair(pair)
    qd = hopf_from_GB(GB, domain, strict=strict)
    out = {}
    out.update(hopf_reconstruction(qd, domain))
    out.update(holomorphy_residual(qd, domain, backend, h))
    out.update(chi0_identities(qd, domain, backend, h))
    out.update(conformal_change_check(GB, qd, domain, backend, h))
    out.update(graph_minimality_decomposition(pair, GB, qd, domain))
    return out, qd

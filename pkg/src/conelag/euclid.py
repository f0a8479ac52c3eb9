"""Codazzi tensors from potentials and the immersions sigma, varsigma in R^3.

On a curvature-one chart with developing map ``dev`` into the unit sphere, a
potential u gives the Codazzi tensor b(u) = nabla grad u + u Id and the
immersion sigma = dev_*(grad u) + u dev, whose Gauss map is dev, whose first
fundamental form is g(b., b.) and whose shape operator is b^-1.  The average
varsigma = (sigma + dev)/2 has first fundamental form G.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

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
    gradient_jets,
    hess11_jets,
    jacobian_jets,
    tree_map,
    tree_values,
)
from .cone import certify_curvature, developing_map, rotation_z, spherical_cone_metric
from .expr import parse
from .report import ResidualStats

EPS0_DEFAULT = 0.05


class CurvatureCertificateError(ValueError):
    pass


class SingularImmersionError(ValueError):
    pass


class GateError(ValueError):
    pass


class ConditioningError(ValueError):
    def __init__(self, message, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values


# potentials --------------------------------------------------------------------

@dataclass
class Potential:
    """u(t, theta, dev1, dev2, dev3) on the log-polar cover of a spherical cone."""

    expression: str
    alpha: float = 1.0

    def __post_init__(self):
        self._fn, self._expr = parse(self.expression, ("t", "theta", "dev1", "dev2", "dev3"))
        self.dev = developing_map(self.alpha)

    def __call__(self, t, th):
        d = self.dev(t, th)
        return self._fn(t, th, d[0], d[1], d[2]) + 0 * t

    @property
    def field(self) -> ScalarField:
        return ScalarField(self.__call__, name=f"u={self.expression}")

    @property
    def metric(self) -> MetricField:
        return spherical_cone_metric(self.alpha, "logpolar")

    def deck_invariant(self, domain: ChartDomain, tol: float = 1e-12) -> bool:
        T, TH = domain.grid()
        u0 = np.asarray(self.field.values(T, TH))
        u1 = np.asarray(self.field.values(T, TH + 2 * np.pi))
        return bool(np.max(np.abs(u1 - u0)) <= tol * (1 + np.max(np.abs(u0))))


def curvature_certificate(alpha: float, tol: float = 1e-8) -> bool:
    return certify_curvature(alpha) <= tol


def codazzi_from_potential(u: Potential, g: MetricField | None = None, certified: bool | None = None) -> Tensor11Field:
    """A = nabla grad u + u Id; refuses unless g carries a curvature-one certificate."""
    if g is None:
        g = u.metric
        if certified is None:
            certified = curvature_certificate(u.alpha)
    if not certified:
        raise CurvatureCertificateError("codazzi_from_potential needs a metric certified to have curvature 1")
    uf = u.field

    def fn(x, y):
        return L.shift(hess11_jets(g(x, y), uf(x, y)), uf(x, y))

    return Tensor11Field(fn, loss=2 + g.loss, name="b(u)")


def b_positive(A: Tensor11Field, g: MetricField, domain: ChartDomain) -> bool:
    X, Y = domain.grid()
    Av = A.values(X, Y)
    gv = g.values(X, Y)
    lo, hi, _ = L.sym_eig(Av, gv)
    return bool(np.all(lo > 0))


# immersions ---------------------------------------------------------------------

def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


class Immersion3:
    """A map into R^3 with jets; normal from the cross product unless supplied."""

    def __init__(self, F: ChartMap, normal: ChartMap | None = None, name: str = "immersion"):
        self.map = F
        self.normal_map = normal
        self.name = name

    def cross_normal(self, x, y):
        Jm = jacobian_jets(self.map(x, y))
        cols = [tuple(Jm[k][i] for k in range(3)) for i in range(2)]
        n = _cross(cols[0], cols[1])
        nrm = J.sqrt(_dot3(n, n))
        return tuple(c / nrm for c in n)

    def first_form(self, x, y):
        Jm = jacobian_jets(self.map(x, y))
        e = [[sum(Jm[k][i] * Jm[k][j] for k in range(3)) for j in range(2)] for i in range(2)]
        return ((e[0][0], e[0][1]), (e[1][0], e[1][1]))

    def shape_operator(self, x, y, normal=None):
        """S with dN = dF o S, i.e. S = I^-1 W, W_kj = <F_k, d_j N>."""
        N = normal(x, y) if normal is not None else self.cross_normal(x, y)
        Jm = jacobian_jets(self.map(x, y))
        dN = jacobian_jets(N)
        K = min(dN[0][0].order, Jm[0][0].order)
        Jm = tree_map(lambda e: e.truncate(K), Jm)
        dN = tree_map(lambda e: e.truncate(K), dN)
        W = tuple(tuple(sum(Jm[a][k] * dN[a][j] for a in range(3)) for j in range(2)) for k in range(2))
        I = tuple(tuple(sum(Jm[a][i] * Jm[a][j] for a in range(3)) for j in range(2)) for i in range(2))
        return L.mul(L.inv(I), W)


def build_sigma(u: Potential) -> Immersion3:
    """sigma = dev_*(grad u) + u dev."""
    g, dev, uf = u.metric, u.dev, u.field

    def fn(x, y):
        d = dev(x, y)
        Jd = jacobian_jets(d)
        gu = gradient_jets(g(x, y), uf(x, y))
        K = gu[0].order
        uu = J.as_jet(uf(x, y), K, np.shape(J.value(x)))
        return tuple(Jd[k][0] * gu[0] + Jd[k][1] * gu[1] + uu * d[k].truncate(K) for k in range(3))

    return Immersion3(ChartMap(fn, loss=1, name="sigma"), normal=dev, name="sigma")


def build_varsigma(u: Potential) -> Immersion3:
    sigma = build_sigma(u).map
    dev = u.dev

    def fn(x, y):
        s = sigma(x, y)
        d = dev(x, y)
        return tuple(0.5 * (s[k] + d[k]) for k in range(3))

    return Immersion3(ChartMap(fn, loss=1, name="varsigma"), normal=dev, name="varsigma")


def _check_rank(Imm: Immersion3, X, Y):
    x, y = J.Jet.variables(X, Y, 1 + Imm.map.loss)
    I = tree_values(Imm.first_form(x, y))
    d = L.det(I)
    bad = ~(d > 1e-14)
    if np.any(bad):
        k = np.unravel_index(np.argmax(bad), bad.shape)
        raise SingularImmersionError(f"{Imm.name} loses rank at point ({X[k]:.6g}, {Y[k]:.6g})")


def immersion_identity_checks(u: Potential, domain: ChartDomain, lawson: bool = True) -> dict:
    """Residual families tying sigma and varsigma to b(u), dev and G."""
    from .mlmap import GBpair

    X, Y = domain.grid()
    g = u.metric
    A = codazzi_from_potential(u, g, certified=True)
    sigma, vs = build_sigma(u), build_varsigma(u)
    _check_rank(sigma, X, Y)
    _check_rank(vs, X, Y)
    x, y = J.Jet.variables(X, Y, 3)
    gv = tree_values(g(x, y))
    bv = tree_values(A(x, y))
    out = {}

    Ns = tree_values(sigma.cross_normal(x, y))
    dv = tree_values(u.dev(x, y))
    out["sigma_normal"] = ResidualStats.from_values(np.linalg.norm(np.stack(Ns) - np.stack(dv), axis=0))
    Is = tree_values(sigma.first_form(x, y))
    out["sigma_first_form"] = ResidualStats.from_values(L.norm_form(L.sub(Is, L.sandwich(bv, gv)), gv))
    S = tree_values(sigma.shape_operator(x, y))
    out["sigma_shape"] = ResidualStats.from_values(L.norm_11(L.sub(S, L.inv(bv)), gv))
    Sd = tree_values(sigma.shape_operator(x, y, normal=u.dev))
    out["sigma_shape_dev_normal"] = ResidualStats.from_values(L.norm_11(L.sub(Sd, L.inv(bv)), gv))
    Iv = tree_values(vs.first_form(x, y))
    G = L.scale(0.25, L.sandwich(L.shift(bv, 1.0), gv))
    out["varsigma_first_form"] = ResidualStats.from_values(L.norm_form(L.sub(Iv, G), G))
    Nv = tree_values(vs.cross_normal(x, y))
    out["varsigma_normal"] = ResidualStats.from_values(np.linalg.norm(np.stack(Nv) - np.stack(dv), axis=0))
    Js = np.array(tree_values(jacobian_jets(sigma.map(x, y))))  # (3, 2, ...)
    Jd = np.array(tree_values(jacobian_jets(u.dev(x, y))))
    Bm = L.values(bv)
    pred = np.einsum("ak...,kj...->aj...", Jd, Bm)
    # measure in the metric g: columns of dev_* are g-isometric
    diff = tuple(tuple(Js[a, j] - pred[a, j] for j in range(2)) for a in range(3))
    gram = tuple(tuple(sum(diff[a][i] * diff[a][j] for a in range(3)) for j in range(2)) for i in range(2))
    out["sigma_differential"] = ResidualStats.from_values(np.sqrt(np.abs(L.trace(L.mul(L.inv(gv), gram)))))
    orth = np.maximum(*[np.abs(sum(dv[a] * Js[a, i] for a in range(3))) / np.sqrt(gv[i][i]) for i in range(2)])
    out["sigma_normal_orthogonality"] = ResidualStats.from_values(orth)
    if lawson:
        x5, y5 = J.Jet.variables(X, Y, 4)
        Ij = vs.first_form(x5, y5)
        KI = gauss_curvature_jets(Ij).value
        Sv = tree_values(vs.shape_operator(x, y))
        out["lawson_gauss"] = ResidualStats.from_values(KI - L.det(Sv))
    return out


def equivariance_checks(u: Potential, domain: ChartDomain) -> dict:
    """sigma, varsigma commute with the deck action through R_{2 pi alpha}."""
    from .cone import equivariance_residual

    out = {}
    for name, imm in (("sigma_equivariance", build_sigma(u)), ("varsigma_equivariance", build_varsigma(u))):
        out[name] = equivariance_residual(imm.map, u.alpha, domain)
    return out


# potential recovery ----------------------------------------------------------------

def cheb(n: int):
    """Chebyshev points on [-1, 1] (descending) and the differentiation matrix."""
    if n == 0:
        return np.array([1.0]), np.zeros((1, 1))
    x = np.cos(np.pi * np.arange(n + 1) / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    Xd = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (Xd + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


def _fd_matrix(n: int, h: float, order: int):
    """Second-order finite-difference derivative matrices with one-sided ends."""
    if order == 1:
        D = sparse.diags([-0.5, 0.5], [-1, 1], shape=(n, n)).tolil()
        D[0, :3] = [-1.5, 2.0, -0.5]
        D[-1, -3:] = [0.5, -2.0, 1.5]
        return (D / h).tocsr()
    D = sparse.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n)).tolil()
    D[0, :4] = [2.0, -5.0, 4.0, -1.0]
    D[-1, -4:] = [-1.0, 4.0, -5.0, 2.0]
    return (D / h**2).tocsr()


@dataclass
class Recovery:
    X: np.ndarray
    Y: np.ndarray
    u: np.ndarray
    residual: float
    kernel_dim: int
    singular_values: np.ndarray | None = None
    method: str = "spectral"
    ops: dict = field(default_factory=dict, repr=False)

    def synthesize(self, g: MetricField):
        """Re-apply nabla grad + Id to the recovered grid field (same discretization)."""
        o = self.ops
        u = self.u.ravel()
        cols = [o["Dx"] @ u, o["Dy"] @ u, o["Dxx"] @ u, o["Dxy"] @ u, o["Dyy"] @ u]
        shp = self.X.shape
        ux, uy, uxx, uxy, uyy = [np.asarray(c).reshape(shp) for c in cols]
        x, y = J.Jet.variables(self.X, self.Y, 1)
        from .chart import christoffel_jets

        gj = g(x, y)
        Gm = tree_values(christoffel_jets(gj))
        gv = tree_values(gj)
        H = [[0, 0], [0, 0]]
        d2 = {(0, 0): uxx, (0, 1): uxy, (1, 0): uxy, (1, 1): uyy}
        for i in range(2):
            for j in range(2):
                H[i][j] = d2[(i, j)] - Gm[0][i][j] * ux - Gm[1][i][j] * uy
        A = L.mul(L.inv(gv), ((H[0][0], H[0][1]), (H[1][0], H[1][1])))
        return L.shift(A, self.u)


def recover_potential(A: Tensor11Field, g: MetricField, domain: ChartDomain, kernel=None,
                      method: str = "spectral", shape=None, kernel_tol: float = 1e-8) -> Recovery:
    """Least-squares u with nabla grad u + u g-identity = A, gauge-fixed against the kernel.

    ``kernel`` is a list of callables (x, y) -> values spanning the kernel of
    the operator (the restricted linear coordinates of dev).  The solution is
    orthogonal to it, i.e. the minimal-norm representative.
    """
    x0, x1, y0, y1 = domain.bounds
    n, m = shape or domain.shape
    if method == "spectral":
        sx, Dx1 = cheb(n - 1)
        sy, Dy1 = cheb(m - 1)
        xs = x0 + (sx + 1) * (x1 - x0) / 2
        ys = y0 + (sy + 1) * (y1 - y0) / 2
        Dx1 = Dx1 * 2 / (x1 - x0)
        Dy1 = Dy1 * 2 / (y1 - y0)
        Ix, Iy = np.eye(n), np.eye(m)
        Dx = np.kron(Dx1, Iy)
        Dy = np.kron(Ix, Dy1)
        Dxx = np.kron(Dx1 @ Dx1, Iy)
        Dyy = np.kron(Ix, Dy1 @ Dy1)
        Dxy = np.kron(Dx1, Dy1)
    elif method == "fd2":
        xs, ys = np.linspace(x0, x1, n), np.linspace(y0, y1, m)
        hx, hy = xs[1] - xs[0], ys[1] - ys[0]
        Ix, Iy = sparse.identity(n), sparse.identity(m)
        d1x, d1y = _fd_matrix(n, hx, 1), _fd_matrix(m, hy, 1)
        Dx = sparse.kron(d1x, Iy).tocsr()
        Dy = sparse.kron(Ix, d1y).tocsr()
        Dxx = sparse.kron(_fd_matrix(n, hx, 2), Iy).tocsr()
        Dyy = sparse.kron(Ix, _fd_matrix(m, hy, 2)).tocsr()
        Dxy = sparse.kron(d1x, d1y).tocsr()
    else:
        raise ValueError(f"unknown recovery method {method!r}")
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    x, y = J.Jet.variables(X, Y, 1 + g.loss)
    gj = g(x, y)
    from .chart import christoffel_jets

    Gm = [[[np.ravel(J.value(Gm_)) for Gm_ in row] for row in blk] for blk in tree_values(christoffel_jets(gj))]
    gv = [[np.ravel(J.value(e)) for e in row] for row in tree_values(gj)]
    Av = L.values(A.values(X, Y)).reshape(2, 2, -1)
    rhs_form = np.einsum("ik...,kj...->ij...", np.array(gv), Av)
    Dmap = {(0, 0): Dxx, (0, 1): Dxy, (1, 1): Dyy}
    blocks, rhs = [], []
    for i, j in ((0, 0), (0, 1), (1, 1)):
        # scale each equation by sqrt(g_ii g_jj) so residuals are metric-relative
        w = 1.0 / np.sqrt(gv[i][i] * gv[j][j])
        W = sparse.diags(w) if method == "fd2" else np.diag(w)
        op = Dmap[(i, j)] - _diag(Gm[0][i][j], method) @ Dx - _diag(Gm[1][i][j], method) @ Dy + _diag(gv[i][j], method)
        blocks.append(W @ op)
        rhs.append(w * 0.5 * (rhs_form[i, j] + rhs_form[j, i]))
    Lop = sparse.vstack(blocks).tocsr() if method == "fd2" else np.vstack(blocks)
    r = np.concatenate(rhs)
    P = None
    if kernel:
        P = np.stack([np.ravel(np.broadcast_to(np.asarray(k(X, Y), float), X.shape)) for k in kernel], axis=1)
        P = P / np.linalg.norm(P, axis=0)
    svals = None
    if method == "spectral":
        svals = np.linalg.svd(Lop, compute_uv=False)
        kdim = int(np.sum(svals < kernel_tol * svals[0]))
        expected = 0 if P is None else P.shape[1]
        if kdim > expected:
            raise ConditioningError(
                f"operator has {kdim} near-null directions, expected {expected}", svals[-(kdim + 2):]
            )
        M = Lop if P is None else np.vstack([Lop, P.T * svals[0]])
        rr = r if P is None else np.concatenate([r, np.zeros(P.shape[1])])
        u, *_ = np.linalg.lstsq(M, rr, rcond=None)
    else:
        kdim = -1
        M = Lop if P is None else sparse.vstack([Lop, sparse.csr_matrix(P.T)]).tocsr()
        rr = r if P is None else np.concatenate([r, np.zeros(P.shape[1])])
        # normal equations, solved directly
        u = spla.spsolve((M.T @ M).tocsc(), M.T @ rr)
    misfit = float(np.linalg.norm(Lop @ u - r) / max(np.linalg.norm(r), 1e-300))
    ops = {"Dx": Dx, "Dy": Dy, "Dxx": Dxx, "Dxy": Dxy, "Dyy": Dyy}
    return Recovery(X, Y, u.reshape(X.shape), misfit, kdim, svals, method, ops)


def _diag(v, method):
    return sparse.diags(v) if method == "fd2" else np.diag(v)


def dev_kernel(alpha: float):
    dev = developing_map(alpha)
    return [lambda x, y, k=k: np.asarray(dev.values(x, y)[k]) for k in range(3)]


def roundtrip_potential(u: Potential, domain: ChartDomain, method="spectral", shape=None) -> dict:
    """Synthesize A from u, recover u from A, re-synthesize; relative errors."""
    g = u.metric
    A = codazzi_from_potential(u, g, certified=True)
    rec = recover_potential(A, g, domain, kernel=dev_kernel(u.alpha), method=method, shape=shape)
    Arec = L.values(rec.synthesize(g))
    Atrue = L.values(A.values(rec.X, rec.Y))
    rel = float(np.max(np.abs(Arec - Atrue)) / max(np.max(np.abs(Atrue)), 1e-300))
    # recovered minus true potential should lie in the kernel
    u0 = np.asarray(u.field.values(rec.X, rec.Y)).ravel()
    P = np.stack([k(rec.X, rec.Y).ravel() for k in dev_kernel(u.alpha)], axis=1)
    diff = rec.u.ravel() - u0
    coef, *_ = np.linalg.lstsq(P, diff, rcond=None)
    off_kernel = float(np.linalg.norm(diff - P @ coef) / max(np.linalg.norm(u0), 1e-300))
    return {"roundtrip_A": rel, "equation_misfit": rec.residual, "off_kernel": off_kernel,
            "kernel_dim": rec.kernel_dim, "recovery": rec}


# projection and limits -----------------------------------------------------------------

def projection_metric(u: Potential, domain: ChartDomain, eps0: float = EPS0_DEFAULT) -> dict:
    """H = (pi o varsigma)^* flat and the smallest C with H/C <= G <= C H on the grid."""
    X, Y = domain.grid()
    d3 = np.asarray(u.dev.values(X, Y)[2])
    if d3.min() < eps0:
        raise GateError(
            f"<dev, e3> drops to {d3.min():.3g} < {eps0}; the domain reaches too far from the pole, use a smaller t_max"
        )
    vs = build_varsigma(u).map
    x, y = J.Jet.variables(X, Y, 1 + vs.loss)
    p = vs(x, y)
    Jm = jacobian_jets(p[:2])
    H = tree_values(L.sandwich(Jm, L.eye(J.as_jet(1.0, 0, X.shape))))
    A = codazzi_from_potential(u, u.metric, certified=True)
    gv = u.metric.values(X, Y)
    bv = A.values(X, Y)
    G = L.scale(0.25, L.sandwich(L.shift(bv, 1.0), gv))
    lo, hi = L.gen_eigvals(G, H)
    if np.any(~(lo > 0)):
        raise SingularImmersionError("projected metric H is degenerate on the grid")
    C = float(max(np.max(hi), np.max(1.0 / lo)))
    # sandwich: G - H/C and C H - G positive semidefinite, relative to H
    lower = lo - 1.0 / C
    upper = C - hi
    margin = float(min(lower.min(), upper.min()))
    return {"H": H, "C": C, "sandwich_margin": margin, "sandwich_ok": margin >= -1e-12 * C,
            "min_dev3": float(d3.min())}


def puncture_limit_check(u: Potential, t_sequence=(-4.0, -8.0, -12.0, -16.0, -20.0, -30.0), n_turn: int = 64,
                         decks: int = 3) -> dict:
    """Behaviour of varsigma as t -> -inf.

    At each t the image circle is sampled over one full turn of the developed
    angle (theta = phi / alpha), starting on each of ``decks`` sheets.  The
    average over a full turn is the circle centre, which for a deck-invariant
    potential lies on the rotation axis.  The fitted limit is the centre at
    the deepest t; its height is the limit scale.
    """
    vs = build_varsigma(u).map
    phi = 2 * np.pi * np.arange(n_turn) / n_turn
    centres, clouds = [], []
    for t in t_sequence:
        per_deck = []
        for k in range(decks):
            th = phi / u.alpha + 2 * np.pi * k
            x, y = J.Jet.variables(np.full_like(th, t), th, vs.loss)
            p = np.stack([np.asarray(J.value(c)) for c in vs(x, y)])
            per_deck.append(p)
        clouds.append(np.concatenate(per_deck, axis=1))
        centres.append(np.stack([p.mean(axis=1) for p in per_deck]))
    limit = centres[-1][0]
    dists = [float(np.max(np.linalg.norm(c - limit[:, None], axis=0))) for c in clouds]
    decreasing = all(b < a for a, b in zip(dists, dists[1:]))
    spread = float(np.max(np.linalg.norm(centres[-1] - limit[None, :], axis=1)))
    return {
        "t_sequence": list(t_sequence),
        "limit_point": limit.tolist(),
        "scale": float(limit[2]),
        "axis_distance": float(np.hypot(limit[0], limit[1])),
        "centre_axis_distance": [float(np.hypot(c[0, 0], c[0, 1])) for c in centres],
        "distance_to_limit": dists,
        "deck_spread": spread,
        "monotone": decreasing,
        "inconclusive": not decreasing,
    }

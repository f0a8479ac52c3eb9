"""Tensor calculus on 2D coordinate charts.

Fields are pointwise callables ``fn(x, y)`` built from the functions in
:mod:`conelag.jets`; calling them with jets gives Taylor expansions (the
analytic backend), calling them at shifted base points gives finite-difference
stencils (the ``fd`` backend).  Operators act on the resulting jets, so both
backends share one implementation of every formula.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import jets as J
from . import linalg2 as L
from .jets import Jet

DET_FLOOR = 1e-14
H_FD_DEFAULT = 1e-4


class DegenerateMetricError(ValueError):
    """A metric with det <= 1e-14 was met; carries the offending point."""

    def __init__(self, point, det):
        self.point = tuple(float(p) for p in point)
        self.det = float(det)
        super().__init__(f"degenerate metric at point {self.point} (det={self.det:.3e})")


class SingularMapError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


# tree helpers ---------------------------------------------------------------

def tree_map(fn, tree):
    if isinstance(tree, (tuple, list)):
        return tuple(tree_map(fn, t) for t in tree)
    return fn(tree)


def tree_leaves(tree):
    if isinstance(tree, (tuple, list)):
        out = []
        for t in tree:
            out.extend(tree_leaves(t))
        return out
    return [tree]


def tree_values(tree):
    return tree_map(lambda x: np.asarray(J.value(x)), tree)


# domains ----------------------------------------------------------------------

@dataclass(frozen=True)
class ChartDomain:
    """Rectangle or log-polar annulus (t = log|z|, theta) with a sampling grid."""

    kind: str
    bounds: tuple[float, float, float, float]
    shape: tuple[int, int]

    def __post_init__(self):
        if self.kind not in ("rectangle", "logpolar"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        x0, x1, y0, y1 = self.bounds
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"empty domain bounds {self.bounds}")
        if self.kind == "logpolar" and x1 > 0:
            raise ValueError("log-polar domains need t_max <= 0 (puncture at t = -inf)")
        n, m = self.shape
        if n < 2 or m < 2:
            raise ValueError(f"grid needs at least 2 points per axis, got {self.shape}")

    @classmethod
    def logpolar(cls, t_min, t_max, shape, theta_max=2 * np.pi):
        return cls("logpolar", (float(t_min), float(t_max), 0.0, float(theta_max)), tuple(shape))

    @classmethod
    def rectangle(cls, x0, x1, y0, y1, shape):
        return cls("rectangle", (float(x0), float(x1), float(y0), float(y1)), tuple(shape))

    def with_shape(self, shape) -> ChartDomain:
        return ChartDomain(self.kind, self.bounds, tuple(shape))

    def with_bounds(self, **kw) -> ChartDomain:
        x0, x1, y0, y1 = self.bounds
        b = dict(x0=x0, x1=x1, y0=y0, y1=y1)
        b.update(kw)
        return ChartDomain(self.kind, (b["x0"], b["x1"], b["y0"], b["y1"]), self.shape)

    @property
    def axes(self):
        x0, x1, y0, y1 = self.bounds
        return np.linspace(x0, x1, self.shape[0]), np.linspace(y0, y1, self.shape[1])

    @property
    def spacing(self) -> tuple[float, float]:
        x0, x1, y0, y1 = self.bounds
        return (x1 - x0) / (self.shape[0] - 1), (y1 - y0) / (self.shape[1] - 1)

    @property
    def h(self) -> float:
        return max(self.spacing)

    @property
    def periodic(self) -> bool:
        return self.kind == "logpolar" and np.isclose(self.bounds[3] - self.bounds[2], 2 * np.pi)

    def grid(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def boundary_mask(self):
        mask = np.zeros(self.shape, bool)
        mask[0, :] = mask[-1, :] = True
        if not self.periodic:
            mask[:, 0] = mask[:, -1] = True
        return mask

    def to_dict(self):
        return {"kind": self.kind, "bounds": list(self.bounds), "shape": list(self.shape)}


# fields -------------------------------------------------------------------------

_FD_OFFSETS = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]


class Field:
    """A pointwise field ``fn(x, y)`` returning a nested tuple of jets/arrays.

    ``loss`` is the number of derivative orders the definition consumes
    internally (a pullback through a map needs the map's first derivatives).
    """

    kind = "field"

    def __init__(self, fn, loss: int = 0, name: str | None = None):
        self.fn = fn
        self.loss = int(loss)
        self.name = name or getattr(fn, "__name__", self.kind)

    def __call__(self, x, y):
        return self.fn(x, y)

    def jets(self, X, Y, order: int = 2, backend: str = "analytic", h=None):
        """Taylor jets of the field at base points (X, Y).

        ``fd`` returns jets of order <= 2 assembled from centered 9-point
        stencils with step ``h`` (scalar or per-axis pair, default 1e-4).
        """
        X, Y = np.broadcast_arrays(np.asarray(X, float), np.asarray(Y, float))
        if backend == "analytic":
            x, y = Jet.variables(X, Y, order + self.loss)
            out = self.fn(x, y)
            return tree_map(lambda v: J.as_jet(v, order, X.shape), out)
        if backend != "fd":
            raise ConfigurationError(f"unknown backend {backend!r}")
        if order > 2:
            raise ConfigurationError("finite-difference jets are limited to order 2")
        hx, hy = _steps(h)
        samples = {}
        offsets = _FD_OFFSETS if order == 2 else _FD_OFFSETS[:5]
        if order == 0:
            offsets = _FD_OFFSETS[:1]
        for i, j in offsets:
            x, y = Jet.variables(X + i * hx, Y + j * hy, self.loss)
            samples[(i, j)] = tree_values(self.fn(x, y))
        proto = samples[(0, 0)]
        return _fd_assemble(samples, proto, order, hx, hy, X.shape)

    def values(self, X, Y):
        """Plain array values (nested tuples of ndarrays)."""
        return tree_values(self.jets(X, Y, order=0))


def _steps(h):
    if h is None:
        h = H_FD_DEFAULT
    if np.ndim(h) == 0:
        return float(h), float(h)
    return float(h[0]), float(h[1])


def _fd_assemble(samples, proto, order, hx, hy, shape):
    if isinstance(proto, tuple):
        return tuple(
            _fd_assemble({k: v[i] for k, v in samples.items()}, proto[i], order, hx, hy, shape)
            for i in range(len(proto))
        )
    s = {k: np.broadcast_to(v, shape) for k, v in samples.items()}
    f0 = s[(0, 0)]
    coeffs = [f0]
    if order >= 1:
        coeffs.append((s[(1, 0)] - s[(-1, 0)]) / (2 * hx))
        coeffs.append((s[(0, 1)] - s[(0, -1)]) / (2 * hy))
    if order >= 2:
        fxx = (s[(1, 0)] - 2 * f0 + s[(-1, 0)]) / hx**2
        fyy = (s[(0, 1)] - 2 * f0 + s[(0, -1)]) / hy**2
        fxy = (s[(1, 1)] - s[(1, -1)] - s[(-1, 1)] + s[(-1, -1)]) / (4 * hx * hy)
        coeffs.extend([fxx / 2, fxy, fyy / 2])
    return Jet(np.stack(coeffs))


class ScalarField(Field):
    kind = "scalar"


class MetricField(Field):
    """Symmetric positive-definite coefficient field ((g11, g12), (g12, g22))."""

    kind = "metric"

    def jets(self, X, Y, order=2, backend="analytic", h=None, check=True):
        g = super().jets(X, Y, order, backend, h)
        if check:
            check_positive(g, X, Y)
        return g

    def raw_values(self, X, Y):
        """Values without the degeneracy check (for limits toward a puncture)."""
        return tree_values(self.jets(X, Y, 0, check=False))

    @classmethod
    def conformal(cls, factor, loss=0, name=None):
        """Metric factor(x, y) * (dx^2 + dy^2)."""

        def fn(x, y):
            e = factor(x, y)
            return ((e, 0 * e), (0 * e, e))

        return cls(fn, loss, name)


class Tensor11Field(Field):
    """(1,1) tensor field with mixed components A^i_j as ((A11, A12), (A21, A22))."""

    kind = "tensor11"


class ChartMap(Field):
    """Smooth map from a chart into another chart (2 components) or 3-space."""

    kind = "map"

    def __init__(self, fn, loss=0, name=None, inverse=None, is_identity=False):
        super().__init__(fn, loss, name)
        self.inverse = inverse
        self.is_identity = is_identity

    @classmethod
    def identity(cls):
        return cls(lambda x, y: (x, y), name="identity", inverse=lambda x, y: (x, y), is_identity=True)


def check_positive(g, X, Y):
    g11 = np.asarray(J.value(g[0][0]))
    d = np.asarray(J.value(L.det(g)))
    bad = ~((g11 > 0) & (d > DET_FLOOR))
    if np.any(bad):
        k = np.unravel_index(np.argmax(bad), bad.shape) if bad.ndim else ()
        X, Y = np.broadcast_arrays(X, Y)
        raise DegenerateMetricError((X[k], Y[k]), np.broadcast_to(d, bad.shape)[k])


# jet-level operators ---------------------------------------------------------

def christoffel_jets(g):
    """Gamma[k][i][j] as jets of order one less than g."""
    dg = [tree_map(lambda e, a=a: e.d(a), g) for a in range(2)]
    gi = L.inv(tuple(tuple(e.truncate(e.order - 1) for e in row) for row in g))
    # first kind: G_lij = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)
    first = [[[0.5 * (dg[i][l][j] + dg[j][l][i] - dg[l][i][j]) for j in range(2)] for i in range(2)] for l in range(2)]
    return tuple(
        tuple(tuple(gi[k][0] * first[0][i][j] + gi[k][1] * first[1][i][j] for j in range(2)) for i in range(2))
        for k in range(2)
    )


def gauss_curvature_jets(g):
    """Gaussian curvature from the Riemann tensor R^a_{212} of the Christoffel jets."""
    G = christoffel_jets(g)
    G0 = tree_map(lambda e: e.truncate(e.order - 1), G)
    R = []
    for a in range(2):
        r = G[a][1][1].d(0) - G[a][0][1].d(1)
        for e in range(2):
            r = r + G0[a][0][e] * G0[e][1][1] - G0[a][1][e] * G0[e][0][1]
        R.append(r)
    K = R[0].order
    gg = tree_map(lambda e: e.truncate(K), g)
    return (gg[0][0] * R[0] + gg[0][1] * R[1]) / L.det(gg)


def gradient_jets(g, u):
    du = (u.d(0), u.d(1))
    gi = L.inv(tree_map(lambda e: e.truncate(du[0].order), g))
    return L.matvec(gi, du)


def hess11_jets(g, u):
    """(1,1) Hessian nabla grad u: mixed components g^{ik}(d_kj u - Gamma^l_kj d_l u)."""
    Gm = christoffel_jets(g)
    du = (u.d(0), u.d(1))
    K = du[0].order - 1
    du0 = tuple(d.truncate(K) for d in du)
    hess = [[du[j].d(i) - (Gm[0][i][j].truncate(K) * du0[0] + Gm[1][i][j].truncate(K) * du0[1]) for j in range(2)] for i in range(2)]
    gi = L.inv(tree_map(lambda e: e.truncate(K), g))
    return L.mul(gi, tuple(tuple(r) for r in hess))


def laplace_beltrami_jets(g, u):
    return L.trace(hess11_jets(g, u))


def codazzi_jets(g, A):
    """r^l = d_1 A^l_2 - d_2 A^l_1 + Gamma^l_1k A^k_2 - Gamma^l_2k A^k_1 (coordinate frame)."""
    if any(e.order < 1 for e in tree_leaves(A)):
        raise ConfigurationError("the Codazzi residual needs first-order jets of A")
    Gm = christoffel_jets(g)
    K = min(A[0][0].order - 1, Gm[0][0][0].order)
    A0 = tree_map(lambda e: e.truncate(K), A)
    Gm = tree_map(lambda e: e.truncate(K), Gm)
    out = []
    for l in range(2):
        r = A[l][1].d(0).truncate(K) - A[l][0].d(1).truncate(K)
        for k in range(2):
            r = r + Gm[l][0][k] * A0[k][1] - Gm[l][1][k] * A0[k][0]
        out.append(r)
    return tuple(out)


def covariant_derivative_jets(g, v, w):
    """nabla_v w for vector fields given as jet pairs (coordinate components)."""
    Gm = christoffel_jets(g)
    K = w[0].order - 1
    w0 = tuple(e.truncate(K) for e in w)
    v0 = tuple(e.truncate(K) for e in v)
    out = []
    for k in range(2):
        r = v0[0] * w[k].d(0) + v0[1] * w[k].d(1)
        for i in range(2):
            for j in range(2):
                r = r + Gm[k][i][j].truncate(K) * v0[i] * w0[j]
        out.append(r)
    return tuple(out)


def pullback_jets(dphi, g2_at_phi):
    """dphi^T g2(phi) dphi, dphi as (rows = target components, cols = chart axes)."""
    K = dphi[0][0].order
    g2 = tree_map(lambda e: e.truncate(K), g2_at_phi)
    return L.sandwich(dphi, g2)


def jacobian_jets(components):
    """Jacobian matrix of map components (order drops by one)."""
    return tuple(tuple(c.d(a) for a in range(2)) for c in components)


# field constructors ------------------------------------------------------------

def pullback_metric_field(phi: ChartMap, g2: MetricField) -> MetricField:
    """The metric phi^* g2 as a field on the source chart."""
    if phi.is_identity:
        return g2

    def fn(x, y):
        p = phi(x, y)
        return pullback_jets(jacobian_jets(p), g2(p[0], p[1]))

    return MetricField(fn, loss=phi.loss + g2.loss + 1, name=f"pullback({g2.name})")


def pullback_metric_3d(F: ChartMap) -> MetricField:
    """First fundamental form of a map into Euclidean space (any dimension)."""

    def fn(x, y):
        Jm = jacobian_jets(F(x, y))
        e = [[sum(Jm[k][i] * Jm[k][j] for k in range(len(Jm))) for j in range(2)] for i in range(2)]
        return ((e[0][0], e[0][1]), (e[1][0], e[1][1]))

    return MetricField(fn, loss=F.loss + 1, name=f"first_form({F.name})")


def conformal_scaled(g: MetricField, f) -> MetricField:
    def fn(x, y):
        return L.scale(J.exp(2 * f(x, y)), g(x, y))

    return MetricField(fn, loss=g.loss, name=f"e^2f {g.name}")


# grid-level API -----------------------------------------------------------------

def _point_arrays(p):
    if isinstance(p, tuple) and len(p) == 2:
        return np.asarray(p[0], float), np.asarray(p[1], float)
    p = np.asarray(p, float)
    return p[..., 0], p[..., 1]


def christoffel(g: MetricField, p, backend="analytic", h=None):
    """Christoffel symbols Gamma[k, i, j] at points p (array of shape (2,2,2,...))."""
    X, Y = _point_arrays(p)
    G = christoffel_jets(g.jets(X, Y, 1, backend, h))
    return np.asarray(tree_values(G))


def metric_compatibility(g: MetricField, p, backend="analytic", h=None):
    """max_k,i,j |d_k g_ij - Gamma^l_ki g_lj - Gamma^l_kj g_il|."""
    X, Y = _point_arrays(p)
    gj = g.jets(X, Y, 1, backend, h)
    G = tree_values(christoffel_jets(gj))
    gv = tree_values(gj)
    dg = [tree_values(tree_map(lambda e, a=a: e.d(a), gj)) for a in range(2)]
    worst = 0.0
    for k in range(2):
        for i in range(2):
            for j in range(2):
                r = dg[k][i][j] - sum(G[l][k][i] * gv[l][j] + G[l][k][j] * gv[i][l] for l in range(2))
                worst = np.maximum(worst, np.abs(r))
    return worst


def gauss_curvature(g: MetricField, p, backend="analytic", h=None):
    X, Y = _point_arrays(p)
    return gauss_curvature_jets(g.jets(X, Y, 2, backend, h)).value


def laplace_beltrami(g: MetricField, u: ScalarField, p, backend="analytic", h=None):
    X, Y = _point_arrays(p)
    return laplace_beltrami_jets(g.jets(X, Y, 1, backend, h), u.jets(X, Y, 2, backend, h)).value


def hess11(g: MetricField, u: ScalarField, p, backend="analytic", h=None):
    X, Y = _point_arrays(p)
    return L.values(hess11_jets(g.jets(X, Y, 1, backend, h), u.jets(X, Y, 2, backend, h)))


def codazzi_residual(g: MetricField, A: Tensor11Field, p, backend="analytic", h=None):
    """Coordinate components (r^1, r^2) of d^nabla A on (d_1, d_2)."""
    X, Y = _point_arrays(p)
    Aj = A.jets(X, Y, 1, backend, h)
    r = codazzi_jets(g.jets(X, Y, 1, backend, h), Aj)
    return np.stack([r[0].value, r[1].value])


def codazzi_norm(g: MetricField, A: Tensor11Field, p, backend="analytic", h=None):
    """Metric norm of d^nabla A (invariant under chart changes)."""
    X, Y = _point_arrays(p)
    gj = g.jets(X, Y, 1, backend, h)
    r = codazzi_jets(gj, A.jets(X, Y, 1, backend, h))
    return L.norm_twoform_vec(r, gj)


def pullback_metric(phi: ChartMap, g2: MetricField, p, order=0, backend="analytic", h=None):
    """dphi^T g2(phi) dphi at p; with order > 0 returns jets instead of values."""
    X, Y = _point_arrays(p)
    if not phi.is_identity:
        Jm = L.values(jacobian_jets(phi.jets(X, Y, 1)))
        if np.any(np.abs(L.det(L.from_array(Jm))) < 1e-14):
            raise SingularMapError("rank-deficient Jacobian")
    out = pullback_metric_field(phi, g2).jets(X, Y, order, backend, h)
    return out if order else L.values(out)


def connection_transfer_check(g: MetricField, A: Tensor11Field, p, v=(1.0, 0.0), w=(0.0, 1.0)):
    """Residuals of nabla^h_v w = A^-1 nabla^g_v (A w) and K_h = K_g / det A, h = g(A., A.).

    ``v`` and ``w`` are constant coordinate vector fields.  Returns the max of
    the two residual magnitudes pointwise.
    """
    X, Y = _point_arrays(p)
    x, y = Jet.variables(X, Y, 2 + g.loss + A.loss)
    gj = tree_map(lambda e: J.as_jet(e, 2, X.shape), g(x, y))
    Aj = tree_map(lambda e: J.as_jet(e, 2, X.shape), A(x, y))
    dA = L.det(tree_values(Aj))
    if np.any(np.abs(dA) < 1e-14):
        raise SingularMapError("tensor A is singular")
    hj = L.sandwich(Aj, gj)
    vj = tuple(J.as_jet(c, 2, X.shape) for c in v)
    wj = tuple(J.as_jet(c, 2, X.shape) for c in w)
    lhs = covariant_derivative_jets(hj, vj, wj)
    Aw = L.matvec(Aj, wj)
    rhs = L.matvec(L.inv(tree_map(lambda e: e.truncate(1), Aj)), covariant_derivative_jets(gj, vj, Aw))
    gv = tree_values(hj)
    diff = tuple(lhs[i].value - rhs[i].value for i in range(2))
    r1 = L.norm_vec(diff, gv)
    Kh = gauss_curvature_jets(hj).value
    Kg = gauss_curvature_jets(gj).value
    r2 = np.abs(Kh - Kg / dA)
    return np.maximum(r1, r2)

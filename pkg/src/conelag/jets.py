"""Truncated bivariate Taylor jets (forward-mode differentiation on a 2D chart).

A :class:`Jet` of order ``K`` stores the Taylor coefficients of a field in the
two chart coordinates up to total degree ``K``, at every point of an array of
base points.  Coefficients are laid out by total degree, then by the power of
the second coordinate::

    1, dx, dy, dx^2, dx dy, dy^2, dx^3, ...

so that ``c[idx(i, j)] = (d^i_x d^j_y f) / (i! j!)``.  Arithmetic truncates to
the smaller order of the operands, which makes jets of differing order mix
safely.  Elementary functions are applied by composing with their univariate
Taylor series at the base value.

All functions in this module accept plain numpy arrays too and then fall back
to the numpy equivalent, so analytic field definitions can be written once.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special

_NCOEF_TO_ORDER = {(k + 1) * (k + 2) // 2: k for k in range(12)}


def ncoef(order: int) -> int:
    return (order + 1) * (order + 2) // 2


def idx(i: int, j: int) -> int:
    d = i + j
    return d * (d + 1) // 2 + j


@lru_cache(maxsize=None)
def monomials(order: int) -> tuple[tuple[int, int], ...]:
    return tuple((d - j, j) for d in range(order + 1) for j in range(d + 1))


@lru_cache(maxsize=None)
def _product_table(order: int):
    mons = monomials(order)
    table = [[] for _ in mons]
    for a, (i1, j1) in enumerate(mons):
        for b, (i2, j2) in enumerate(mons):
            if i1 + i2 + j1 + j2 <= order:
                table[idx(i1 + i2, j1 + j2)].append((a, b))
    return tuple(tuple(t) for t in table)


@lru_cache(maxsize=None)
def _derivative_table(order: int, axis: int):
    # coefficients of d/dx_axis f, which has order - 1
    out = []
    for i, j in monomials(order - 1):
        if axis == 0:
            out.append((idx(i + 1, j), i + 1))
        else:
            out.append((idx(i, j + 1), j + 1))
    return tuple(out)


class Jet:
    """Truncated Taylor expansion of a scalar field about an array of points."""

    __slots__ = ("c",)
    __array_ufunc__ = None  # keep numpy from broadcasting into the object

    def __init__(self, c):
        c = np.asarray(c)
        if c.shape[0] not in _NCOEF_TO_ORDER:
            raise ValueError(f"invalid coefficient count {c.shape[0]}")
        self.c = c

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, order: int) -> Jet:
        value = np.asarray(value)
        c = np.zeros((ncoef(order),) + value.shape, dtype=np.result_type(value, float))
        c[0] = value
        return cls(c)

    @classmethod
    def variables(cls, X, Y, order: int) -> tuple[Jet, Jet]:
        """Seed the two chart coordinates at base points ``(X, Y)``."""
        X, Y = np.broadcast_arrays(np.asarray(X, float), np.asarray(Y, float))
        cx = np.zeros((ncoef(order),) + X.shape)
        cy = np.zeros_like(cx)
        cx[0], cy[0] = X, Y
        if order >= 1:
            cx[1] = 1.0
            cy[2] = 1.0
        return cls(cx), cls(cy)

    # shape / order ------------------------------------------------------
    @property
    def order(self) -> int:
        return _NCOEF_TO_ORDER[self.c.shape[0]]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.c.shape[1:]

    @property
    def dtype(self):
        return self.c.dtype

    def truncate(self, order: int) -> Jet:
        if order > self.order:
            raise ValueError(f"cannot raise jet order {self.order} to {order}")
        return Jet(self.c[: ncoef(order)])

    def __getitem__(self, key) -> Jet:
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.c[(slice(None),) + key])

    def __repr__(self) -> str:
        return f"Jet(order={self.order}, shape={self.shape})"

    # derivative access --------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    @property
    def grad(self) -> np.ndarray:
        return np.stack([self.c[1], self.c[2]])

    @property
    def hess(self) -> np.ndarray:
        c = self.c
        return np.stack([np.stack([2 * c[3], c[4]]), np.stack([c[4], 2 * c[5]])])

    def derivative(self, i: int, j: int) -> np.ndarray:
        """Value of d^i_x d^j_y f at the base points."""
        return math.factorial(i) * math.factorial(j) * self.c[idx(i, j)]

    def d(self, axis: int) -> Jet:
        """Partial derivative along a chart coordinate (order drops by one)."""
        K = self.order
        if K == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        rows = _derivative_table(K, axis)
        return Jet(np.stack([f * self.c[k] for k, f in rows]))

    # complex parts ------------------------------------------------------
    @property
    def real(self) -> Jet:
        return Jet(self.c.real)

    @property
    def imag(self) -> Jet:
        return Jet(self.c.imag)

    def conj(self) -> Jet:
        return Jet(self.c.conj())

    # arithmetic ---------------------------------------------------------
    def _align(self, other: Jet) -> tuple[np.ndarray, np.ndarray, int]:
        K = min(self.order, other.order)
        n = ncoef(K)
        return self.c[:n], other.c[:n], K

    def __neg__(self) -> Jet:
        return Jet(-self.c)

    def __pos__(self) -> Jet:
        return self

    def __add__(self, other) -> Jet:
        if isinstance(other, Jet):
            a, b, _ = self._align(other)
            return Jet(a + b)
        return Jet(_broadcast_add(self.c, other))

    __radd__ = __add__

    def __sub__(self, other) -> Jet:
        return self + (-other)

    def __rsub__(self, other) -> Jet:
        return (-self) + other

    def __mul__(self, other) -> Jet:
        if isinstance(other, Jet):
            a, b, K = self._align(other)
            out = []
            for pairs in _product_table(K):
                i, j = pairs[0]
                acc = a[i] * b[j]
                for i, j in pairs[1:]:
                    acc = acc + a[i] * b[j]
                out.append(acc)
            return Jet(np.stack(out))
        return Jet(self.c * np.asarray(other))

    __rmul__ = __mul__

    def __truediv__(self, other) -> Jet:
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return Jet(self.c / np.asarray(other))

    def __rtruediv__(self, other) -> Jet:
        return self.reciprocal() * other

    def reciprocal(self) -> Jet:
        a = self.c[0]
        K = self.order
        coeffs = [(-1.0) ** k / a ** (k + 1) for k in range(K + 1)]
        return compose(self, coeffs)

    def __pow__(self, p) -> Jet:
        if isinstance(p, (int, np.integer)) or (isinstance(p, float) and p.is_integer()):
            p = int(p)
            if p == 0:
                return Jet.constant(np.ones_like(self.c[0]), self.order)
            if p < 0:
                return self.reciprocal() ** (-p)
            result, base = None, self
            while p:
                if p & 1:
                    result = base if result is None else result * base
                p >>= 1
                if p:
                    base = base * base
            return result
        return power(self, p)


def _broadcast_add(c: np.ndarray, other) -> np.ndarray:
    other = np.asarray(other)
    shape = np.broadcast_shapes(c.shape[1:], other.shape)
    out = np.zeros((c.shape[0],) + shape, dtype=np.result_type(c, other))
    out[:] = c.reshape((c.shape[0],) + (1,) * (len(shape) - c.ndim + 1) + c.shape[1:])
    out[0] = out[0] + other
    return out


def compose(x: Jet, coeffs) -> Jet:
    """Evaluate ``sum_k coeffs[k] * (x - x0)^k`` with ``x0`` the base value of ``x``.

    ``coeffs[k]`` must be ``f^(k)(x0) / k!`` for ``k = 0..x.order``.
    """
    K = x.order
    delta_c = x.c.copy()
    delta_c[0] = 0
    delta = Jet(delta_c)
    dtype = np.result_type(x.c, *[np.asarray(c) for c in coeffs])
    result = Jet.constant(np.broadcast_to(coeffs[K], x.shape).astype(dtype), K)
    for k in range(K - 1, -1, -1):
        result = result * delta
        result.c[0] = result.c[0] + coeffs[k]
    return result


def is_jet(x) -> bool:
    return isinstance(x, Jet)


def value(x):
    return x.value if isinstance(x, Jet) else np.asarray(x)


def order_of(*xs) -> int | None:
    orders = [x.order for x in xs if isinstance(x, Jet)]
    return min(orders) if orders else None


def as_jet(x, order: int, shape=()) -> Jet:
    if isinstance(x, Jet):
        return x.truncate(order) if x.order > order else x
    return Jet.constant(np.broadcast_to(np.asarray(x), shape).copy(), order)


def where(cond, a, b):
    """Pointwise selection that keeps jet structure."""
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.where(cond, a, b)
    K = order_of(a, b)
    shape = a.shape if isinstance(a, Jet) else b.shape
    a, b = as_jet(a, K, shape), as_jet(b, K, shape)
    return Jet(np.where(cond, a.c, b.c))


# elementary functions ----------------------------------------------------

def exp(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    e = np.exp(x.c[0])
    return compose(x, [e / math.factorial(k) for k in range(x.order + 1)])


def log(x):
    if not isinstance(x, Jet):
        return np.log(x)
    a = x.c[0]
    coeffs = [np.log(a)] + [(-1.0) ** (k + 1) / (k * a**k) for k in range(1, x.order + 1)]
    return compose(x, coeffs)


def power(x, p: float):
    if not isinstance(x, Jet):
        return np.power(x, p)
    a = x.c[0]
    coeffs = [a**p]
    binom = 1.0
    for k in range(1, x.order + 1):
        binom *= (p - k + 1) / k
        # integer exponents terminate; avoid 0 * inf at a = 0
        coeffs.append(binom * a ** (p - k) if binom != 0 else 0 * a)
    return compose(x, coeffs)


def sqrt(x):
    if not isinstance(x, Jet):
        return np.sqrt(x)
    return power(x, 0.5)


def _trig_coeffs(a, K, start):
    cycle = [np.sin(a), np.cos(a), -np.sin(a), -np.cos(a)]
    return [cycle[(start + k) % 4] / math.factorial(k) for k in range(K + 1)]


def sin(x):
    if not isinstance(x, Jet):
        return np.sin(x)
    return compose(x, _trig_coeffs(x.c[0], x.order, 0))


def cos(x):
    if not isinstance(x, Jet):
        return np.cos(x)
    return compose(x, _trig_coeffs(x.c[0], x.order, 1))


def _hyp_coeffs(a, K, start):
    cycle = [np.sinh(a), np.cosh(a)]
    return [cycle[(start + k) % 2] / math.factorial(k) for k in range(K + 1)]


def sinh(x):
    if not isinstance(x, Jet):
        return np.sinh(x)
    return compose(x, _hyp_coeffs(x.c[0], x.order, 0))


def cosh(x):
    if not isinstance(x, Jet):
        return np.cosh(x)
    return compose(x, _hyp_coeffs(x.c[0], x.order, 1))


def _sech_tanh_coeffs(a, K):
    # Taylor coefficients from sech' = -sech tanh, tanh' = sech^2; stays finite
    # for large |a| where cosh overflows.
    e = np.exp(-np.abs(a))
    S = [2 * e / (1 + e * e)]
    T = [np.tanh(a)]
    for k in range(K):
        st = sum(S[j] * T[k - j] for j in range(k + 1))
        ss = sum(S[j] * S[k - j] for j in range(k + 1))
        S.append(-st / (k + 1))
        T.append(ss / (k + 1))
    return S, T


def tanh(x):
    if not isinstance(x, Jet):
        return np.tanh(x)
    return compose(x, _sech_tanh_coeffs(x.c[0], x.order)[1])


def sech(x):
    if not isinstance(x, Jet):
        e = np.exp(-np.abs(x))
        return 2 * e / (1 + e * e)
    return compose(x, _sech_tanh_coeffs(x.c[0], x.order)[0])


def arctan(x):
    if not isinstance(x, Jet):
        return np.arctan(x)
    # derivative 1/(1+x^2) expanded as a univariate series, then integrated
    return integral(x, np.arctan(x.c[0]), lambda s: (1.0 + s * s).reciprocal())


def abs2(x):
    """|x|^2, real valued, for real or complex jets."""
    if not isinstance(x, Jet):
        return np.abs(x) ** 2
    return (x * x.conj()).real


# special functions ------------------------------------------------------

def _univariate_seed(x0: np.ndarray, order: int) -> Jet:
    return Jet.variables(x0, np.zeros_like(x0), order)[0]


def _univariate_coeffs(j: Jet) -> list[np.ndarray]:
    return [j.c[idx(k, 0)] for k in range(j.order + 1)]


def integral(x, value0, integrand):
    """Jet of an antiderivative ``F`` given ``F(x0)`` and a jet-callable ``F'``.

    ``value0`` carries the base values (typically from quadrature); the higher
    Taylor coefficients are read off the univariate expansion of the integrand.
    """
    if not isinstance(x, Jet):
        return np.asarray(value0)
    K = x.order
    coeffs = [np.asarray(value0, dtype=float)]
    if K > 0:
        deriv = integrand(_univariate_seed(np.asarray(x.c[0], float), K - 1))
        deriv = as_jet(deriv, K - 1, x.shape)
        for k, a in enumerate(_univariate_coeffs(deriv)):
            coeffs.append(a / (k + 1))
    return compose(x, coeffs)


def _ellipj_values(u, m: float):
    u = np.asarray(u, float)
    if m <= 1.0:
        sn, cn, dn, _ = special.ellipj(u, m)
        return sn, cn, dn
    # reciprocal-modulus transformation
    k = math.sqrt(m)
    sn1, cn1, dn1, _ = special.ellipj(u * k, 1.0 / m)
    return sn1 / k, dn1, cn1


def jacobi(u, m: float):
    """Jacobi elliptic functions ``(sn, cn, dn)`` of parameter ``m``.

    Higher Taylor coefficients follow from the system
    sn' = cn dn, cn' = -sn dn, dn' = -m sn cn.
    """
    if not isinstance(u, Jet):
        return _ellipj_values(u, m)
    K = u.order
    sn0, cn0, dn0 = _ellipj_values(u.c[0], m)
    S, C, D = [sn0], [cn0], [dn0]
    for k in range(K):
        cd = sum(C[j] * D[k - j] for j in range(k + 1))
        sd = sum(S[j] * D[k - j] for j in range(k + 1))
        sc = sum(S[j] * C[k - j] for j in range(k + 1))
        S.append(cd / (k + 1))
        C.append(-sd / (k + 1))
        D.append(-m * sc / (k + 1))
    return compose(u, S), compose(u, C), compose(u, D)


NAMESPACE = {
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "sin": sin,
    "cos": cos,
    "sinh": sinh,
    "cosh": cosh,
    "tanh": tanh,
    "sech": sech,
    "atan": arctan,
    "pi": math.pi,
    "E": math.e,
}

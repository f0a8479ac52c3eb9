"""Closed-form 2x2 linear algebra on nested tuples.

A matrix is ``((a, b), (c, d))`` whose entries are numpy arrays or jets, so
the same routines serve pointwise values and Taylor jets.  A vector is a
2-tuple.  No general solver is used anywhere.
"""

from __future__ import annotations

import numpy as np

from . import jets as J


def eye(like=1.0):
    one = like * 0 + 1.0
    zero = like * 0
    return ((one, zero), (zero, one))


def zeros(like=0.0):
    z = like * 0
    return ((z, z), (z, z))


def diag(a, b):
    return ((a, a * 0), (b * 0, b))


def det(A):
    return A[0][0] * A[1][1] - A[0][1] * A[1][0]


def trace(A):
    return A[0][0] + A[1][1]


def transpose(A):
    return ((A[0][0], A[1][0]), (A[0][1], A[1][1]))


def add(A, B):
    return tuple(tuple(A[i][j] + B[i][j] for j in range(2)) for i in range(2))


def sub(A, B):
    return tuple(tuple(A[i][j] - B[i][j] for j in range(2)) for i in range(2))


def scale(s, A):
    return tuple(tuple(s * A[i][j] for j in range(2)) for i in range(2))


def shift(A, s):
    """A + s * identity."""
    return ((A[0][0] + s, A[0][1]), (A[1][0], A[1][1] + s))


def mul(A, B):
    return tuple(
        tuple(A[i][0] * B[0][j] + A[i][1] * B[1][j] for j in range(2)) for i in range(2)
    )


def matvec(A, v):
    return (A[0][0] * v[0] + A[0][1] * v[1], A[1][0] * v[0] + A[1][1] * v[1])


def dot(u, v, g=None):
    if g is None:
        return u[0] * v[0] + u[1] * v[1]
    gv = matvec(g, v)
    return u[0] * gv[0] + u[1] * gv[1]


def inv(A):
    d = det(A)
    return ((A[1][1] / d, -A[0][1] / d), (-A[1][0] / d, A[0][0] / d))


def sandwich(A, g):
    """A^T g A, i.e. the form g(A., A.) in coordinates."""
    return mul(transpose(A), mul(g, A))


def lower(g, A):
    """Coordinate matrix of the bilinear form g(A., .) (entries g_ik A^k_j)."""
    return mul(g, A)


def sqrt_pos(M):
    """Square root of a matrix with positive eigenvalues (closed form).

    Uses sqrt(M) = (M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M)), which follows
    from Cayley-Hamilton.  If M is self-adjoint for some metric the root is too.
    """
    s = J.sqrt(det(M))
    t = J.sqrt(trace(M) + 2 * s)
    return scale(1.0 / t, shift(M, s))


def symmetrize(A):
    off = 0.5 * (A[0][1] + A[1][0])
    return ((A[0][0], off), (off, A[1][1]))


def values(A) -> np.ndarray:
    """Stack entries (dropping jet structure) into an array of shape (2, 2, ...)."""
    return np.stack([np.stack([np.asarray(J.value(A[i][j])) for j in range(2)]) for i in range(2)])


def from_array(a):
    return ((a[0, 0], a[0, 1]), (a[1, 0], a[1, 1]))


# invariant norms ---------------------------------------------------------

def norm_form(T, g):
    """Norm of a (0,2) tensor measured with the metric g: sqrt(tr((g^-1 T)^2))."""
    T, g = from_array(values(T)), from_array(values(g))
    A = mul(inv(g), T)
    return np.sqrt(np.abs(trace(mul(A, transpose_form(A, g)))))


def transpose_form(A, g):
    """g-adjoint of a (1,1) tensor: g^-1 A^T g."""
    return mul(inv(g), mul(transpose(A), g))


def norm_11(A, g):
    """Norm of a (1,1) tensor with respect to g: sqrt(tr(A A*)), A* the g-adjoint."""
    A, g = from_array(values(A)), from_array(values(g))
    return np.sqrt(np.abs(trace(mul(A, transpose_form(A, g)))))


def norm_vec(v, g):
    v = tuple(np.asarray(J.value(x)) for x in v)
    g = from_array(values(g))
    return np.sqrt(np.abs(dot(v, v, g)))


def norm_twoform_vec(r, g):
    """Norm of a vector-valued 2-form given by its value r on (d1, d2)."""
    g = from_array(values(g))
    return norm_vec(r, g) / np.sqrt(det(g))


def gen_eigvals(G, H):
    """Eigenvalues of H^-1 G (both symmetric, H positive definite), ascending."""
    G, H = from_array(values(G)), from_array(values(H))
    M = mul(inv(H), G)
    tr, dt = trace(M), det(M)
    disc = np.sqrt(np.maximum(tr * tr / 4 - dt, 0.0))
    return tr / 2 - disc, tr / 2 + disc


def sym_eig(M, g):
    """Eigenpairs of a g-self-adjoint (1,1) tensor (values only).

    Returns ``(lam_small, lam_big, e_big)`` where ``e_big`` is a g-unit
    eigenvector for ``lam_big``, oriented so that its first component is
    nonnegative (ties broken toward a positive second component).
    """
    M, g = from_array(values(M)), from_array(values(g))
    tr, dt = trace(M), det(M)
    disc = np.sqrt(np.maximum(tr * tr / 4 - dt, 0.0))
    lo, hi = tr / 2 - disc, tr / 2 + disc
    # eigenvector of hi: columns of (M - lo I) span it
    c1 = (M[0][0] - lo, M[1][0])
    c2 = (M[0][1], M[1][1] - lo)
    n1 = c1[0] ** 2 + c1[1] ** 2
    n2 = c2[0] ** 2 + c2[1] ** 2
    use1 = n1 >= n2
    e = (np.where(use1, c1[0], c2[0]), np.where(use1, c1[1], c2[1]))
    degenerate = np.maximum(n1, n2) == 0
    e = (np.where(degenerate, 1.0, e[0]), np.where(degenerate, 0.0, e[1]))
    e = orient(e)
    nrm = np.sqrt(dot(e, e, g))
    return lo, hi, (e[0] / nrm, e[1] / nrm)


def orient(e):
    flip = (e[0] < 0) | ((e[0] == 0) & (e[1] < 0))
    s = np.where(flip, -1.0, 1.0)
    return (s * e[0], s * e[1])


def rotate_quarter(e, g):
    """The g-orthonormal companion J e of a g-unit vector e (positive orientation)."""
    a, b, c = g[0][0], g[0][1], g[1][1]
    sq = J.sqrt(a * c - b * b)
    return ((-b * e[0] - c * e[1]) / sq, (a * e[0] + b * e[1]) / sq)

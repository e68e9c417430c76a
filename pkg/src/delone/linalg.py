"""Dense small-dimension linear-algebra kernels.

Everything here works on plain ``numpy`` float64 arrays of dimension
1 <= n <= 8.  Determinants are computed by cofactor expansion for n <= 4
(exact evaluation order, no pivot-order dependence) and by LU with partial
pivoting for 5 <= n <= 8.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateError

MAX_DIM = 8

#: Scale-relative degeneracy floor: a system with |det| below
#: DEGENERACY_REL * column_bound**n is treated as degenerate.
DEGENERACY_REL = 1e-12


def degeneracy_floor(column_bound: float, n: int) -> float:
    """Scale-relative determinant floor below which a matrix is degenerate."""
    return DEGENERACY_REL * float(column_bound) ** n


def _det_cofactor(m: np.ndarray) -> float:
    n = m.shape[0]
    if n == 1:
        return float(m[0, 0])
    if n == 2:
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    if n == 3:
        return float(
            m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
            - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
            + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
        )
    # n == 4: expand along the first row.
    total = 0.0
    cols = list(range(4))
    for j in range(4):
        minor = m[1:][:, [c for c in cols if c != j]]
        total += ((-1.0) ** j) * float(m[0, j]) * _det_cofactor(minor)
    return total


def determinant(m) -> float:
    """Determinant of a square matrix, n <= 8.

    |det| of the edge matrix of a simplex equals n! times its volume.
    Returns 0.0 for an exactly singular matrix; never raises.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("determinant requires a square matrix")
    n = a.shape[0]
    if n > MAX_DIM:
        raise ValueError(f"dimension {n} exceeds the supported maximum {MAX_DIM}")
    if n <= 4:
        return _det_cofactor(a)
    # LU with partial pivoting.
    lu = a.copy()
    sign = 1.0
    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            sign = -sign
        piv = lu[k, k]
        if piv == 0.0:
            return 0.0
        lu[k + 1:, k] /= piv
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return float(sign * np.prod(np.diag(lu)))


def column_norm_bound(m) -> float:
    """Largest Euclidean column norm of a matrix."""
    a = np.asarray(m, dtype=float)
    return float(np.max(np.linalg.norm(a, axis=0)))


def solve_linear(m, b) -> np.ndarray:
    """Solve M x = b for a well-conditioned square system.

    Raises DegenerateError when |det M| is below the scale-relative floor.
    """
    a = np.asarray(m, dtype=float)
    rhs = np.asarray(b, dtype=float)
    n = a.shape[0]
    det = determinant(a)
    floor = degeneracy_floor(max(column_norm_bound(a), 1e-300), n)
    if abs(det) < floor:
        raise DegenerateError(
            f"|det| = {abs(det):.3e} below degeneracy floor {floor:.3e}"
        )
    return np.linalg.solve(a, rhs)


def inverse_norm_bound(m, column_bound: float) -> float:
    """Hadamard-style certified bound n * C**(n-1) / |det M| >= ||M^-1||.

    Every entry of M^-1 is a cofactor over the determinant, and each
    cofactor is bounded by the product of the remaining column norms.
    """
    a = np.asarray(m, dtype=float)
    n = a.shape[0]
    det = determinant(a)
    if det == 0.0:
        raise DegenerateError("singular matrix has no inverse-norm bound")
    return n * float(column_bound) ** (n - 1) / abs(det)


def distance_to_affine_span(q, pts) -> float:
    """Euclidean distance from q to the affine hull of pts.

    Computed by least-squares projection onto the span of the edge
    vectors; exactly 0 when q lies in the hull.
    """
    qa = np.asarray(q, dtype=float)
    pa = np.atleast_2d(np.asarray(pts, dtype=float))
    if pa.shape[0] == 0:
        raise ValueError("pts must be nonempty")
    base = pa[0]
    diff = qa - base
    if pa.shape[0] == 1:
        return float(np.linalg.norm(diff))
    edges = (pa[1:] - base).T  # (n, k)
    coef, *_ = np.linalg.lstsq(edges, diff, rcond=None)
    residual = diff - edges @ coef
    return float(np.linalg.norm(residual))

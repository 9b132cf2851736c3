"""Shared tolerances and dense linear-algebra helpers.

All rank and null-space decisions in the package go through these functions so
that the tolerance convention is stated once: singular values are compared
against REL_TOL times the largest Euclidean row norm of the matrix under
inspection.
"""

from __future__ import annotations

import math

import numpy as np

REL_TOL = 1e-9          # relative rank / null-space threshold
PROJECTOR_TOL = 1e-8    # idempotence / annihilation / completeness checks
FD_STEP = 1e-5          # central finite-difference step
FD_RTOL = 1e-5          # finite-difference relative error bound


def row_scale(matrix: np.ndarray) -> float:
    """Largest Euclidean row norm, the reference scale for rank decisions."""
    m = np.asarray(matrix, dtype=float)
    if m.size == 0:
        return 0.0
    return float(np.max(np.linalg.norm(m, axis=1)))


def rank_threshold(matrix: np.ndarray, rel_tol: float = REL_TOL) -> float:
    return rel_tol * max(row_scale(matrix), 1e-300)


def singular_values(matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if m.size == 0:
        return np.zeros(0)
    return np.linalg.svd(m, compute_uv=False)


def rank(matrix: np.ndarray, rel_tol: float = REL_TOL) -> int:
    """Numerical rank at the package-wide relative threshold."""
    sv = singular_values(matrix)
    return int(np.sum(sv > rank_threshold(matrix, rel_tol)))


def nullspace(matrix: np.ndarray, rel_tol: float = REL_TOL) -> np.ndarray:
    """Orthonormal basis of the right null space, one vector per row.

    Returns an array of shape (nullity, ncols); empty (0, ncols) when the
    matrix has full column rank.
    """
    m = np.asarray(matrix, dtype=float)
    if m.size == 0:
        ncols = m.shape[1] if m.ndim == 2 else 0
        return np.eye(ncols)
    _, sv, vt = np.linalg.svd(m, full_matrices=True)
    tol = rank_threshold(m, rel_tol)
    r = int(np.sum(sv > tol))
    return vt[r:]


def row_space_basis(matrix: np.ndarray, rel_tol: float = REL_TOL) -> np.ndarray:
    """Orthonormal basis of the row space, shape (rank, ncols)."""
    m = np.asarray(matrix, dtype=float)
    _, sv, vt = np.linalg.svd(m, full_matrices=False)
    tol = rank_threshold(m, rel_tol)
    r = int(np.sum(sv > tol))
    return vt[:r]


def projector_trace_dim(matrix: np.ndarray, tol: float = PROJECTOR_TOL) -> int:
    """Image dimension of an (approximate) projector: its rounded trace.

    A self-scaled rank threshold misreads a numerically-zero projector as
    full rank, so projector dimensions go through the trace, which equals the
    rank exactly for true projectors.  The trace must sit within tol of an
    integer.
    """
    tr = float(np.trace(np.asarray(matrix, dtype=float)))
    dim = round(tr)
    if abs(tr - dim) > tol:
        raise ValueError(f"trace {tr} is not near an integer; not a projector")
    return int(dim)


def minnorm_lstsq(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution of a @ x = b."""
    x, _, _, _ = np.linalg.lstsq(np.asarray(a, dtype=float),
                                 np.asarray(b, dtype=float), rcond=None)
    return x


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity.

    The denominator is sqrt(<a,a> * <b,b>); with b bitwise equal to a or to -a
    the result is exactly +1.0 or -1.0 in IEEE double (sqrt of a correctly
    rounded square returns the square root's argument's root exactly).
    Returns NaN when either vector is zero.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    num = float(np.dot(a, b))
    na = float(np.dot(a, a))
    nb = float(np.dot(b, b))
    if na == 0.0 or nb == 0.0:
        return math.nan
    return num / math.sqrt(na * nb)

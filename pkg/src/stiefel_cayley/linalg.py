"""Dense real linear-algebra substrate shared by every other module.

Conventions
-----------
* All matrices are ``numpy.float64`` ndarrays in row-major (C) order.
  That choice is made once, here, and inherited everywhere else.
* Factorizations delegate to LAPACK through ``numpy.linalg``; the wrappers
  add the error taxonomy and determinism fixes (sign conventions, rank
  thresholds) that callers rely on.
* Everything in this module is a pure function of its inputs and is safe
  to call from multiple threads.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

__all__ = [
    "DimensionError",
    "FactorizationError",
    "RankError",
    "SingularMatrixError",
    "SvdResult",
    "as_matrix",
    "feasibility",
    "skew_part",
    "svd",
    "qr_orthonormalize",
    "polar_factor",
    "solve_ipv",
]

#: Condition-number threshold (1-norm) above which a solve is refused.
#: Roughly the inverse of machine epsilon with a safety margin.
COND_LIMIT = 1e14


class DimensionError(ValueError):
    """Operands have incompatible or unexpected shapes."""


class FactorizationError(RuntimeError):
    """A dense factorization failed to converge."""


class RankError(RuntimeError):
    """Input is numerically rank deficient where full rank is required."""


class SingularMatrixError(RuntimeError):
    """A matrix that is nonsingular by construction tested as singular.

    This cannot happen for well-formed inputs; it signals corrupted data.
    """


class SvdResult(NamedTuple):
    """Thin singular value decomposition ``x = u @ diag(sigma) @ vt``.

    ``u`` has orthonormal columns, ``vt`` orthonormal rows, and ``sigma``
    is nonnegative and sorted in nonincreasing order.
    """

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array and reject non-finite entries."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={a.ndim}")
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains NaN or Inf entries")
    return a


def feasibility(u) -> float:
    """Orthonormality defect ``||u^T u - I||_F`` of a column frame."""
    u = np.asarray(u, dtype=np.float64)
    g = u.T @ u
    g[np.diag_indices_from(g)] -= 1.0
    return float(np.linalg.norm(g))


def skew_part(x) -> np.ndarray:
    """Skew-symmetric component ``(x - x^T) / 2`` of a square matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionError(f"skew_part needs a square matrix, got shape {x.shape}")
    return (x - x.T) / 2.0


def svd(x) -> SvdResult:
    """Thin SVD with the usual ordering guarantees.

    Raises
    ------
    FactorizationError
        If the underlying iteration fails to converge.
    """
    x = as_matrix(x, "svd input")
    try:
        u, s, vt = np.linalg.svd(x, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - hardware dependent
        raise FactorizationError(f"SVD did not converge: {exc}") from exc
    return SvdResult(u, s, vt)


def qr_orthonormalize(x) -> np.ndarray:
    """Orthonormal basis of the column span of ``x`` via reduced QR.

    The R-factor diagonal is sign-fixed to be nonnegative, so the result is
    a deterministic function of ``x`` (up to the LAPACK build in use).

    Raises
    ------
    RankError
        If the smallest ``|R_ii|`` falls below ``1e-12 * ||x||_F``.
    """
    x = as_matrix(x, "qr input")
    n, p = x.shape
    if n < p:
        raise DimensionError(f"need rows >= cols for a column frame, got {x.shape}")
    q, r = np.linalg.qr(x)
    diag = np.diag(r)
    if np.min(np.abs(diag)) < 1e-12 * np.linalg.norm(x):
        raise RankError(
            f"numerically rank-deficient input: min |R_ii| = {np.min(np.abs(diag)):.3e}"
        )
    signs = np.where(diag < 0.0, -1.0, 1.0)
    return q * signs


def polar_factor(x) -> np.ndarray:
    """Orthonormal polar factor ``x (x^T x)^{-1/2}``, computed as ``u @ vt``.

    This is the nearest matrix with orthonormal columns in Frobenius norm.

    Raises
    ------
    RankError
        If ``x`` is numerically rank deficient.
    """
    res = svd(x)
    if res.sigma[0] == 0.0 or res.sigma[-1] < 1e-12 * res.sigma[0]:
        raise RankError(
            f"numerically rank-deficient input: sigma_min/sigma_max = "
            f"{res.sigma[-1]:.3e}/{res.sigma[0]:.3e}"
        )
    return res.u @ res.vt


def solve_ipv(v, rhs) -> np.ndarray:
    """Solve ``(I + V) y = rhs`` through the p-by-p Schur complement.

    ``v`` is any object with attributes ``a`` (p-by-p skew block) and ``b``
    ((n-p)-by-p block), representing the zero-corner skew matrix
    ``V = [[A, -B^T], [B, 0]]``.  Writing ``M = I_p + A + B^T B`` (the Schur
    complement of the identity corner), the inverse acts block-wise as::

        (I + V)^{-1} = [[M^{-1},      M^{-1} B^T        ],
                        [-B M^{-1},   I - B M^{-1} B^T  ]]

    so only the p-by-p matrix ``M`` is ever factorized.  Cost is
    ``O(n p k + p^3)`` for an n-by-k right-hand side.

    Raises
    ------
    SingularMatrixError
        If ``M`` tests as numerically singular (1-norm condition estimate
        above ``COND_LIMIT``).  ``M`` is provably nonsingular for valid
        inputs, so this signals corrupted data.
    """
    a = np.asarray(v.a, dtype=np.float64)
    b = np.asarray(v.b, dtype=np.float64)
    p = a.shape[0]
    rhs = np.asarray(rhs, dtype=np.float64)
    squeeze = rhs.ndim == 1
    if squeeze:
        rhs = rhs[:, None]
    if rhs.shape[0] != p + b.shape[0]:
        raise DimensionError(
            f"rhs has {rhs.shape[0]} rows, expected {p + b.shape[0]}"
        )
    m = np.eye(p) + a + b.T @ b
    if not np.isfinite(m).all() or np.linalg.cond(m, 1) > COND_LIMIT:
        raise SingularMatrixError(
            "Schur complement I + A + B^T B tested singular; it is nonsingular "
            "for every valid zero-corner skew input, so the data is corrupt"
        )
    y1 = np.linalg.solve(m, rhs[:p] + b.T @ rhs[p:])
    y2 = rhs[p:] - b @ y1
    out = np.concatenate([y1, y2], axis=0)
    return out[:, 0] if squeeze else out

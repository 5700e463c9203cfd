"""Dense Cholesky factorization with forward/backward triangular solves."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla


class IndefiniteMatrixError(ArithmeticError):
    """The matrix has a non-positive-definite pivot."""


@dataclass(frozen=True)
class CholeskyFactor:
    """Upper-triangular factor R with ``R.T @ R`` equal to the (permuted) input."""

    r_factor: np.ndarray
    perm: Optional[np.ndarray]
    dim: int


def cholesky_factorize(
    s: np.ndarray, perm: Optional[np.ndarray] = None
) -> CholeskyFactor:
    """Factor a symmetric positive definite matrix.

    An optional symmetric permutation is applied before factoring and is
    honored transparently by :func:`cholesky_solve`. Indefinite input raises
    :class:`IndefiniteMatrixError`.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError("expected a square matrix")
    scale = max(1.0, float(np.abs(s).max()) if s.size else 0.0)
    if not np.allclose(s, s.T, rtol=0.0, atol=1e-8 * scale):
        raise ValueError("matrix is not symmetric")
    if perm is not None:
        perm = np.asarray(perm, dtype=np.int64)
        if np.sort(perm).tolist() != list(range(s.shape[0])):
            raise ValueError("perm is not a permutation of 0..dim-1")
        s = s[np.ix_(perm, perm)]
    try:
        r = sla.cholesky(s, lower=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise IndefiniteMatrixError(str(exc)) from exc
    return CholeskyFactor(r_factor=r, perm=perm, dim=s.shape[0])


def cholesky_solve(factor: CholeskyFactor, b: np.ndarray) -> np.ndarray:
    """Solve ``S @ x = b`` via one forward and one backward triangular solve."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (factor.dim,):
        raise ValueError(
            f"dimension mismatch: rhs has shape {b.shape}, expected ({factor.dim},)"
        )
    rhs = b[factor.perm] if factor.perm is not None else b
    z = sla.solve_triangular(factor.r_factor, rhs, trans="T", check_finite=False)
    x = sla.solve_triangular(factor.r_factor, z, trans="N", check_finite=False)
    if factor.perm is not None:
        out = np.empty_like(x)
        out[factor.perm] = x
        return out
    return x

"""Top-k eigenpairs of a symmetric operator via Lanczos iteration.

Full reorthogonalization against the stored basis keeps the method robust;
the intended use is a handful of extremal eigenpairs (k around 10), where the
extra O(dim * j) per step is negligible next to the operator applications.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla


@dataclass(frozen=True)
class PartialEig:
    """The k largest eigenpairs, eigenvalues descending, vectors column-orthonormal."""

    eigenvalues: np.ndarray
    vectors: np.ndarray


class LanczosConvergenceError(RuntimeError):
    """Requested accuracy not reached; ``best`` holds the best pairs so far."""

    def __init__(self, message: str, best: PartialEig):
        super().__init__(message)
        self.best = best


def _fresh_direction(rng, basis, dim):
    # Random unit vector orthogonal to the current basis.
    for _ in range(50):
        v = rng.standard_normal(dim)
        if basis:
            q = np.column_stack(basis)
            v -= q @ (q.T @ v)
            v -= q @ (q.T @ v)
        nrm = np.linalg.norm(v)
        if nrm > 1e-8:
            return v / nrm
    raise RuntimeError("could not generate a direction orthogonal to the basis")


def lanczos_topk(
    apply: Callable[[np.ndarray], np.ndarray],
    dim: int,
    k: int,
    tol: float = 1e-10,
    max_iter: Optional[int] = None,
    seed: int = 0,
) -> PartialEig:
    """Compute the k largest eigenpairs of a symmetric operator.

    Parameters
    ----------
    apply : callable
        Maps a length-``dim`` vector to the operator applied to it. Must be
        symmetric; this is not checked.
    dim : int
        Operator dimension.
    k : int
        Number of eigenpairs, ``1 <= k < dim``.
    tol : float
        Relative residual target: each returned pair satisfies
        ``norm(A v - lam v) <= tol * norm_estimate(A)``.
    max_iter : int, optional
        Cap on operator applications (default ``min(dim, max(10 k, 100))``).
    seed : int
        Seed for the start vector; fixed seed gives a fully deterministic run.

    Raises
    ------
    LanczosConvergenceError
        If the target accuracy is not met within ``max_iter``; the exception
        carries the best pairs found so far.
    """
    if not 1 <= k < dim:
        raise ValueError(f"need 1 <= k < dim, got k={k}, dim={dim}")
    if max_iter is None:
        max_iter = min(dim, max(10 * k, 100))
    max_iter = min(max_iter, dim)
    rng = np.random.default_rng(seed)

    basis: list[np.ndarray] = []
    alphas: list[float] = []
    betas: list[float] = []  # betas[i] couples basis[i] and basis[i+1]
    v = _fresh_direction(rng, basis, dim)
    norm_est = 0.0
    best: Optional[PartialEig] = None

    for _ in range(max_iter):
        w = apply(v)
        alpha = float(v @ w)
        w = w - alpha * v
        if basis and betas and betas[-1] != 0.0:
            w -= betas[-1] * basis[-1]
        basis.append(v)
        alphas.append(alpha)
        # Full reorthogonalization (twice is enough in practice).
        q = np.column_stack(basis)
        w -= q @ (q.T @ w)
        w -= q @ (q.T @ w)
        beta = float(np.linalg.norm(w))

        theta, s = sla.eigh_tridiagonal(np.asarray(alphas), np.asarray(betas))
        norm_est = max(norm_est, float(np.abs(theta).max()))
        order = np.argsort(theta)[::-1]
        top = order[: min(k, len(alphas))]
        resid = np.abs(beta * s[-1, top])
        best = PartialEig(
            eigenvalues=theta[top].copy(), vectors=q @ s[:, top]
        )
        if len(alphas) >= k and (
            np.all(resid <= tol * max(norm_est, 1e-300)) or len(alphas) == dim
        ):
            return best

        if beta <= max(norm_est, 1.0) * 1e-14:
            # Invariant subspace found; restart in the orthogonal complement.
            if len(alphas) == dim:
                return best
            v = _fresh_direction(rng, basis, dim)
            betas.append(0.0)
        else:
            v = w / beta
            betas.append(beta)

    raise LanczosConvergenceError(
        f"no convergence to tol={tol} within {max_iter} iterations", best
    )

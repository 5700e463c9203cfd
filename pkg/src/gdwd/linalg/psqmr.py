"""Preconditioned symmetric quasi-minimal residual (QMR) linear solver.

Coupled two-term recurrence for symmetric (possibly indefinite) systems with
a single symmetric positive definite preconditioner. The true residual vector
is tracked incrementally, so the stopping test is on ``norm(b - A x)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

_TINY = 1e-300


@dataclass(frozen=True)
class PsqmrResult:
    x: np.ndarray
    iterations: int
    converged: bool
    breakdown: bool
    residual_norm: float


def psqmr(
    apply: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    precond: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    tol: float = 1e-8,
    max_iter: Optional[int] = None,
    x0: Optional[np.ndarray] = None,
) -> PsqmrResult:
    """Solve ``A x = b`` for symmetric ``A`` to absolute residual ``tol``.

    ``iterations`` counts operator applications inside the main loop. On an
    inner-product breakdown the solver stops with ``breakdown=True`` and the
    last iterate; no exception is raised.
    """
    b = np.asarray(b, dtype=np.float64)
    n = b.size
    if max_iter is None:
        max_iter = max(2 * n, 20)
    if precond is None:
        precond = lambda v: v  # noqa: E731

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - apply(x) if x0 is not None and np.any(x != 0.0) else b - 0.0
    res = r.copy()
    res_norm = float(np.linalg.norm(res))
    if res_norm <= tol:
        return PsqmrResult(x, 0, True, False, res_norm)

    q = precond(r)
    tau = float(np.linalg.norm(q))
    rho = float(r @ q)
    theta = 0.0
    d = np.zeros(n)
    a_d = np.zeros(n)
    converged = False
    breakdown = False
    iters = 0

    for iters in range(1, max_iter + 1):
        a_q = apply(q)
        sigma = float(q @ a_q)
        if abs(sigma) < _TINY:
            breakdown = True
            iters -= 1
            break
        alpha = rho / sigma
        r = r - alpha * a_q
        u = precond(r)
        theta_new = float(np.linalg.norm(u)) / tau if tau > _TINY else 0.0
        c_sq = 1.0 / (1.0 + theta_new * theta_new)
        tau = tau * theta_new * np.sqrt(c_sq)
        d = (c_sq * theta * theta) * d + (c_sq * alpha) * q
        x = x + d
        a_d = (c_sq * theta * theta) * a_d + (c_sq * alpha) * a_q
        res = res - a_d
        res_norm = float(np.linalg.norm(res))
        if res_norm <= tol:
            converged = True
            break
        if abs(rho) < _TINY:
            breakdown = True
            break
        rho_new = float(r @ u)
        beta = rho_new / rho
        q = u + beta * q
        rho = rho_new
        theta = theta_new

    return PsqmrResult(x, iters, converged, breakdown, res_norm)

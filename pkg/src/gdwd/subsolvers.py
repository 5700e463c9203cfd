"""Backends for the (d+1) x (d+1) normal system and the scalar margin subproblem.

The system matrix is

    A = [ Z Z^T + P    Z y ]        P = mu^2 * I
        [ (Z y)^T      y^T y ]

with Z stored d x n. Three interchangeable strategies cover the size regimes:
a one-time dense Cholesky of A (moderate d), a Sherman-Morrison-Woodbury
reduction to an n x n factorization (moderate n, large d), and a closed-form
inverse of a low-rank-shifted block obtained from the top eigenpairs of Z Z^T
combined with a scalar Schur-complement solve (both large).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .linalg import (
    CholeskyFactor,
    PartialEig,
    SparseMatrixCSC,
    cholesky_factorize,
    cholesky_solve,
    lanczos_topk,
)


class SolverKind(enum.Enum):
    DIRECT = "direct"
    SMW2 = "smw2"
    ITERATIVE = "iterative"


class DegenerateSchurError(ArithmeticError):
    """Schur-complement scalar is numerically zero or negative."""


def select_solver(n: int, d: int) -> SolverKind:
    """Pick the backend from the problem shape.

    Thresholds (with ``dim = d``): SMW2 when ``dim > 5000`` and ``n < 0.2 dim``
    and ``n <= 2500``; otherwise iterative when ``dim > 5000``; otherwise
    direct. The 0.2-ratio test is evaluated in exact integer arithmetic.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be at least 1")
    if d > 5000 and 5 * n < d and n <= 2500:
        return SolverKind.SMW2
    if d > 5000:
        return SolverKind.ITERATIVE
    return SolverKind.DIRECT


# ---------------------------------------------------------------------------
# Direct backend: dense assembly + Cholesky of A.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DirectFactor:
    a_matrix: np.ndarray
    factor: CholeskyFactor


def build_direct(z: SparseMatrixCSC, y: np.ndarray, mu_sq: float) -> DirectFactor:
    """Assemble A densely and factor it once (cost O(n d^2 + d^3))."""
    if mu_sq <= 0:
        raise ValueError("mu_sq must be positive")
    d = z.nrows
    zs = z.scipy
    a = np.empty((d + 1, d + 1))
    a[:d, :d] = (zs @ zs.T).toarray()
    a[:d, :d][np.diag_indices(d)] += mu_sq
    zy = zs @ y
    a[:d, d] = zy
    a[d, :d] = zy
    a[d, d] = float(y @ y)
    return DirectFactor(a_matrix=a, factor=cholesky_factorize(a))


def solve_direct(factor: DirectFactor, h: np.ndarray) -> np.ndarray:
    return cholesky_solve(factor.factor, h)


# ---------------------------------------------------------------------------
# SMW backend: A = Dhat + U E U^T, inverted through an (n+1)-dimensional core.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SmwFactor:
    h_block_factor: CholeskyFactor  # Cholesky of G = I_n + Z^T Z / mu_sq
    j_inv_ybar: np.ndarray  # J^{-1} ybar, length n+1
    ybar_scalar: float  # 1 + ybar^T J^{-1} ybar
    p_diag: float  # mu_sq
    y_norm_sq: float


def build_smw(z: SparseMatrixCSC, y: np.ndarray, mu_sq: float) -> SmwFactor:
    """Factor the n x n core once; all later solves cost O(n d + n^2)."""
    if mu_sq <= 0:
        raise ValueError("mu_sq must be positive")
    zs = z.scipy
    n = z.ncols
    g = (zs.T @ zs).toarray() / mu_sq
    g[np.diag_indices(n)] += 1.0
    fac = cholesky_factorize(g)
    y_norm_sq = float(y @ y)
    y_norm = np.sqrt(y_norm_sq)
    g_inv_yn = cholesky_solve(fac, y / y_norm)
    j_inv_ybar = np.concatenate([g_inv_yn, [-1.0]])
    # ybar = [y/||y||; 1] and J = diag(G, -1), so ybar^T J^{-1} ybar telescopes.
    ybar_scalar = 1.0 + float((y / y_norm) @ g_inv_yn) - 1.0
    return SmwFactor(
        h_block_factor=fac,
        j_inv_ybar=j_inv_ybar,
        ybar_scalar=ybar_scalar,
        p_diag=float(mu_sq),
        y_norm_sq=y_norm_sq,
    )


def solve_smw(
    factor: SmwFactor, z: SparseMatrixCSC, y: np.ndarray, h: np.ndarray
) -> np.ndarray:
    """Apply the low-rank update identity to solve ``A x = h``."""
    d, n = z.nrows, z.ncols
    if h.shape != (d + 1,):
        raise ValueError(f"rhs has shape {h.shape}, expected ({d + 1},)")
    zs = z.scipy
    mu_sq = factor.p_diag
    y_norm = np.sqrt(factor.y_norm_sq)

    t1 = h[:d] / mu_sq
    t2 = h[d] / factor.y_norm_sq
    s1 = zs.T @ t1 + y * t2
    s2 = y_norm * t2
    # H^{-1} s with H = J + ybar ybar^T.
    jinv_s = np.concatenate([cholesky_solve(factor.h_block_factor, s1), [-s2]])
    ybar_dot = float((y / y_norm) @ jinv_s[:n]) + jinv_s[n]
    v = jinv_s - (ybar_dot / factor.ybar_scalar) * factor.j_inv_ybar
    p1 = zs @ v[:n]
    p2 = float(y @ v[:n]) + y_norm * v[n]
    x = np.empty(d + 1)
    x[:d] = t1 - p1 / mu_sq
    x[d] = t2 - p2 / factor.y_norm_sq
    return x


# ---------------------------------------------------------------------------
# Proximal backend: shift the top block so its inverse has closed form.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProximalFactor:
    eig: PartialEig  # top eigenpairs of Z Z^T, descending
    ell: int
    mu_sq: float
    zy: np.ndarray
    yty: float
    schur_scalar: float


def _shifted_inverse_apply(factor: ProximalFactor, v: np.ndarray) -> np.ndarray:
    """Apply ``(Z Z^T + P + T)^{-1}`` where the shift T flattens the spectrum
    below the ell-th eigenvalue."""
    lam = factor.eig.eigenvalues
    vecs = factor.eig.vectors
    base = 1.0 / (factor.mu_sq + lam[-1])
    out = base * v
    if factor.ell > 1:
        coeff = 1.0 / (factor.mu_sq + lam[:-1]) - base
        out += vecs[:, :-1] @ (coeff * (vecs[:, :-1].T @ v))
    return out


def shifted_block_apply(factor: ProximalFactor, v: np.ndarray) -> np.ndarray:
    """Apply ``Z Z^T + P + T`` (the forward map of the shifted top block)."""
    lam = factor.eig.eigenvalues
    vecs = factor.eig.vectors
    out = (factor.mu_sq + lam[-1]) * v
    if factor.ell > 1:
        out += vecs[:, :-1] @ ((lam[:-1] - lam[-1]) * (vecs[:, :-1].T @ v))
    return out


def implied_shift_matrix(factor: ProximalFactor, z: SparseMatrixCSC) -> np.ndarray:
    """Densely materialize the implied shift T (for validation at small d)."""
    d = z.nrows
    lam = factor.eig.eigenvalues
    vecs = factor.eig.vectors
    t = lam[-1] * np.eye(d)
    if factor.ell > 1:
        t += (vecs[:, :-1] * (lam[:-1] - lam[-1])) @ vecs[:, :-1].T
    t -= (z.scipy @ z.scipy.T).toarray()
    return t


def build_proximal(
    z: SparseMatrixCSC,
    y: np.ndarray,
    mu_sq: float,
    ell: int,
    seed: int = 0,
    lanczos_tol: float = 1e-12,
    lanczos_max_iter: int | None = None,
) -> ProximalFactor:
    """Compute the top eigenpairs of ``Z Z^T`` (operator form) and cache the
    scalar Schur complement of the shifted system."""
    if ell < 1:
        raise ValueError("ell must be at least 1")
    if mu_sq <= 0:
        raise ValueError("mu_sq must be positive")
    d = z.nrows
    if d < 2:
        raise ValueError("proximal backend needs d >= 2")
    ell_eff = min(ell, d - 1)
    zs = z.scipy
    zst = zs.T

    def zzt(v: np.ndarray) -> np.ndarray:
        return zs @ (zst @ v)

    eig = lanczos_topk(
        zzt, d, ell_eff, tol=lanczos_tol, max_iter=lanczos_max_iter, seed=seed
    )
    zy = zs @ y
    yty = float(y @ y)
    factor = ProximalFactor(
        eig=eig, ell=ell_eff, mu_sq=float(mu_sq), zy=zy, yty=yty, schur_scalar=np.nan
    )
    schur = yty - float(zy @ _shifted_inverse_apply(factor, zy))
    return ProximalFactor(
        eig=eig, ell=ell_eff, mu_sq=float(mu_sq), zy=zy, yty=yty, schur_scalar=schur
    )


def solve_proximal(factor: ProximalFactor, h: np.ndarray) -> np.ndarray:
    """Solve the shifted system: scalar Schur equation for the last unknown,
    then one closed-form inverse application for the leading block."""
    d = factor.zy.size
    if h.shape != (d + 1,):
        raise ValueError(f"rhs has shape {h.shape}, expected ({d + 1},)")
    if not factor.schur_scalar > 1e-14:
        raise DegenerateSchurError(
            f"Schur scalar {factor.schur_scalar:.3e} is not safely positive"
        )
    beta = (h[d] - float(factor.zy @ _shifted_inverse_apply(factor, h[:d])))
    beta /= factor.schur_scalar
    w = _shifted_inverse_apply(factor, h[:d] - factor.zy * beta)
    return np.concatenate([w, [beta]])


# ---------------------------------------------------------------------------
# Scalar subproblem: minimize weight/s^q + (sigma/2)(s - a)^2 over s > 0.
# ---------------------------------------------------------------------------


def _bisect_root(a: float, sigma: float, q: float, weight: float, tol: float) -> float:
    # The stationarity residual sigma*(s-a) - q*weight/s^(q+1) is strictly
    # increasing, negative near 0+ and positive at the bracket top.
    lo = 1e-12
    hi = max(a, 0.0) + (q * weight / sigma) ** (1.0 / (q + 2.0)) + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g = sigma * (mid - a) - q * weight / mid ** (q + 1.0)
        if abs(g) <= tol:
            return mid
        if g < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-17 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def newton_r(
    a: float,
    sigma: float,
    q: float,
    weight: float,
    r_init: float,
    tol: float = 1e-12,
    max_newton: int = 50,
) -> tuple[float, int]:
    """Find the unique positive minimizer of ``weight/s^q + (sigma/2)(s-a)^2``.

    Returns ``(root, newton_iterations)``. The multiplicative Newton update
    keeps warm-started calls in the quadratic regime; if an iterate leaves
    (0, inf) or 50 updates pass, a guarded bisection finishes the job (never
    an error to the caller).
    """
    if sigma <= 0 or q <= 0 or weight <= 0 or r_init <= 0:
        raise ValueError("sigma, q, weight and r_init must be positive")
    qw_over_sigma = q * weight / sigma
    s = float(r_init)
    for it in range(max_newton + 1):
        foc = -q * weight / s ** (q + 1.0) + sigma * (s - a)
        if abs(foc) <= tol:
            return s, it
        if it == max_newton:
            break
        s_pow = s ** (q + 1.0)
        s_new = (
            s
            * ((q + 2.0) * qw_over_sigma + a * s_pow)
            / ((q + 1.0) * qw_over_sigma + s_pow * s)
        )
        if not np.isfinite(s_new) or s_new <= 0.0:
            return _bisect_root(a, sigma, q, weight, tol), it
        s = s_new
    return _bisect_root(a, sigma, q, weight, tol), max_newton


def newton_r_sweep(
    a: np.ndarray,
    sigma: float,
    q: float,
    weights: np.ndarray,
    r_init: np.ndarray,
    tol: float,
    max_newton: int = 50,
) -> np.ndarray:
    """Vectorized sweep of :func:`newton_r` over all coordinates.

    Coordinates run the same update sequence as independent scalar calls, so
    the result does not depend on evaluation order.
    """
    s = np.array(r_init, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    qw_over_sigma = q * w / sigma
    active = np.abs(-q * w / s ** (q + 1.0) + sigma * (s - a)) > tol
    for _ in range(max_newton):
        if not active.any():
            return s
        sa, aa = s[active], a[active]
        qws = qw_over_sigma[active]
        s_pow = sa ** (q + 1.0)
        s_new = sa * ((q + 2.0) * qws + aa * s_pow) / ((q + 1.0) * qws + s_pow * sa)
        bad = ~np.isfinite(s_new) | (s_new <= 0.0)
        if bad.any():
            idx = np.flatnonzero(active)[bad]
            for i in idx:
                s[i] = _bisect_root(float(a[i]), sigma, q, float(w[i]), tol)
            s_new = s_new[~bad]
            keep = np.flatnonzero(active)[~bad]
            active[:] = False
            active[keep] = True
            sa = s[active]
        s[active] = s_new
        foc = -q * w[active] * s_new ** (-(q + 1.0)) + sigma * (s_new - a[active])
        still = np.abs(foc) > tol
        idx_active = np.flatnonzero(active)
        active[idx_active[~still]] = False
    for i in np.flatnonzero(active):
        s[i] = _bisect_root(float(a[i]), sigma, q, float(w[i]), tol)
    return s

"""Inexact sGS-ADMM solver for generalized distance weighted discrimination.

The training problem (after global scaling) is

    min  sum_i w_i / r_i^q + C <e, xi>
    s.t. Zt^T wt + beta y + xi - r = 0,   r > 0,  xi >= 0,  ||wt|| <= z_scale,

where Zt is the label-signed, globally scaled data matrix. One iteration
sweeps: an inexact solve of the (d+1)-dimensional normal system for
(wt, beta); n independent one-dimensional margin subproblems for r; an
optional re-solve of the normal system with the fresh r (the symmetric
Gauss-Seidel step, skippable when the stale solution is accurate enough);
closed-form updates of the ball-projected copy u and the slack xi; and the
multiplier updates. Stopping is on normalized KKT residuals and the relative
duality gap.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .ingest import FeatureMeta, ModelFile, identity_meta
from .linalg import SparseMatrixCSC, psqmr
from .subsolvers import (
    SolverKind,
    build_direct,
    build_proximal,
    build_smw,
    newton_r_sweep,
    select_solver,
    shifted_block_apply,
    solve_direct,
    solve_proximal,
    solve_smw,
)


class SingleClassError(ValueError):
    """Both classes must be present."""


class Backend(enum.Enum):
    AUTO = "auto"
    DIRECT = "direct"
    SMW2 = "smw2"
    ITERATIVE = "iterative"

    def resolve(self, n: int, d: int) -> SolverKind:
        if self is Backend.AUTO:
            return select_solver(n, d)
        return SolverKind(self.value)


@dataclass(frozen=True)
class ProblemData:
    """Scaled training problem. ``z_tilde`` is d x n with column i equal to
    ``y_i x_i / z_scale``; ``weights`` are the per-sample loss weights."""

    z_tilde: SparseMatrixCSC
    y: np.ndarray
    e: np.ndarray
    weights: np.ndarray
    C: float
    q: float
    z_scale: float

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.float64))
        object.__setattr__(self, "e", np.asarray(self.e, dtype=np.float64))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        n = self.z_tilde.ncols
        if self.y.shape != (n,) or not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise ValueError("labels must be a length-n vector over {-1,+1}")
        if self.e.shape != (n,) or np.any(self.e <= 0):
            raise ValueError("e must be positive of length n")
        if not np.isclose(self.e.max(), 1.0):
            raise ValueError("e must be normalized to max-norm 1")
        if self.weights.shape != (n,) or np.any(self.weights <= 0):
            raise ValueError("weights must be positive of length n")
        if not (self.C > 0 and self.q > 0 and self.z_scale > 0):
            raise ValueError("C, q and z_scale must be positive")

    @property
    def n(self) -> int:
        return self.z_tilde.ncols

    @property
    def d(self) -> int:
        return self.z_tilde.nrows


_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class SolverConfig:
    q: float = 1.0
    max_iter: int = 2000
    steplength: float = 1.618
    tol_feas: float = 1e-5
    tol_cgap: float = math.sqrt(1e-5)
    tol_cap: float = 0.05
    sigma0: Optional[float] = None
    epsilon_c: Optional[float] = None
    backend: Backend = Backend.AUTO
    use_sgs: bool = True
    ell: int = 10
    mu: float = 1.0
    psqmr_switch_steps: int = 50
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.steplength <= 1.618034:
            raise ValueError(f"steplength must lie in (0, {_GOLDEN:.6f})")
        if min(self.tol_feas, self.tol_cgap, self.tol_cap) <= 0:
            raise ValueError("tolerances must be positive")
        if self.q <= 0 or self.mu <= 0 or self.ell < 1 or self.max_iter < 1:
            raise ValueError("q, mu must be positive; ell, max_iter at least 1")


@dataclass
class SolverState:
    """End-of-iteration iterates plus the penalty bookkeeping."""

    r: np.ndarray
    xi: np.ndarray
    alpha: np.ndarray
    w: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    beta: float
    sigma: float
    iter: int
    eps_c: float


@dataclass(frozen=True)
class KKTResiduals:
    eta_c1: float
    eta_c2: float
    eta_c3: float
    eta_p1: float
    eta_p2: float
    eta_p3: float
    eta_d1: float
    eta_d2: float
    eta_gap: float
    obj_primal: float
    obj_dual: float

    @property
    def eta_p(self) -> float:
        return max(self.eta_p1, self.eta_p2, self.eta_p3)

    @property
    def eta_d(self) -> float:
        return max(self.eta_d1, self.eta_d2)

    @property
    def eta_c(self) -> float:
        return max(self.eta_c1, self.eta_c2, self.eta_c3)


@dataclass
class SolveResult:
    model: ModelFile
    iterations: int
    psqmr_total: int
    double_count: int
    solve_time: float
    read_time: float
    final_residuals: KKTResiduals
    final_state: SolverState
    train_error_pct: float
    backend_used: SolverKind
    C_used: float
    converged: bool


# ---------------------------------------------------------------------------
# Penalty parameter, class weights, scaling.
# ---------------------------------------------------------------------------

_SUBSAMPLE_LIMIT = 2000


def compute_penalty_C(
    x: SparseMatrixCSC, y: np.ndarray, q: float, seed: int = 0
) -> tuple[float, float]:
    """Empirical slack penalty from the median between-class distance.

    ``C = 10^(q+1) * max(1, 10^(q-1) * ln(n) * max(1000, d)^(1/3) / dist^(q+1))``
    where ``dist`` is the median Euclidean distance over between-class sample
    pairs (classes subsampled to 2000 points each beyond that size; exact
    zero distances from duplicated points are excluded).
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    pos = np.flatnonzero(y > 0)
    neg = np.flatnonzero(y < 0)
    if pos.size == 0 or neg.size == 0:
        raise SingleClassError("both classes are required to set the penalty")
    rng = np.random.default_rng(seed)
    if pos.size > _SUBSAMPLE_LIMIT:
        pos = np.sort(rng.choice(pos, _SUBSAMPLE_LIMIT, replace=False))
    if neg.size > _SUBSAMPLE_LIMIT:
        neg = np.sort(rng.choice(neg, _SUBSAMPLE_LIMIT, replace=False))
    xs = x.scipy
    a = xs[:, pos]
    b = xs[:, neg]
    sq_a = np.asarray(a.multiply(a).sum(axis=0)).ravel()
    sq_b = np.asarray(b.multiply(b).sum(axis=0)).ravel()
    gram = (a.T @ b).toarray()
    d2 = sq_a[:, None] + sq_b[None, :] - 2.0 * gram
    np.maximum(d2, 0.0, out=d2)
    dists = np.sqrt(d2.ravel())
    dists = dists[dists > 0.0]
    if dists.size == 0:
        raise ValueError("all between-class distances are zero")
    dist = float(np.median(dists))
    c = 10.0 ** (q + 1.0) * max(
        1.0,
        10.0 ** (q - 1.0) * math.log(n) * max(1000.0, float(x.nrows)) ** (1.0 / 3.0)
        / dist ** (q + 1.0),
    )
    return c, dist


def compute_weights(y: np.ndarray, q: float) -> np.ndarray:
    """Class-imbalance weights in (0, 1]; the majority class gets the smaller
    weight and balanced classes get all ones."""
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    if n < 2:
        raise ValueError("need at least two samples")
    n_pos = int(np.sum(y > 0))
    n_neg = int(np.sum(y < 0))
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("both classes are required to set weights")
    k = n / math.log(n)
    tau_pos = (n_pos / k) ** (1.0 / (1.0 + q))
    tau_neg = (n_neg / k) ** (1.0 / (1.0 + q))
    top = max(tau_pos, tau_neg)
    return np.where(y > 0, tau_neg / top, tau_pos / top)


def scale_problem(
    x: SparseMatrixCSC,
    y: np.ndarray,
    e: Optional[np.ndarray],
    C: float,
    q: float,
    tau: Optional[np.ndarray] = None,
) -> ProblemData:
    """Build the scaled problem: sign the columns by the labels, divide by
    ``sqrt(frobenius_norm(X))``, and store the loss weights ``tau^q``."""
    y = np.asarray(y, dtype=np.float64)
    n = x.ncols
    fro = x.frobenius_norm()
    if fro == 0.0:
        raise ValueError("all-zero data matrix")
    z_scale = math.sqrt(fro)
    col_sign = np.repeat(y, np.diff(x.colptr))
    z_tilde = SparseMatrixCSC(
        nrows=x.nrows,
        ncols=x.ncols,
        colptr=x.colptr.copy(),
        rowidx=x.rowidx.copy(),
        values=x.values * col_sign / z_scale,
    )
    if e is None:
        e = np.ones(n)
    if tau is None:
        tau = np.ones(n)
    weights = np.asarray(tau, dtype=np.float64) ** q
    return ProblemData(
        z_tilde=z_tilde, y=y, e=np.asarray(e, dtype=np.float64),
        weights=weights, C=float(C), q=float(q), z_scale=z_scale,
    )


# ---------------------------------------------------------------------------
# KKT residuals, duality gap, penalty adaptation.
# ---------------------------------------------------------------------------


def dual_objective(data: ProblemData, alpha: np.ndarray) -> float:
    """Dual value ``kappa * sum w^(1/(q+1)) a^(q/(q+1)) - z_scale ||Zt a||``;
    negative parts of ``alpha`` contribute nothing (they are measured by the
    dual-feasibility residual instead)."""
    q = data.q
    kappa = (q + 1.0) / q * q ** (1.0 / (q + 1.0))
    a_pos = np.maximum(alpha, 0.0)
    za = data.z_tilde.scipy @ alpha
    return float(
        kappa * np.sum(data.weights ** (1.0 / (q + 1.0)) * a_pos ** (q / (q + 1.0)))
        - data.z_scale * np.linalg.norm(za)
    )


def primal_objective(data: ProblemData, r: np.ndarray, xi: np.ndarray) -> float:
    return float(np.sum(data.weights / r ** data.q) + data.C * (data.e @ xi))


def kkt_residuals(
    state: SolverState, data: ProblemData, mu: float = 1.0
) -> KKTResiduals:
    """Normalized optimality residuals of the current iterate."""
    q, C = data.q, data.C
    y, e, w_loss = data.y, data.e, data.weights
    zs = data.z_tilde.scipy
    one_c = 1.0 + C
    if np.any(state.r <= 0.0):
        raise AssertionError("margin iterate left the positive orthant")

    ztw = zs.T @ state.w
    s = q * w_loss / state.r ** (q + 1.0)
    eta_c1 = abs(float(y @ state.alpha)) / one_c
    eta_c2 = abs(float(state.xi @ (C * e - state.alpha))) / one_c
    eta_c3 = float(np.sum((state.alpha - s) ** 2)) / one_c
    eta_p1 = float(np.linalg.norm(ztw + state.beta * y + state.xi - state.r)) / one_c
    eta_p2 = mu * float(np.linalg.norm(state.w - state.u)) / one_c
    eta_p3 = max(float(np.linalg.norm(state.w)) - data.z_scale, 0.0) / one_c
    eta_d1 = float(np.linalg.norm(np.minimum(state.alpha, 0.0))) / one_c
    eta_d2 = float(np.linalg.norm(np.maximum(state.alpha - C * e, 0.0))) / one_c
    obj_p = primal_objective(data, state.r, state.xi)
    obj_d = dual_objective(data, state.alpha)
    eta_gap = abs(obj_p - obj_d) / (1.0 + abs(obj_p) + abs(obj_d))
    return KKTResiduals(
        eta_c1=eta_c1, eta_c2=eta_c2, eta_c3=eta_c3,
        eta_p1=eta_p1, eta_p2=eta_p2, eta_p3=eta_p3,
        eta_d1=eta_d1, eta_d2=eta_d2, eta_gap=eta_gap,
        obj_primal=obj_p, obj_dual=obj_d,
    )


def update_sigma(sigma: float, eta_p: float, eta_d: float) -> float:
    """Grow or shrink the augmented-Lagrangian penalty when the primal and
    dual residuals are out of balance (ratio beyond 5), with larger factors
    the more extreme the imbalance."""
    if eta_p == 0.0 and eta_d == 0.0:
        return sigma
    chi = math.inf if eta_d == 0.0 else eta_p / eta_d
    inv_chi = math.inf if eta_p == 0.0 else eta_d / eta_p
    imbalance = max(chi, inv_chi)
    if imbalance > 500.0:
        zeta = 2.2
    elif imbalance > 50.0:
        zeta = 1.65
    else:
        zeta = 1.1
    if chi > 5.0:
        return sigma * zeta
    if inv_chi > 5.0:
        return sigma / zeta
    return sigma


def project_dual_feasible(
    alpha: np.ndarray, y: np.ndarray, upper: np.ndarray
) -> np.ndarray:
    """Euclidean projection onto ``{0 <= a <= upper, <y, a> = 0}`` via
    bisection on the multiplier of the hyperplane constraint."""
    alpha = np.asarray(alpha, dtype=np.float64)
    span = float(np.abs(alpha).max(initial=0.0) + upper.max() + 1.0)
    lo, hi = -span, span

    def balance(lam: float) -> float:
        return float(y @ np.clip(alpha - lam * y, 0.0, upper))

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if balance(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    return np.clip(alpha - lam * y, 0.0, upper)


# ---------------------------------------------------------------------------
# Main loop.
# ---------------------------------------------------------------------------


def sgs_admm_solve(
    data: ProblemData,
    config: SolverConfig,
    meta: Optional[FeatureMeta] = None,
    callback: Optional[Callable[[SolverState, KKTResiduals], None]] = None,
) -> SolveResult:
    """Run the solver to the KKT stopping rule or the iteration cap.

    ``meta`` carries the preprocessing record into the returned model
    (identity if omitted). ``callback(state, residuals)`` is invoked at the
    end of every iteration. Hitting ``max_iter`` is reported through
    ``converged=False``, not an error.
    """
    t_start = time.perf_counter()
    n, d = data.n, data.d
    q, C, mu = data.q, data.C, config.mu
    mu_sq = mu * mu
    y, e, w_loss = data.y, data.e, data.weights
    zs = data.z_tilde.scipy
    zst = zs.T
    z_scale = data.z_scale
    tau = config.steplength
    sqrt_n = math.sqrt(n)

    kind = config.backend.resolve(n, d)
    zy = zs @ y
    yty = float(y @ y)

    direct_factor = None
    smw_factor = None
    prox_factor = None
    if kind is SolverKind.DIRECT:
        direct_factor = build_direct(data.z_tilde, y, mu_sq)
    elif kind is SolverKind.SMW2:
        smw_factor = build_smw(data.z_tilde, y, mu_sq)
    else:
        jacobi = np.concatenate([data.z_tilde.row_sq_sums() + mu_sq, [max(yty, mu_sq)]])
        jacobi = np.maximum(jacobi, 1e-12)

        def apply_a(v: np.ndarray) -> np.ndarray:
            head, tail = v[:d], v[d]
            top = zs @ (zst @ head) + mu_sq * head + zy * tail
            bot = float(zy @ head) + yty * tail
            return np.concatenate([top, [bot]])

        def precond(v: np.ndarray) -> np.ndarray:
            return v / jacobi

    sigma = config.sigma0 if config.sigma0 is not None else min(10.0 * C, float(n)) ** q
    eps_c = (
        config.epsilon_c
        if config.epsilon_c is not None
        else 1.0 / max(1.0, data.z_tilde.frobenius_norm())
    )

    r = np.ones(n)
    xi = np.ones(n)
    alpha = np.zeros(n)
    w = np.zeros(d)
    u = np.zeros(d)
    rho = np.zeros(d)
    beta = 0.0
    ztw = np.zeros(n)

    psqmr_total = 0
    double_count = 0
    converged = False

    def solve_system(h_top, h_bot, tol, x0, anchor_w, anchor_ztw):
        """Solve the normal system to absolute residual ``tol``. Falls over to
        the shifted closed form permanently once the Krylov solver exceeds its
        step budget; the shift term for the current anchor is added here."""
        nonlocal prox_factor, psqmr_total
        if kind is SolverKind.DIRECT:
            return solve_direct(direct_factor, np.concatenate([h_top, [h_bot]]))
        if kind is SolverKind.SMW2:
            return solve_smw(smw_factor, data.z_tilde, y, np.concatenate([h_top, [h_bot]]))
        if prox_factor is None:
            res = psqmr(
                apply_a,
                np.concatenate([h_top, [h_bot]]),
                precond=precond,
                tol=tol,
                max_iter=config.psqmr_switch_steps,
                x0=x0,
            )
            psqmr_total += res.iterations
            if res.converged:
                return res.x
            prox_factor = build_proximal(
                data.z_tilde, y, mu_sq, config.ell, seed=config.seed
            )
        shift_anchor = (
            shifted_block_apply(prox_factor, anchor_w)
            - mu_sq * anchor_w
            - zs @ anchor_ztw
        )
        return solve_proximal(
            prox_factor, np.concatenate([h_top + shift_anchor, [h_bot]])
        )

    for k in range(config.max_iter):
        eps_k = eps_c / (k + 1.0) ** 1.5
        rhs = xi - r - alpha / sigma
        h_top = -(zs @ rhs) + mu_sq * u + (mu / sigma) * rho
        h_bot = -float(y @ rhs)

        sol = solve_system(h_top, h_bot, eps_k, np.concatenate([w, [beta]]), w, ztw)
        w_bar, beta_bar = sol[:d], float(sol[d])
        ztw_bar = zst @ w_bar

        c_vec = ztw_bar + y * beta_bar + xi - alpha / sigma
        r_new = newton_r_sweep(c_vec, sigma, q, w_loss, r, tol=eps_k / sqrt_n)

        if config.use_sgs:
            dr = r_new - r
            h2_top = h_top + zs @ dr
            h2_bot = h_bot + float(y @ dr)
            if prox_factor is not None:
                shift_anchor = (
                    shifted_block_apply(prox_factor, w) - mu_sq * w - zs @ ztw
                )
                ax_top = shifted_block_apply(prox_factor, w_bar) + zy * beta_bar
                res_top = h2_top + shift_anchor - ax_top
            else:
                ax_top = zs @ ztw_bar + mu_sq * w_bar + zy * beta_bar
                res_top = h2_top - ax_top
            res_bot = h2_bot - (float(zy @ w_bar) + yty * beta_bar)
            reuse_residual = math.hypot(float(np.linalg.norm(res_top)), res_bot)
            if reuse_residual <= 5.0 * eps_k:
                w, beta, ztw = w_bar, beta_bar, ztw_bar
            else:
                double_count += 1
                sol2 = solve_system(
                    h2_top, h2_bot, 5.0 * eps_k,
                    np.concatenate([w_bar, [beta_bar]]), w, ztw,
                )
                w, beta = sol2[:d], float(sol2[d])
                ztw = zst @ w
        else:
            w, beta, ztw = w_bar, beta_bar, ztw_bar
        r = r_new

        g = w - rho / (sigma * mu)
        g_norm = float(np.linalg.norm(g))
        u = g if g_norm <= z_scale else (z_scale / g_norm) * g
        xi = np.maximum(0.0, r - ztw - y * beta + alpha / sigma - (C / sigma) * e)

        primal_gap = ztw + y * beta + xi - r
        alpha = alpha - (tau * sigma) * primal_gap
        rho = rho - (tau * sigma * mu) * (w - u)

        state = SolverState(r, xi, alpha, w, u, rho, beta, sigma, k + 1, eps_c)
        resid = kkt_residuals(state, data, mu)
        if callback is not None:
            callback(state, resid)
        if (
            max(resid.eta_p, resid.eta_d) < config.tol_feas
            and min(resid.eta_c, resid.eta_gap) < config.tol_cgap
            and max(resid.eta_c, resid.eta_gap) < config.tol_cap
        ):
            converged = True
            break
        sigma = update_sigma(sigma, resid.eta_p, resid.eta_d)

    solve_time = time.perf_counter() - t_start
    scores = beta + y * ztw
    train_err = 100.0 * float(np.mean(y * np.sign(scores) <= 0.0))

    if meta is None:
        meta = identity_meta(d)
    model = ModelFile(
        q=q,
        C=C,
        z_scale=z_scale,
        mu=mu,
        feature_meta=meta,
        w=w / z_scale,
        beta=beta,
        solver_info={
            "iterations": state.iter,
            "converged": converged,
            "backend": kind.value,
            "psqmr_total": psqmr_total,
            "double_count": double_count,
            "solve_time": solve_time,
            "train_error_pct": train_err,
            "residuals": {
                "eta_p": resid.eta_p,
                "eta_d": resid.eta_d,
                "eta_c": resid.eta_c,
                "eta_gap": resid.eta_gap,
                "obj_primal": resid.obj_primal,
                "obj_dual": resid.obj_dual,
            },
        },
    )
    return SolveResult(
        model=model,
        iterations=state.iter,
        psqmr_total=psqmr_total,
        double_count=double_count,
        solve_time=solve_time,
        read_time=0.0,
        final_residuals=resid,
        final_state=state,
        train_error_pct=train_err,
        backend_used=kind,
        C_used=C,
        converged=converged,
    )


# ---------------------------------------------------------------------------
# Applying a trained model.
# ---------------------------------------------------------------------------


def decision_values(model: ModelFile, x: SparseMatrixCSC) -> np.ndarray:
    """Scores ``beta + x_raw @ w_composite`` for raw samples (columns).

    Features beyond the training dimension are ignored; missing trailing
    features are treated as zero.
    """
    composite = model.composite_weights()
    d_in = x.nrows
    d_tr = composite.size
    if d_in == d_tr:
        w_eff = composite
        scores = x.scipy.T @ w_eff
    elif d_in > d_tr:
        w_eff = np.concatenate([composite, np.zeros(d_in - d_tr)])
        scores = x.scipy.T @ w_eff
    else:
        scores = x.scipy.T @ composite[:d_in]
    return model.beta + scores


def predict(model: ModelFile, x: SparseMatrixCSC) -> np.ndarray:
    """Hard labels in {-1,+1}; a zero score maps to +1 (error counting uses
    the <= 0 convention separately)."""
    scores = decision_values(model, x)
    return np.where(scores > 0.0, 1.0, -1.0)


def train_error(model: ModelFile, x: SparseMatrixCSC, y: np.ndarray) -> float:
    """Percentage of samples with ``y * sign(score) <= 0``; a score of exactly
    zero counts as wrong for both classes."""
    y = np.asarray(y, dtype=np.float64)
    scores = decision_values(model, x)
    return 100.0 * float(np.mean(y * np.sign(scores) <= 0.0))

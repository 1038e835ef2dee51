"""Inner minimization steps of the alternating optimization.

Three convex subproblems are solved per outer round, each exactly:

* dictionary update (B-step): weighted least squares with unit-ball column
  constraints, a QCQP. The unweighted / per-sample-weighted case reduces to
  a single Gram system and is solved through its Lagrangian dual; general
  per-element weights go through projected gradient descent.
* code update (S-step): l1-regularized weighted least squares with
  hypergraph coupling, solved by cyclic coordinate descent with exact
  scalar soft-threshold updates, Gauss-Seidel over columns.
* consistency dictionary update (Q-step): ridge least squares.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy.optimize import minimize

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap

from .data import as_values
from .errors import InvalidConfig, NumericalError, ShapeError
from .selfpace import (
    WeightState,
    effective_weight_column,
    effective_weight_matrix,
    spl_penalty,
)

_EPS = 1e-12


@dataclass(frozen=True)
class RegularizationConfig:
    """Trade-off weights: alpha (Laplacian), beta (sparsity), gamma (consistency)."""

    alpha: float = 0.0
    beta: float = 0.01
    gamma: float = 0.0

    def __post_init__(self):
        if self.alpha < 0:
            raise InvalidConfig(f"alpha must be >= 0, got {self.alpha}")
        if self.beta <= 0:
            raise InvalidConfig(f"beta must be > 0, got {self.beta}")
        if self.gamma < 0:
            raise InvalidConfig(f"gamma must be >= 0, got {self.gamma}")


def _check_shapes(Xv, B, S):
    if B.ndim != 2 or S.ndim != 2 or Xv.ndim != 2:
        raise ShapeError("X, B, S must be 2-D")
    if B.shape[1] != S.shape[0] or B.shape[0] != Xv.shape[0] or S.shape[1] != Xv.shape[1]:
        raise ShapeError(f"inconsistent shapes X{Xv.shape}, B{B.shape}, S{S.shape}")


def objective_terms(X, B, S, Q, H, V: WeightState | None, cfg: RegularizationConfig) -> dict:
    """Each additive term of the full objective, keyed by name.

    V = None means all weights equal one and no self-paced penalty (the
    plain sparse-coding objective used for initialization and baselines).
    """
    Xv = as_values(X)
    B = np.asarray(B, dtype=float)
    S = np.asarray(S, dtype=float)
    _check_shapes(Xv, B, S)
    m, n = Xv.shape
    E = Xv - B @ S
    if V is None:
        recon = float(np.sum(E * E))
        penalty = 0.0
    else:
        W = effective_weight_matrix(V, m, n)
        recon = float(np.sum(W * E * E))
        penalty = spl_penalty(V)
    consistency = 0.0
    if cfg.gamma > 0 and H is not None and Q is not None:
        R = H.incidence - np.asarray(Q, dtype=float) @ S
        consistency = float(cfg.gamma * np.sum(R * R))
    laplacian = 0.0
    if cfg.alpha > 0 and H is not None and H.L is not None:
        laplacian = float(cfg.alpha * np.sum((S @ H.L) * S))
    l1 = float(cfg.beta * np.sum(np.abs(S)))
    return {
        "recon": recon,
        "penalty": penalty,
        "consistency": consistency,
        "laplacian": laplacian,
        "l1": l1,
    }


def objective_value(X, B, S, Q, H, V: WeightState | None, cfg: RegularizationConfig) -> float:
    """Weighted reconstruction + self-paced penalty + R(S) + l1 sparsity."""
    return float(sum(objective_terms(X, B, S, Q, H, V, cfg).values()))


def s_objective(X, B, S, Q, H, V, cfg: RegularizationConfig) -> float:
    """The S-subproblem objective: everything except the self-paced penalty."""
    terms = objective_terms(X, B, S, Q, H, V, cfg)
    return float(terms["recon"] + terms["consistency"] + terms["laplacian"] + terms["l1"])


def s_objective_gradient_smooth(X, B, S, Q, H, V, cfg: RegularizationConfig) -> np.ndarray:
    """Gradient of the smooth part of the S-subproblem (everything but the l1)."""
    Xv = as_values(X)
    m, n = Xv.shape
    W = effective_weight_matrix(V, m, n) if V is not None else np.ones((m, n))
    G = 2.0 * (B.T @ (W * (B @ S - Xv)))
    if cfg.gamma > 0 and H is not None and Q is not None:
        G += 2.0 * cfg.gamma * (Q.T @ (Q @ S - H.incidence))
    if cfg.alpha > 0 and H is not None and H.L is not None:
        G += 2.0 * cfg.alpha * (S @ H.L)
    return G


def project_columns_unit_ball(B) -> np.ndarray:
    """Rescale columns with norm > 1 down to the unit sphere; idempotent."""
    B = np.array(B, dtype=float, copy=True)
    norms = np.linalg.norm(B, axis=0)
    over = norms > 1.0
    B[:, over] /= norms[over]
    return B


def _dual_kkt_residual(lam: np.ndarray, col_sq_norms: np.ndarray) -> float:
    # optimal iff lam >= 0, ||b_j||^2 <= 1, and lam_j (||b_j||^2 - 1) = 0
    return float(np.max(np.abs(np.minimum(lam, 1.0 - col_sq_norms)), initial=0.0))


def b_step_lagrange_dual(Xs, Ss, kkt_tol: float = 1e-8) -> np.ndarray:
    """Global minimizer of ||Xs - B Ss||_F^2 s.t. unit-ball columns of B.

    Callers fold per-sample weights in beforehand by scaling both matrices
    with Diag(sqrt(v)). The dual variables lam >= 0 enter through
    B(lam) = Xs Ss^T (Ss Ss^T + Diag(lam))^{-1}; the concave dual is
    maximized with bound-constrained quasi-Newton plus a projected Newton
    polish. A tiny ridge keeps the Gram system solvable when Ss is
    rank-deficient (unused atoms then get zero columns).
    """
    Xs = np.asarray(Xs, dtype=float)
    Ss = np.asarray(Ss, dtype=float)
    if Xs.shape[1] != Ss.shape[1]:
        raise ShapeError(f"column counts differ: X {Xs.shape}, S {Ss.shape}")
    r = Ss.shape[0]
    G = Ss @ Ss.T
    P = Xs @ Ss.T
    total = float(np.sum(Xs * Xs))
    ridge = 1e-10 * max(1.0, float(np.trace(G)) / r)

    def solve_for(lam):
        A = G + np.diag(lam + ridge)
        try:
            T = sla.cho_solve(sla.cho_factor(A), P.T)  # r x m, rows are atoms
        except np.linalg.LinAlgError:
            T = np.linalg.solve(A + 100 * ridge * np.eye(r), P.T)
        return T

    def neg_dual(lam):
        T = solve_for(lam)
        val = total - float(np.sum(P.T * T)) - float(np.sum(lam))
        sq = np.sum(T * T, axis=1)  # ||b_j||^2
        return -val, -(sq - 1.0)

    res = minimize(
        neg_dual,
        np.ones(r),
        jac=True,
        method="L-BFGS-B",
        bounds=[(0.0, None)] * r,
        options={"maxiter": 2000, "maxfun": 10000, "ftol": 1e-18, "gtol": 1e-12},
    )
    lam = np.maximum(res.x, 0.0)

    # projected Newton polish: Hessian of the dual is -2 (B^T B) o A^{-1}
    for _ in range(100):
        T = solve_for(lam)
        sq = np.sum(T * T, axis=1)
        if _dual_kkt_residual(lam, sq) <= kkt_tol:
            break
        A_inv = sla.cho_solve(sla.cho_factor(G + np.diag(lam + ridge)), np.eye(r))
        Hess = 2.0 * (T @ T.T) * A_inv + _EPS * np.eye(r)
        try:
            step = np.linalg.solve(Hess, sq - 1.0)
        except np.linalg.LinAlgError:
            step = (sq - 1.0) / np.maximum(np.diag(Hess), _EPS)
        cur = total - float(np.sum(P.T * T)) - float(np.sum(lam))
        t = 1.0
        improved = False
        for _ in range(40):
            cand = np.maximum(lam + t * step, 0.0)
            Tc = solve_for(cand)
            val = total - float(np.sum(P.T * Tc)) - float(np.sum(cand))
            if val > cur + 1e-16:
                lam = cand
                improved = True
                break
            t *= 0.5
        if not improved:
            break

    B = solve_for(lam).T
    return project_columns_unit_ball(B)


def b_step_projected_gradient(
    X, S, V: WeightState | None, B0, max_iters: int = 500, tol: float = 1e-9
) -> np.ndarray:
    """Weighted dictionary update for arbitrary element/feature weights.

    Monotone spectral projected gradient: the Barzilai-Borwein step seeds a
    backtracking line search, and every trial point has its columns
    projected back onto the unit l2 ball. Terminates on relative objective
    decrease below `tol` or `max_iters` steps.
    """
    Xv = as_values(X)
    S = np.asarray(S, dtype=float)
    m, n = Xv.shape
    W = effective_weight_matrix(V, m, n) if V is not None else np.ones((m, n))
    B = project_columns_unit_ball(B0)

    def value(Bc):
        E = Xv - Bc @ S
        return float(np.sum(W * E * E))

    def gradient(Bc):
        return -2.0 * ((W * (Xv - Bc @ S)) @ S.T)

    f = value(B)
    lip = 2.0 * float(np.linalg.norm(S, 2) ** 2) * float(W.max()) if W.max() > 0 else 0.0
    step = 1.0 / lip if lip > 0 else 1.0
    grad = gradient(B)
    for _ in range(max_iters):
        if not np.all(np.isfinite(grad)):
            raise NumericalError("non-finite gradient in dictionary update")
        if np.all(grad == 0.0):
            break  # e.g. all-zero weights: objective is flat, keep warm start
        accepted = False
        for _ in range(60):
            Bn = project_columns_unit_ball(B - step * grad)
            move = Bn - B
            dist2 = float(np.sum(move * move))
            if dist2 == 0.0:
                break  # projected fixed point
            fn = value(Bn)
            if fn <= f - 1e-4 / step * dist2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        grad_n = gradient(Bn)
        # Barzilai-Borwein trial step for the next round
        dg = grad_n - grad
        sy = float(np.sum(move * dg))
        step = float(np.sum(move * move)) / sy if sy > _EPS else step * 2.0
        rel = (f - fn) / max(abs(f), _EPS)
        B, f, grad = Bn, fn, grad_n
        if rel < tol:
            break
    return B


@njit(cache=True)
def _cd_kernel(A, b_lin, s, half_beta, tol, max_passes):
    """Cyclic soft-threshold updates on min s'As - 2 b's + beta ||s||_1.

    Runs passes over the coordinates in index order, each an exact scalar
    minimization, until no coordinate moves more than `tol`. An argument
    exactly at the soft-threshold kink lands on zero.
    """
    r = s.shape[0]
    p = A @ s  # running A s, updated rank-one per coordinate move
    for _ in range(max_passes):
        max_move = 0.0
        for t in range(r):
            att = A[t, t]
            rho = b_lin[t] - p[t] + att * s[t]
            if att <= 1e-12:
                new = 0.0  # no curvature left: the l1 term keeps it at zero
            else:
                mag = abs(rho) - half_beta
                if mag <= 0.0:
                    new = 0.0
                elif rho > 0.0:
                    new = mag / att
                else:
                    new = -mag / att
            move = new - s[t]
            if move != 0.0:
                for q in range(r):
                    p[q] += A[q, t] * move
                s[t] = new
                if abs(move) > max_move:
                    max_move = abs(move)
        if max_move < tol:
            break
    return s


def _column_system(i, Xv, B, Q, H, V, cfg, S):
    """Quadratic form (A, b) of column i's smooth objective: s'As - 2 b's + const."""
    m = Xv.shape[0]
    w = effective_weight_column(V, i, m) if V is not None else np.ones(m)
    A = (B * w[:, None]).T @ B
    b = B.T @ (w * Xv[:, i])
    if cfg.gamma > 0 and Q is not None and H is not None:
        A = A + cfg.gamma * (Q.T @ Q)
        b = b + cfg.gamma * (Q.T @ H.incidence[:, i])
    if cfg.alpha > 0 and H is not None and H.L is not None:
        lap_diag = float(H.L[i, i])
        A = A + (cfg.alpha * lap_diag) * np.eye(B.shape[1])
        coupling = S @ H.L[:, i] - lap_diag * S[:, i]
        b = b - cfg.alpha * coupling
    return A, b


def s_step_column(
    i, X, B, Q, H, V, cfg: RegularizationConfig, S, tol: float = 1e-9, max_passes: int = 500
) -> np.ndarray:
    """Exact convex solve for one code column by cyclic coordinate descent.

    Minimizes the weighted residual of column i plus the incidence
    consistency, Laplacian (other columns held fixed), and l1 terms. Each
    coordinate update is the closed-form scalar soft-threshold minimizer;
    iteration stops when no coordinate moves more than `tol`.
    """
    Xv = as_values(X)
    B = np.asarray(B, dtype=float)
    S = np.asarray(S, dtype=float)
    _check_shapes(Xv, B, S)
    A, b = _column_system(i, Xv, B, Q, H, V, cfg, S)
    if np.any(np.diag(A) < -1e-12):
        raise NumericalError("negative quadratic coefficient in code update")
    s = S[:, i].copy()  # the kernel updates in place; the caller's S stays put
    return _cd_kernel(
        np.ascontiguousarray(A), np.ascontiguousarray(b), s, 0.5 * cfg.beta, tol, max_passes
    )


def s_step_sweep(
    X, B, Q, H, V, cfg: RegularizationConfig, S0, tol: float = 1e-7, max_sweeps: int = 50
) -> np.ndarray:
    """Gauss-Seidel sweeps over columns in index order until stagnation.

    Column solves see their neighbors' freshest values, so the sweep
    objective is non-increasing; with alpha = 0 the columns decouple and a
    single sweep already solves each column independently.
    """
    S = np.array(S0, dtype=float, copy=True)
    n = S.shape[1]
    prev = s_objective(X, B, S, Q, H, V, cfg)
    for _ in range(max_sweeps):
        for i in range(n):
            S[:, i] = s_step_column(i, X, B, Q, H, V, cfg, S)
        cur = s_objective(X, B, S, Q, H, V, cfg)
        if (prev - cur) < tol * max(abs(prev), _EPS):
            break
        prev = cur
    return S


def q_step(incidence, S, ridge: float = 1e-8) -> np.ndarray:
    """Ridge least-squares fit of the incidence matrix in code space.

    Q = argmin ||I - QS||_F^2 + ridge ||Q||_F^2, via the normal equations;
    the ridge keeps the system solvable for any S (S = 0 gives Q = 0).
    """
    incidence = np.asarray(incidence, dtype=float)
    S = np.asarray(S, dtype=float)
    A = S @ S.T + ridge * np.eye(S.shape[0])
    return np.linalg.solve(A, S @ incidence.T).T

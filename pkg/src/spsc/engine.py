"""End-to-end alternating optimization with a growing learning pace.

The driver initializes dictionary and codes by plain (consistency-)sparse
coding with every element selected, picks the initial pace so a configured
fraction of items is admitted, then alternates closed-form weight updates,
dictionary updates, code sweeps, and optional consistency-dictionary
refreshes while the pace grows geometrically. Each outer iteration is
recorded in a trace (objective terms, sub-step objectives, selection
stats, and a snapshot of the weights).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .data import as_values
from .errors import InvalidConfig, NonFiniteObjective
from .selfpace import (
    Variant,
    WeightState,
    compute_losses,
    effective_weight_matrix,
    hard_weight_update,
    init_lambda,
    soft_weight_update,
)
from .solvers import (
    RegularizationConfig,
    b_step_lagrange_dual,
    b_step_projected_gradient,
    objective_terms,
    objective_value,
    project_columns_unit_ball,
    q_step,
    s_step_sweep,
)

__all__ = [
    "SPSCConfig",
    "TraceRow",
    "FitTrace",
    "FitResult",
    "fit_csc_init",
    "fit_spsc",
    "effective_weight_matrix",
]


@dataclass
class SPSCConfig:
    """Everything a fit needs besides the data and the hypergraph."""

    variant: Variant = Variant.ELEMENT
    reg: RegularizationConfig = field(default_factory=RegularizationConfig)
    r: int = 128
    spl_mode: str = "soft"
    mu: float = 1.2
    select_fraction0: float = 0.5
    max_outer_iters: int = 100
    tol_objective: float = 1e-5
    tol_weight_saturation: float = 1e-3
    seed: int = 0
    lambda0_scale: float = 1.0
    init_iters: int = 30
    q_update: str = "per-iteration"  # or "frozen"

    def __post_init__(self):
        self.variant = Variant(self.variant)
        if self.r < 1:
            raise InvalidConfig(f"dictionary size must be >= 1, got {self.r}")
        if self.spl_mode not in ("soft", "hard"):
            raise InvalidConfig(f"spl_mode must be soft or hard, got {self.spl_mode!r}")
        if self.mu <= 1:
            raise InvalidConfig(f"mu must be > 1, got {self.mu}")
        if not 0 < self.select_fraction0 <= 1:
            raise InvalidConfig(
                f"select_fraction0 must be in (0, 1], got {self.select_fraction0}"
            )
        if self.max_outer_iters < 1:
            raise InvalidConfig("max_outer_iters must be >= 1")
        if self.q_update not in ("per-iteration", "frozen"):
            raise InvalidConfig(f"unknown q_update policy {self.q_update!r}")
        if self.lambda0_scale <= 0:
            raise InvalidConfig("lambda0_scale must be > 0")


@dataclass
class TraceRow:
    """One outer iteration: objective breakdown plus selection statistics."""

    iteration: int
    lam: float
    objective: float
    recon: float
    penalty: float
    consistency: float
    laplacian: float
    l1: float
    selected_fraction: float
    mean_weight: float
    obj_start: float
    obj_after_v: float
    obj_after_b: float
    obj_after_s: float
    weights: np.ndarray  # snapshot of the native weight array

    @property
    def sc_objective(self) -> float:
        """The data-fit part (everything except the self-paced penalty)."""
        return self.recon + self.consistency + self.laplacian + self.l1


CSV_FIELDS = [
    "iteration",
    "lambda",
    "objective",
    "recon",
    "penalty",
    "consistency",
    "laplacian",
    "l1",
    "selected_fraction",
    "mean_weight",
    "obj_start",
    "obj_after_v",
    "obj_after_b",
    "obj_after_s",
]


@dataclass
class FitTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def lambdas(self) -> np.ndarray:
        return np.array([row.lam for row in self.rows])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_FIELDS)
            for row in self.rows:
                writer.writerow(
                    [
                        row.iteration,
                        repr(row.lam),
                        repr(row.objective),
                        repr(row.recon),
                        repr(row.penalty),
                        repr(row.consistency),
                        repr(row.laplacian),
                        repr(row.l1),
                        repr(row.selected_fraction),
                        repr(row.mean_weight),
                        repr(row.obj_start),
                        repr(row.obj_after_v),
                        repr(row.obj_after_b),
                        repr(row.obj_after_s),
                    ]
                )


@dataclass
class FitResult:
    B: np.ndarray
    S: np.ndarray
    Q: np.ndarray | None
    V_final: WeightState
    trace: FitTrace
    converged: bool
    iterations: int


def _weighted_recon(Xv, B, S, state: WeightState | None) -> float:
    E = Xv - B @ S
    if state is None:
        return float(np.sum(E * E))
    W = effective_weight_matrix(state, *Xv.shape)
    return float(np.sum(W * E * E))


def _b_step(Xv, S, state: WeightState | None, B_current) -> np.ndarray:
    """Dispatch to the dual (column-scalable weights) or projected gradient.

    The candidate is only accepted if it does not increase the weighted
    reconstruction, so the outer loop stays monotone even at the solvers'
    numerical floor.
    """
    if state is None or state.variant is Variant.SAMPLE:
        if state is None:
            Xs, Ss = Xv, S
        else:
            scale = np.sqrt(state.weights)
            Xs, Ss = Xv * scale[None, :], S * scale[None, :]
        candidate = b_step_lagrange_dual(Xs, Ss)
    else:
        candidate = b_step_projected_gradient(Xv, S, state, B_current)
    if _weighted_recon(Xv, candidate, S, state) <= _weighted_recon(Xv, B_current, S, state):
        return candidate
    return B_current


def fit_csc_init(X, H, cfg: SPSCConfig, on_iteration=None):
    """Plain sparse coding with every element selected; returns (B, S, Q).

    B starts from r distinct data columns plus a little seeded noise,
    projected onto the unit ball; S starts at zero; Q is refreshed from the
    codes whenever the consistency weight is active. Alternation stops on
    relative objective decrease below 1e-5 or after cfg.init_iters rounds.
    """
    Xv = as_values(X)
    m, n = Xv.shape
    if cfg.r > n:
        raise InvalidConfig(f"cannot seed {cfg.r} distinct columns from {n} samples")
    rng = np.random.default_rng(cfg.seed)
    idx = rng.choice(n, size=cfg.r, replace=False)
    jitter = 0.05 * float(np.sqrt(np.mean(Xv**2)))
    B = project_columns_unit_ball(Xv[:, idx] + jitter * rng.standard_normal((m, cfg.r)))
    S = np.zeros((cfg.r, n))
    use_q = cfg.reg.gamma > 0 and H is not None
    Q = q_step(H.incidence, S) if use_q else None

    prev = objective_value(X, B, S, Q, H, None, cfg.reg)
    for _ in range(cfg.init_iters):
        S = s_step_sweep(X, B, Q, H, None, cfg.reg, S)
        if use_q:
            Q = q_step(H.incidence, S)
        B = _b_step(Xv, S, None, B)
        cur = objective_value(X, B, S, Q, H, None, cfg.reg)
        if on_iteration is not None:
            on_iteration(cur)
        if (prev - cur) < 1e-5 * max(abs(prev), 1e-12):
            break
        prev = cur
    return B, S, Q


def fit_spsc(X, H, cfg: SPSCConfig) -> FitResult:
    """Run the full easy-to-hard alternation and return the fitted model.

    Per outer iteration at the current pace: closed-form weight update,
    dictionary update, code sweep, optional consistency-dictionary refresh,
    then fresh losses and a geometric pace step. Converged means the
    weights are saturated near one and the data-fit objective has stopped
    moving; the iteration cap applies regardless.
    """
    Xv = as_values(X)
    m, n = Xv.shape
    B, S, Q = fit_csc_init(X, H, cfg)
    losses = compute_losses(Xv, B, S, cfg.variant)
    lam0 = init_lambda(losses, cfg.select_fraction0) * cfg.lambda0_scale
    update = soft_weight_update if cfg.spl_mode == "soft" else hard_weight_update

    trace = FitTrace()
    state: WeightState | None = None
    prev_fit = None
    converged = False
    for t in range(cfg.max_outer_iters):
        lam = lam0 * cfg.mu**t  # the pace grows geometrically, exactly
        if state is None:
            pre_state = WeightState(
                cfg.variant, np.ones_like(losses.values), lam, cfg.mu, mode=cfg.spl_mode
            )
        else:
            pre_state = replace(state, lam=lam)
        obj_start = objective_value(X, B, S, Q, H, pre_state, cfg.reg)

        state = update(losses, lam, cfg.mu)
        obj_v = objective_value(X, B, S, Q, H, state, cfg.reg)
        B = _b_step(Xv, S, state, B)
        obj_b = objective_value(X, B, S, Q, H, state, cfg.reg)
        S = s_step_sweep(X, B, Q, H, state, cfg.reg, S)
        obj_s = objective_value(X, B, S, Q, H, state, cfg.reg)
        if cfg.reg.gamma > 0 and H is not None and cfg.q_update == "per-iteration":
            Q = q_step(H.incidence, S)
        losses = compute_losses(Xv, B, S, cfg.variant)

        terms = objective_terms(X, B, S, Q, H, state, cfg.reg)
        total = float(sum(terms.values()))
        row = TraceRow(
            iteration=t,
            lam=lam,
            objective=total,
            recon=terms["recon"],
            penalty=terms["penalty"],
            consistency=terms["consistency"],
            laplacian=terms["laplacian"],
            l1=terms["l1"],
            selected_fraction=float(np.mean(state.weights > 0)),
            mean_weight=float(state.weights.mean()),
            obj_start=obj_start,
            obj_after_v=obj_v,
            obj_after_b=obj_b,
            obj_after_s=obj_s,
            weights=state.weights.copy(),
        )
        trace.rows.append(row)
        if not np.isfinite(total):
            raise NonFiniteObjective(
                f"objective became non-finite at outer iteration {t}", trace=trace
            )

        fit_part = row.sc_objective  # the penalty grows with lambda by design
        if prev_fit is not None:
            stalled = abs(prev_fit - fit_part) < cfg.tol_objective * max(abs(prev_fit), 1e-12)
            saturated = float(state.weights.min()) >= 1.0 - cfg.tol_weight_saturation
            if stalled and saturated:
                converged = True
                break
        prev_fit = fit_part

    return FitResult(
        B=B,
        S=S,
        Q=Q,
        V_final=state,
        trace=trace,
        converged=converged,
        iterations=len(trace.rows),
    )

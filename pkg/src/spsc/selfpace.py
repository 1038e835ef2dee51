"""Self-paced weighting: losses, closed-form weight updates, pace schedule.

Weights live in [0, 1] at one of three granularities: per sample (one
weight per column), per feature (one per row), or per element (a full
m x n matrix). The pace parameter lambda admits items whose squared
reconstruction loss falls strictly below it; lambda grows geometrically
by the stepsize mu, so training sweeps from easy items to all items.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .data import as_values
from .errors import EmptyInput, InvalidPace, ShapeError


class Variant(str, Enum):
    """Granularity of the self-paced selection."""

    SAMPLE = "sample"
    FEATURE = "feature"
    ELEMENT = "element"


@dataclass
class LossField:
    """Squared reconstruction errors at one granularity.

    values has shape (n,) for SAMPLE, (m,) for FEATURE, (m, n) for ELEMENT.
    """

    variant: Variant
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ShapeError("losses must be finite and non-negative")


@dataclass
class WeightState:
    """Current selection weights plus the pace parameters that produced them."""

    variant: Variant
    weights: np.ndarray
    lam: float
    mu: float = 1.2
    mode: str = "soft"  # soft | hard

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.lam <= 0:
            raise InvalidPace(f"lambda must be > 0, got {self.lam}")
        if self.mu <= 1:
            raise InvalidPace(f"mu must be > 1, got {self.mu}")
        if np.any(self.weights < 0) or np.any(self.weights > 1):
            raise ShapeError("weights must lie in [0, 1]")


def compute_losses(X, B, S, variant: Variant) -> LossField:
    """Per-element squared errors, summed per column / row for coarser variants."""
    Xv, B, S = as_values(X), np.asarray(B, dtype=float), np.asarray(S, dtype=float)
    if B.shape[1] != S.shape[0] or B.shape[0] != Xv.shape[0] or S.shape[1] != Xv.shape[1]:
        raise ShapeError(
            f"inconsistent shapes X{Xv.shape}, B{B.shape}, S{S.shape}"
        )
    element = (Xv - B @ S) ** 2
    variant = Variant(variant)
    if variant is Variant.ELEMENT:
        return LossField(variant, element)
    if variant is Variant.SAMPLE:
        return LossField(variant, element.sum(axis=0))
    return LossField(variant, element.sum(axis=1))


def soft_weight_update(losses: LossField, lam: float, mu: float = 1.2) -> WeightState:
    """Linear soft weighting: v = 1 - loss/lambda below the pace, else 0.

    This is the exact minimizer of sum(v*loss) + lambda*(||v||^2/2 - ||v||_1)
    over v in [0, 1].
    """
    if lam <= 0:
        raise InvalidPace(f"lambda must be > 0, got {lam}")
    v = np.where(losses.values < lam, 1.0 - losses.values / lam, 0.0)
    return WeightState(losses.variant, v, lam, mu, mode="soft")


def hard_weight_update(losses: LossField, lam: float, mu: float = 1.2) -> WeightState:
    """Hard threshold: v = 1 for loss strictly below the pace, else 0."""
    if lam <= 0:
        raise InvalidPace(f"lambda must be > 0, got {lam}")
    v = (losses.values < lam).astype(float)
    return WeightState(losses.variant, v, lam, mu, mode="hard")


def spl_penalty(state: WeightState) -> float:
    """f(V; lambda): the self-paced regularizer evaluated at the weights."""
    v = state.weights
    if state.mode == "hard":
        return float(-state.lam * v.sum())
    return float(state.lam * (0.5 * np.sum(v * v) - v.sum()))


def init_lambda(losses: LossField, select_fraction: float) -> float:
    """Pick lambda so the requested fraction of items starts out selected.

    With c = ceil(fraction * N), lambda is the midpoint of the c-th and
    (c+1)-th smallest losses, which selects exactly c items when those
    order statistics differ. Full selection or ties fall back to a value
    just above the c-th smallest loss (ties then select everything up to
    and including the tied loss).
    """
    if not 0 < select_fraction <= 1:
        raise InvalidPace(f"select_fraction must be in (0, 1], got {select_fraction}")
    flat = np.sort(losses.values, axis=None)
    if flat.size == 0:
        raise EmptyInput("cannot initialize the pace from an empty loss field")
    c = int(np.ceil(select_fraction * flat.size))
    if c < flat.size and flat[c - 1] < flat[c]:
        return float(0.5 * (flat[c - 1] + flat[c]))
    return float(flat[c - 1] * 1.001 + 1e-12)


def advance_pace(state: WeightState) -> WeightState:
    """Grow lambda by the stepsize mu; weights are untouched."""
    if state.mu <= 1:
        raise InvalidPace(f"mu must be > 1, got {state.mu}")
    return replace(state, lam=state.lam * state.mu)


def effective_weight_matrix(state: WeightState, m: int, n: int) -> np.ndarray:
    """Broadcast the weights to the full (m, n) element grid."""
    v = state.weights
    if state.variant is Variant.ELEMENT:
        if v.shape != (m, n):
            raise ShapeError(f"expected element weights of shape {(m, n)}, got {v.shape}")
        return v
    if state.variant is Variant.SAMPLE:
        if v.shape != (n,):
            raise ShapeError(f"expected {n} sample weights, got {v.shape}")
        return np.broadcast_to(v, (m, n))
    if v.shape != (m,):
        raise ShapeError(f"expected {m} feature weights, got {v.shape}")
    return np.broadcast_to(v[:, None], (m, n))


def effective_weight_column(state: WeightState, i: int, m: int) -> np.ndarray:
    """The (m,) weight vector multiplying column i's squared residuals."""
    if state.variant is Variant.SAMPLE:
        return np.full(m, state.weights[i])
    if state.variant is Variant.FEATURE:
        return state.weights
    return state.weights[:, i]

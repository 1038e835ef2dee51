"""Clustering evaluation: Lloyd k-means, matched accuracy, and NMI."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidConfig, ShapeError


@dataclass
class ClusterResult:
    assignments: np.ndarray
    acc: float
    nmi: float
    per_run: list[tuple[float, float]]


def kmeans(Z, k: int, seed: int = 0, max_iters: int = 300, return_centers: bool = False):
    """Lloyd iterations from k distinct data columns as initial centers.

    Points are the columns of Z. Stops when assignments repeat or after
    `max_iters` rounds; a cluster that empties is re-seeded to the point
    farthest from its previous center.
    """
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[1]
    if not 1 <= k <= n:
        raise InvalidConfig(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    centers = Z[:, rng.choice(n, size=k, replace=False)].copy()
    point_sq = np.sum(Z * Z, axis=0)
    assignments = np.full(n, -1)
    for _ in range(max_iters):
        center_sq = np.sum(centers * centers, axis=0)
        d2 = center_sq[:, None] - 2.0 * (centers.T @ Z) + point_sq[None, :]
        new_assign = np.argmin(d2, axis=0)
        taken = set()
        for c in range(k):
            if np.any(new_assign == c):
                continue
            order = np.argsort(-d2[c])
            for p in order:
                if p not in taken:
                    new_assign[p] = c
                    taken.add(int(p))
                    break
        if np.array_equal(new_assign, assignments):
            break
        assignments = new_assign
        for c in range(k):
            members = Z[:, assignments == c]
            if members.shape[1]:
                centers[:, c] = members.mean(axis=1)
    if return_centers:
        return assignments, centers
    return assignments


def _contingency(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ShapeError(f"label vectors must match, got {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ShapeError("empty label vectors")
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    C = np.zeros((pi.max() + 1, ti.max() + 1))
    np.add.at(C, (pi, ti), 1.0)
    return C


def clustering_accuracy(pred, truth) -> float:
    """Purity under the optimal cluster-to-class mapping (Hungarian matched)."""
    C = _contingency(pred, truth)
    rows, cols = linear_sum_assignment(-C)  # maximize matches by cost negation
    return float(C[rows, cols].sum() / C.sum())


def _canonical_partition(labels):
    seen: dict = {}
    return np.array([seen.setdefault(v, len(seen)) for v in labels])


def nmi(pred, truth) -> float:
    """Mutual information normalized by sqrt of the marginal entropies.

    Natural-log entropies over empirical counts with the 0 log 0 = 0
    convention. If either partition has zero entropy the score is 1 for
    identical set partitions and 0 otherwise.
    """
    C = _contingency(pred, truth)
    n = C.sum()
    pj = C / n
    pp = pj.sum(axis=1)
    pt = pj.sum(axis=0)
    hp = float(-np.sum(pp[pp > 0] * np.log(pp[pp > 0])))
    ht = float(-np.sum(pt[pt > 0] * np.log(pt[pt > 0])))
    if hp == 0.0 or ht == 0.0:
        same = np.array_equal(_canonical_partition(pred), _canonical_partition(truth))
        return 1.0 if same else 0.0
    nz = pj > 0
    mi = float(np.sum(pj[nz] * (np.log(pj[nz]) - np.log(np.outer(pp, pt)[nz]))))
    return float(min(1.0, max(0.0, mi / np.sqrt(hp * ht))))


def evaluate_repeated(Z, k: int, labels, repeats: int, seed: int = 0) -> ClusterResult:
    """Average ACC/NMI over `repeats` k-means restarts seeded seed, seed+1, ...

    The stored assignments come from the restart with the best ACC (first
    one on ties).
    """
    if repeats < 1:
        raise InvalidConfig(f"repeats must be >= 1, got {repeats}")
    labels = np.asarray(labels)
    per_run = []
    best_assign = None
    best_acc = -1.0
    for run in range(repeats):
        assign = kmeans(Z, k, seed=seed + run)
        acc = clustering_accuracy(assign, labels)
        score = nmi(assign, labels)
        per_run.append((acc, score))
        if acc > best_acc:
            best_acc = acc
            best_assign = assign
    accs = np.array([a for a, _ in per_run])
    nmis = np.array([s for _, s in per_run])
    return ClusterResult(best_assign, float(accs.mean()), float(nmis.mean()), per_run)

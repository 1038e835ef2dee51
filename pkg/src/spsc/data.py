"""Dataset ingestion, unit-norm preparation, synthetic data, and corruption.

Data matrices are dense float arrays of shape (m, n) with one sample per
column. The CSV interchange format is row-major (one matrix row per line),
with an optional trailing row of integer labels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSample, EmptyInput, ParseError


@dataclass
class DataMatrix:
    """An (m, n) dataset, columns are samples; labels are evaluation-only."""

    values: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ParseError(f"expected a 2-D matrix, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ParseError("data matrix contains non-finite entries")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (self.values.shape[1],):
                raise ParseError(
                    f"labels length {self.labels.shape} does not match {self.values.shape[1]} samples"
                )

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian corruption: entrywise x + rho * N(0, sigma^2)."""

    rho: float
    seed: int = 0

    def __post_init__(self):
        if self.rho < 0:
            raise ParseError(f"corruption ratio must be >= 0, got {self.rho}")


def as_values(X) -> np.ndarray:
    """Accept a DataMatrix or a bare array and return the (m, n) array."""
    if isinstance(X, DataMatrix):
        return X.values
    return np.asarray(X, dtype=float)


def load_matrix_csv(path, has_labels: bool = False) -> DataMatrix:
    """Read a rectangular numeric CSV; the last row holds labels if requested."""
    rows = []
    with open(path, newline="") as fh:
        for line_no, record in enumerate(csv.reader(fh), start=1):
            if not record or (len(record) == 1 and record[0].strip() == ""):
                continue  # ignore blank lines
            try:
                rows.append([float(cell) for cell in record])
            except ValueError as exc:
                raise ParseError(f"{path}:{line_no}: non-numeric cell ({exc})") from exc
    if not rows:
        raise EmptyInput(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ParseError(f"{path}: ragged rows, widths {sorted(widths)}")

    labels = None
    if has_labels:
        if len(rows) < 2:
            raise ParseError(f"{path}: label row requested but only one row present")
        raw = rows.pop()
        if any(v != int(v) for v in raw):
            raise ParseError(f"{path}: label row contains non-integer values")
        labels = np.array([int(v) for v in raw])
    return DataMatrix(np.array(rows, dtype=float), labels)


def save_matrix_csv(path, values: np.ndarray, labels=None) -> None:
    """Write a matrix in the row-major CSV format (labels as a trailing row)."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in values:
            writer.writerow([repr(float(v)) for v in row])
        if labels is not None:
            writer.writerow([int(v) for v in labels])


def normalize_columns_unit_l2(X: DataMatrix) -> DataMatrix:
    """Rescale every column to unit l2 norm; zero columns are an error."""
    V = as_values(X)
    norms = np.linalg.norm(V, axis=0)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DegenerateSample(zero)
    labels = X.labels if isinstance(X, DataMatrix) else None
    return DataMatrix(V / norms, labels)


def add_gaussian_noise(X: DataMatrix, spec: NoiseSpec) -> DataMatrix:
    """Corrupt every entry with rho-scaled white noise.

    The noise scale sigma is the population standard deviation over all
    entries of the input matrix, recomputed on each call. rho = 0 returns
    the input values unchanged.
    """
    V = as_values(X)
    labels = X.labels if isinstance(X, DataMatrix) else None
    if spec.rho == 0.0:
        return DataMatrix(V.copy(), labels)
    sigma = float(np.std(V))  # population form, divisor m*n
    rng = np.random.default_rng(spec.seed)
    noise = rng.normal(0.0, sigma, size=V.shape)
    return DataMatrix(V + spec.rho * noise, labels)


def synth_blobs(
    n_per_class: int,
    classes: int,
    m: int,
    r_true: int,
    noise_frac: float,
    seed: int,
) -> tuple[DataMatrix, np.ndarray]:
    """Desk-scale labeled data: sparse combinations of a random unit dictionary.

    Each class draws its codes from a class-specific subset of the ground
    truth atoms, so columns of the same class live on a common low-dim
    sparse model. floor(noise_frac * n) columns are additionally hit with
    heavy Gaussian noise; their indices are returned alongside the data.
    """
    if min(n_per_class, classes, m, r_true) < 1:
        raise ParseError("all counts must be >= 1")
    if not 0.0 <= noise_frac <= 1.0:
        raise ParseError(f"noise_frac must be in [0, 1], got {noise_frac}")

    rng = np.random.default_rng(seed)
    D = rng.normal(size=(m, r_true))
    D /= np.linalg.norm(D, axis=0)

    # atoms are dealt to classes round-robin; every class keeps >= 1 atom
    pools = [np.arange(g, r_true, classes) for g in range(classes)]
    pools = [p if p.size else np.array([g % r_true]) for g, p in enumerate(pools)]

    n = n_per_class * classes
    values = np.empty((m, n))
    labels = np.empty(n, dtype=int)
    col = 0
    for g in range(classes):
        pool = pools[g]
        for _ in range(n_per_class):
            support = rng.choice(pool, size=min(3, pool.size), replace=False)
            coeffs = rng.uniform(0.5, 1.5, size=support.size)
            values[:, col] = D[:, support] @ coeffs
            labels[col] = g
            col += 1

    n_corrupt = int(np.floor(noise_frac * n))
    corrupted = np.sort(rng.choice(n, size=n_corrupt, replace=False))
    if n_corrupt:
        scale = 2.0 * float(np.sqrt(np.mean(values**2)))
        values[:, corrupted] += rng.normal(0.0, scale, size=(m, n_corrupt))
    return DataMatrix(values, labels), corrupted

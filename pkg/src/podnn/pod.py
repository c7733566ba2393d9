"""Snapshot matrices and SVD-based reduced bases with tolerance truncation."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "SnapshotMatrix",
    "PodBasis",
    "build_snapshot_matrix",
    "compute_pod",
    "projection_error_sq",
    "project",
    "reconstruct",
    "singular_decay",
]


@dataclass(frozen=True)
class SnapshotMatrix:
    """Columns are high-fidelity solutions, one per parameter sample."""

    matrix: np.ndarray
    params: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=float))
        object.__setattr__(self, "params", np.atleast_2d(np.asarray(self.params, dtype=float)))
        if self.matrix.shape[1] != self.params.shape[0]:
            raise ValueError("column count must match the number of parameter samples")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("snapshot matrix contains non-finite entries")

    @property
    def n_snapshots(self) -> int:
        return self.matrix.shape[1]


def build_snapshot_matrix(params, solver, n_jobs: int = 1) -> SnapshotMatrix:
    """Solve for every parameter and stack the solutions column-wise.

    ``solver`` maps a parameter vector to a solution vector.  With
    ``n_jobs > 1`` solves fan out over processes; column order always follows
    the parameter order.
    """
    params = np.atleast_2d(np.asarray(params, dtype=float))
    if params.shape[0] == 0:
        raise ValueError("need at least one parameter sample")
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            cols = list(pool.map(solver, params))
    else:
        cols = []
        for mu in params:
            try:
                cols.append(np.asarray(solver(mu), dtype=float))
            except Exception as exc:
                raise RuntimeError(f"high-fidelity solve failed at mu={mu}: {exc}") from exc
    return SnapshotMatrix(np.column_stack(cols), params)


@dataclass(frozen=True)
class PodBasis:
    """Column-orthonormal reduced basis with its truncation metadata."""

    basis: np.ndarray
    singular_values: np.ndarray
    n_pod: int
    tolerance: float

    def __post_init__(self):
        sv = np.asarray(self.singular_values, dtype=float)
        if np.any(np.diff(sv) > 0) or np.any(sv <= 0):
            raise ValueError("singular values must be positive and non-increasing")
        object.__setattr__(self, "basis", np.asarray(self.basis, dtype=float))
        object.__setattr__(self, "singular_values", sv)


def compute_pod(snapshots: SnapshotMatrix, tolerance: float) -> PodBasis:
    """Reduced basis from the thin SVD, truncated by the energy tolerance.

    Keeps the smallest n with sum_{i<=n} s_i^2 / sum_i s_i^2 >= 1 - tol^2,
    where the total runs over the strictly positive singular values only.
    The SVD uses the LAPACK gesvd driver (Golub-Kahan bidiagonalization),
    a single deterministic path; each basis vector is scaled so its
    largest-magnitude entry is positive.
    """
    if not 0.0 < tolerance < 1.0:
        raise ValueError("tolerance must be in (0, 1)")
    s_mat = snapshots.matrix
    u, sigma, _ = scipy.linalg.svd(s_mat, full_matrices=False, lapack_driver="gesvd")
    cutoff = sigma[0] * max(s_mat.shape) * np.finfo(float).eps if sigma.size else 0.0
    rank = int(np.sum(sigma > cutoff))
    if rank == 0:
        raise ValueError("snapshot matrix is numerically zero")
    sigma = sigma[:rank]
    energy = np.cumsum(sigma**2)
    n_pod = int(np.searchsorted(energy / energy[-1], 1.0 - tolerance**2) + 1)
    n_pod = min(n_pod, rank)
    basis = u[:, :n_pod].copy()
    flip = np.sign(basis[np.argmax(np.abs(basis), axis=0), np.arange(n_pod)])
    basis *= np.where(flip == 0, 1.0, flip)
    return PodBasis(basis, sigma, n_pod, tolerance)


def projection_error_sq(snapshots: SnapshotMatrix, basis: np.ndarray) -> float:
    """Squared Frobenius distance between the snapshots and their projection."""
    v = np.asarray(basis, dtype=float)
    s = snapshots.matrix
    residual = s - v @ (v.T @ s)
    return float(np.sum(residual**2))


def project(basis: np.ndarray, u: np.ndarray) -> np.ndarray:
    v = np.asarray(basis, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.shape[0] != v.shape[0]:
        raise ValueError(f"length {u.shape[0]} does not match basis rows {v.shape[0]}")
    return v.T @ u


def reconstruct(basis: np.ndarray, coeff: np.ndarray) -> np.ndarray:
    v = np.asarray(basis, dtype=float)
    coeff = np.asarray(coeff, dtype=float)
    if coeff.shape[0] != v.shape[1]:
        raise ValueError(f"length {coeff.shape[0]} does not match basis columns {v.shape[1]}")
    return v @ coeff


def singular_decay(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalized singular values and the discarded-energy tail per index.

    Returns (sigma_i / sigma_1, sum_{j>i} sigma_j^2 / sum_j sigma_j^2) for
    i = 1..min(N, n_s); feeds the decay report CSV.
    """
    sigma = scipy.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False,
                             lapack_driver="gesvd")
    energy = sigma**2
    total = float(np.sum(energy))
    tail = (total - np.cumsum(energy)) / total
    return sigma / sigma[0], np.maximum(tail, 0.0)

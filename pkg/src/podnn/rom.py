"""Reduced least-squares solver: the online baseline and the label generator.

The reduced system applies the compact operator to every basis column; its
least-squares solution is computed through column-pivoted QR, which for a
full-column-rank matrix equals the Moore-Penrose pseudo-inverse solution.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .rbf_fd import HighFidelitySystem

__all__ = [
    "ReducedSystem",
    "AffineReducedModel",
    "assemble_reduced",
    "solve_reduced_ls",
    "reduced_solution",
    "RankDeficientError",
]


class RankDeficientError(RuntimeError):
    def __init__(self, message, smallest_singular=None):
        super().__init__(message)
        self.smallest_singular = smallest_singular


@dataclass(frozen=True)
class ReducedSystem:
    """Tall matrix B (compact operator applied to the basis) and stacked rhs."""

    matrix: np.ndarray
    rhs: np.ndarray

    @property
    def n_pod(self) -> int:
        return self.matrix.shape[1]


def assemble_reduced(system: HighFidelitySystem, basis: np.ndarray) -> ReducedSystem:
    """Apply the compact operator to each basis column.

    Interior rows get the stencil-weight action, boundary rows pass the basis
    through unchanged (identity block).
    """
    v = np.asarray(basis, dtype=float)
    if v.shape[0] != system.n:
        raise ValueError(f"basis rows {v.shape[0]} do not match system size {system.n}")
    b = np.empty_like(v)
    b[: system.n_interior] = system.operator_rows @ v
    b[system.n_interior:] = v[system.n_interior:]
    if not np.all(np.isfinite(b)):
        raise ValueError("reduced matrix contains non-finite entries")
    return ReducedSystem(b, np.asarray(system.rhs, dtype=float))


def solve_reduced_ls(rs: ReducedSystem, rank_tol: float = 1e-10,
                     cond_warn: float = 1e8) -> np.ndarray:
    """Least-squares coefficients minimizing ||B c - rhs||_2.

    Solved with column-pivoted QR (LAPACK gelsy).  Full column rank is
    required: the Gram spectrum is checked against ``rank_tol`` and a
    condition number above ``cond_warn`` only warns.
    """
    b, rhs = rs.matrix, rs.rhs
    gram_eigs = scipy.linalg.eigvalsh(b.T @ b)
    smallest = float(np.sqrt(max(gram_eigs[0], 0.0)))
    largest = float(np.sqrt(gram_eigs[-1]))
    if largest == 0.0 or smallest <= rank_tol * largest:
        raise RankDeficientError(
            f"reduced matrix is rank deficient (smallest singular value {smallest:.3e})",
            smallest_singular=smallest,
        )
    if smallest > 0 and largest / smallest > cond_warn:
        warnings.warn(f"reduced system condition number {largest / smallest:.2e}")
    c, _, rank, _ = scipy.linalg.lstsq(b, rhs, lapack_driver="gelsy")
    if rank < rs.n_pod:
        raise RankDeficientError(
            f"QR reports rank {rank} < {rs.n_pod}", smallest_singular=smallest
        )
    return c


def reduced_solution(basis: np.ndarray, coeff: np.ndarray) -> np.ndarray:
    """Expand reduced coefficients in the basis."""
    v = np.asarray(basis, dtype=float)
    coeff = np.asarray(coeff, dtype=float)
    if coeff.shape[0] != v.shape[1]:
        raise ValueError("coefficient length does not match basis columns")
    return v @ coeff


@dataclass(frozen=True)
class AffineReducedModel:
    """Precomputed affine pieces of the reduced system for fast online solves.

    B(mu) = B0 + mu1*B1 + mu2*B2 with a parameter-independent right-hand side
    (homogeneous Dirichlet data and mu-independent forcing).
    """

    b0: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    rhs: np.ndarray

    @classmethod
    def from_components(cls, c0: sp.spmatrix, c1: sp.spmatrix, c2: sp.spmatrix,
                        rhs: np.ndarray, basis: np.ndarray) -> "AffineReducedModel":
        v = np.asarray(basis, dtype=float)
        return cls(np.asarray(c0 @ v), np.asarray(c1 @ v), np.asarray(c2 @ v),
                   np.asarray(rhs, dtype=float))

    def system_for(self, mu) -> ReducedSystem:
        b = self.b0 + float(mu[0]) * self.b1 + float(mu[1]) * self.b2
        return ReducedSystem(b, self.rhs)

    def solve(self, mu) -> np.ndarray:
        return solve_reduced_ls(self.system_for(mu))

"""Explicit ReLU networks as matrix-vector sequences, with exact structural ops.

A network is a list of (weight, bias) layers; hidden layers apply ReLU, the
last layer is affine.  Weights are stored as CSR matrices with sorted
indices, and realization accumulates each output strictly in stored-column
order.  That ordering discipline is what makes the structural operations
below (concatenation, sparse concatenation, parallelization, depth
extension) reproduce sequential evaluation exactly, not approximately:
sparse concatenation interleaves each hidden unit with its negation so the
two halves cancel pairwise during accumulation.

Layer and nonzero accounting follows the composition rules exactly:
``L(concat) = L1 + L2 - 1``, ``L(sparse_concat) = L1 + L2``,
``L(parallelize) = max(L_i)`` with ``M = sum(M_i)`` in the equal-depth case.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ReluNetwork",
    "affine_network",
    "vec",
    "matr",
    "realize",
    "concat",
    "identity_net",
    "sparse_concat",
    "parallelize",
    "extend_to_depth",
    "size_report",
]


def _canonical_weight(w) -> sp.csr_matrix:
    mat = sp.csr_matrix(w, dtype=np.float64, copy=True)
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


class ReluNetwork:
    """Matrix-vector sequence ((W_1, b_1), ..., (W_L, b_L))."""

    def __init__(self, layers):
        if not layers:
            raise ValueError("a network needs at least one layer")
        self.layers = []
        prev_out = None
        for w, b in layers:
            w = _canonical_weight(w)
            b = np.ascontiguousarray(b, dtype=np.float64).ravel()
            if b.shape[0] != w.shape[0]:
                raise ValueError("bias length does not match layer output width")
            if prev_out is not None and w.shape[1] != prev_out:
                raise ValueError(
                    f"layer input width {w.shape[1]} does not chain with {prev_out}"
                )
            prev_out = w.shape[0]
            self.layers.append((w, b))

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def widths(self) -> tuple:
        return (self.input_dim,) + tuple(w.shape[0] for w, _ in self.layers)

    def layer_nonzeros(self, i: int) -> int:
        w, b = self.layers[i]
        return int(np.count_nonzero(w.data)) + int(np.count_nonzero(b))

    @property
    def nonzeros(self) -> int:
        return sum(self.layer_nonzeros(i) for i in range(self.depth))

    def __call__(self, x):
        return realize(self, x)


def affine_network(w, b) -> ReluNetwork:
    """Single affine layer ((W, b))."""
    return ReluNetwork([(w, b)])


def vec(a) -> np.ndarray:
    """Column-major flattening of a matrix."""
    return np.asarray(a, dtype=float).reshape(-1, order="F").copy()


def matr(v, n: int, k: int) -> np.ndarray:
    """Inverse of :func:`vec` for an n x k matrix."""
    v = np.asarray(v, dtype=float)
    if v.size != n * k:
        raise ValueError(f"vector of length {v.size} is not an {n}x{k} matrix")
    return v.reshape((n, k), order="F").copy()


def realize(net: ReluNetwork, x):
    """Evaluate the network; accepts a vector or a (input_dim, batch) matrix."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != net.input_dim:
        raise ValueError(f"input length {x.shape[0]} != network input {net.input_dim}")
    for w, b in net.layers[:-1]:
        x = w @ x
        x += b if x.ndim == 1 else b[:, None]
        np.maximum(x, 0.0, out=x)
    w, b = net.layers[-1]
    x = w @ x
    x += b if x.ndim == 1 else b[:, None]
    return x


def concat(phi1: ReluNetwork, phi2: ReluNetwork) -> ReluNetwork:
    """Composition phi1(phi2(.)) with the boundary layers fused; L = L1+L2-1."""
    if phi1.input_dim != phi2.output_dim:
        raise ValueError(
            f"cannot compose: {phi1.input_dim}-dim input after {phi2.output_dim}-dim output"
        )
    w_first, b_first = phi1.layers[0]
    w_last, b_last = phi2.layers[-1]
    fused_w = (w_first @ w_last).tocsr()
    fused_b = w_first @ b_last + b_first
    return ReluNetwork(phi2.layers[:-1] + [(fused_w, fused_b)] + phi1.layers[1:])


def identity_net(n: int, j: int) -> ReluNetwork:
    """Exact identity on R^n in j layers.

    ``j = 1`` is the plain affine identity with n nonzeros; deeper versions
    carry x as (sigma(x), sigma(-x)) through the hidden layers and recombine,
    so every nonzero parameter is +-1 and M = 2nj.
    """
    if j < 1:
        raise ValueError("depth must be at least 1")
    eye = sp.eye(n, format="csr")
    if j == 1:
        return ReluNetwork([(eye, np.zeros(n))])
    split = sp.vstack([eye, -eye]).tocsr()
    join = sp.hstack([eye, -eye]).tocsr()
    layers = [(split, np.zeros(2 * n))]
    for _ in range(j - 2):
        layers.append((sp.eye(2 * n, format="csr"), np.zeros(2 * n)))
    layers.append((join, np.zeros(n)))
    return ReluNetwork(layers)


def _interleave_rows(w: sp.csr_matrix, b: np.ndarray):
    """Rows (w_j, -w_j) alternating: the split half of the identity block."""
    coo = w.tocoo()
    rows = np.concatenate([2 * coo.row, 2 * coo.row + 1])
    cols = np.concatenate([coo.col, coo.col])
    data = np.concatenate([coo.data, -coo.data])
    out = sp.csr_matrix((data, (rows, cols)), shape=(2 * w.shape[0], w.shape[1]))
    bias = np.empty(2 * b.shape[0])
    bias[0::2] = b
    bias[1::2] = -b
    return out, bias


def _interleave_cols(w: sp.csr_matrix):
    """Columns (w_j, -w_j) alternating: the join half of the identity block."""
    coo = w.tocoo()
    rows = np.concatenate([coo.row, coo.row])
    cols = np.concatenate([2 * coo.col, 2 * coo.col + 1])
    data = np.concatenate([coo.data, -coo.data])
    return sp.csr_matrix((data, (rows, cols)), shape=(w.shape[0], 2 * w.shape[1]))


def sparse_concat(phi1: ReluNetwork, phi2: ReluNetwork) -> ReluNetwork:
    """Composition through a two-layer identity block; L = L1 + L2.

    Equivalent to ``concat(phi1, concat(identity_net(n, 2), phi2))`` up to a
    permutation of the inserted hidden units: interleaving each unit with its
    negation makes the composed realization reproduce sequential evaluation
    exactly, and keeps M <= 2 M(phi1) + 2 M(phi2).
    """
    if phi1.input_dim != phi2.output_dim:
        raise ValueError(
            f"cannot compose: {phi1.input_dim}-dim input after {phi2.output_dim}-dim output"
        )
    w_last, b_last = phi2.layers[-1]
    w_first, b_first = phi1.layers[0]
    split_w, split_b = _interleave_rows(w_last, b_last)
    join_w = _interleave_cols(w_first)
    return ReluNetwork(
        phi2.layers[:-1] + [(split_w, split_b), (join_w, b_first)] + phi1.layers[1:]
    )


def extend_to_depth(phi: ReluNetwork, target_depth: int) -> ReluNetwork:
    """Pad a network to the requested depth without changing its realization."""
    extra = target_depth - phi.depth
    if extra < 0:
        raise ValueError(f"cannot shrink depth {phi.depth} to {target_depth}")
    if extra == 0:
        return phi
    return sparse_concat(identity_net(phi.output_dim, extra), phi)


def parallelize(*phis: ReluNetwork) -> ReluNetwork:
    """Block-diagonal stacking; inputs are concatenated, outputs stacked.

    Networks of unequal depth are first padded with identity layers, so
    L = max(L_i); when the depths already agree, M is exactly the sum of the
    parts.
    """
    if not phis:
        raise ValueError("nothing to parallelize")
    if len(phis) == 1:
        return phis[0]
    depth = max(p.depth for p in phis)
    padded = [extend_to_depth(p, depth) for p in phis]
    layers = []
    for i in range(depth):
        blocks = [p.layers[i][0] for p in padded]
        bias = np.concatenate([p.layers[i][1] for p in padded])
        layers.append((sp.block_diag(blocks, format="csr"), bias))
    return ReluNetwork(layers)


def size_report(phi: ReluNetwork) -> dict:
    """Exact layer count, nonzero counts and widths."""
    return {
        "L": phi.depth,
        "M": phi.nonzeros,
        "per_layer": [phi.layer_nonzeros(i) for i in range(phi.depth)],
        "widths": list(phi.widths),
    }

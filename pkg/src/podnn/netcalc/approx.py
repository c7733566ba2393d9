"""Constructive approximation networks: products, powers, Neumann inverses.

Scalar multiplication is realized by polarization of two squaring networks,
xy = ((x+y)^2 - (x-y)^2)/4, with each square approximated on [0, 1] by the
iterated-sawtooth construction: S refinement stages give the piecewise-linear
interpolant of t^2 on a 2^-S grid, with error at most 4^-(S+1).  Matrix
products stack one scalar-product block per (i, j, q) triple; matrix powers
chain squaring stages with a geometric error budget; the Neumann inverse
realizes the partial sum of (I - A)^-1 in the product form
prod_i (A^{2^i} + I).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .network import ReluNetwork, affine_network, concat, parallelize, sparse_concat

__all__ = [
    "mult_net",
    "power_net",
    "InverseNetConfig",
    "inverse_net",
    "neumann_product_check",
]


def _square_stage_count(z: float, tol: float) -> int:
    """Stages so the polarized scalar product is accurate to ``tol``.

    Each square on [-2Z, 2Z] contributes (2Z)^2 * 4^-(S+1); the polarization
    halves the sum, so the product error is 2 Z^2 4^-(S+1).
    """
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    need = 2.0 * z * z / tol
    return max(1, math.ceil(math.log(need, 4.0)) - 1)


def mult_net(z: float, m: int, n: int, k: int, eps: float) -> ReluNetwork:
    """Network mapping (vec A, vec B) to approximately vec(AB).

    For ||A||_2, ||B||_2 <= Z the spectral error is at most ``eps``.  The
    per-scalar-product budget is eps / (n sqrt(mk)), since each of the mk
    output entries sums n products and the spectral norm is bounded by the
    Frobenius norm.  Plus- and minus-polarization units are interleaved, so
    a zero factor cancels the two squares exactly and the output is 0.
    """
    if z <= 0.0:
        raise ValueError("Z must be positive")
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")
    stages = _square_stage_count(z, eps / (n * math.sqrt(m * k)))
    n_in = n * (m + k)
    n_tr = m * n * k
    scale = 1.0 / (2.0 * z)

    # triple t = j + n*(i + m*q): index of A_ij, B_jq and the output entry
    t_idx = np.arange(n_tr, dtype=np.int64)
    j_of = t_idx % n
    out_of = t_idx // n                      # i + m*q
    i_of = out_of % m
    q_of = out_of // m
    a_col = i_of + m * j_of                  # vec(A) position
    b_col = m * n + j_of + n * q_of          # vec(B) position

    # Layer 1: per triple the four half-sums sigma(+-(a+b)), sigma(+-(a-b)).
    rows, cols, data = [], [], []
    for slot, (sa, sb) in enumerate([(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)]):
        r = 4 * t_idx + slot
        rows.extend([r, r])
        cols.extend([a_col, b_col])
        data.extend([np.full(n_tr, sa), np.full(n_tr, sb)])
    w1 = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(4 * n_tr, n_in),
    )
    layers = [(w1, np.zeros(4 * n_tr))]

    # Sawtooth stages.  Units per triple: [a+, a-, b+, b-, c+, c-, d+, d-],
    # where g = 2a - 4b + 2c is the next sawtooth and d carries the partial
    # sum f (always nonnegative, so it passes through the ReLU unchanged).
    def stage_layer(s: int):
        rows, cols, data = [], [], []
        bias = np.zeros(8 * n_tr)
        if s == 1:
            # read the half-sum pairs: g0 = f0 = (u1 + u2) / (2Z)
            for sign in (0, 1):              # 0: plus channel, 1: minus channel
                src = 4 * t_idx + 2 * sign
                for unit in range(4):        # a, b, c, d all read g0
                    r = 8 * t_idx + 2 * unit + sign
                    rows.extend([r, r])
                    cols.extend([src, src + 1])
                    data.extend([np.full(n_tr, scale), np.full(n_tr, scale)])
                    if unit == 1:
                        bias[r] = -0.5
                    elif unit == 2:
                        bias[r] = -1.0
            width_in = 4 * n_tr
        else:
            shrink = 4.0 ** -(s - 1)
            for sign in (0, 1):
                a_prev = 8 * t_idx + 0 + sign
                b_prev = 8 * t_idx + 2 + sign
                c_prev = 8 * t_idx + 4 + sign
                d_prev = 8 * t_idx + 6 + sign
                for unit, coeffs in enumerate(
                    [
                        ((a_prev, 2.0), (b_prev, -4.0), (c_prev, 2.0)),
                        ((a_prev, 2.0), (b_prev, -4.0), (c_prev, 2.0)),
                        ((a_prev, 2.0), (b_prev, -4.0), (c_prev, 2.0)),
                        (
                            (a_prev, -2.0 * shrink),
                            (b_prev, 4.0 * shrink),
                            (c_prev, -2.0 * shrink),
                            (d_prev, 1.0),
                        ),
                    ]
                ):
                    r = 8 * t_idx + 2 * unit + sign
                    for col, val in coeffs:
                        rows.append(r)
                        cols.append(col)
                        data.append(np.full(n_tr, val))
                    if unit == 1:
                        bias[r] = -0.5
                    elif unit == 2:
                        bias[r] = -1.0
            width_in = 8 * n_tr
        w = sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(8 * n_tr, width_in),
        )
        return w, bias

    for s in range(1, stages + 1):
        layers.append(stage_layer(s))

    # Output layer: (2Z)^2/4 * (f_S+ - f_S-) summed over j for each entry,
    # with f_S = d_S - (2 a_S - 4 b_S + 2 c_S) / 4^S.
    cf = z * z
    shrink = 4.0 ** -stages
    rows, cols, data = [], [], []
    for sign, sgn in ((0, 1.0), (1, -1.0)):
        for unit, val in enumerate([-2.0 * shrink, 4.0 * shrink, -2.0 * shrink, 1.0]):
            rows.append(out_of)
            cols.append(8 * t_idx + 2 * unit + sign)
            data.append(np.full(n_tr, sgn * cf * val))
    w_out = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m * k, 8 * n_tr),
    )
    layers.append((w_out, np.zeros(m * k)))
    return ReluNetwork(layers)


def _duplicate_input(width: int) -> ReluNetwork:
    eye = sp.eye(width, format="csr")
    return affine_network(sp.vstack([eye, eye]).tocsr(), np.zeros(2 * width))


def power_net(i: int, eps: float, delta: float, n: int) -> ReluNetwork:
    """Network mapping vec(A) to approximately vec(A^(2^i)).

    Valid for ||A||_2 <= 1 - delta with spectral error at most ``eps``.
    Built as i squaring stages (a product network fed two copies of its
    input); stage j gets the error budget eps * 3^(j-i) adjusted for the
    Lipschitz growth 2 ||A^(2^(j-1))|| of the squaring map, and the budget
    positivity is checked at build time.
    """
    if i < 1:
        raise ValueError("exponent stage count must be at least 1")
    if not 0.0 < eps < 0.25:
        raise ValueError("eps must be in (0, 1/4)")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    net = None
    err = 0.0
    for j in range(1, i + 1):
        rho = (1.0 - delta) ** (2 ** (j - 1))
        target = eps * 3.0 ** (j - i)
        tol = target - 2.0 * rho * err - err * err
        if tol <= 0.0:
            raise ArithmeticError("per-stage error budget is not positive")
        z = rho + err
        stage = concat(mult_net(z, n, n, n, tol), _duplicate_input(n * n))
        net = stage if net is None else sparse_concat(stage, net)
        err = target
    return net


@dataclass(frozen=True)
class InverseNetConfig:
    """Accuracy/contraction parameters of the Neumann-series inverse network."""

    eps: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.eps < 0.25:
            raise ValueError("eps must be in (0, 1/4)")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")

    @property
    def stage_count(self) -> int:
        """l = ceil(log2(log_{1-delta}(delta*eps/2) + 1)), always >= 1."""
        inner = math.log(0.5 * self.delta * self.eps, 1.0 - self.delta)
        return max(1, math.ceil(math.log2(inner + 1.0)))

    @property
    def z1(self) -> float:
        return 1.0 - self.delta

    @property
    def z2(self) -> float:
        return 3.0 + self.eps + 1.0 / self.delta

    def mult_tolerance(self, i: int) -> float:
        return 5.0 ** (i - self.stage_count - 1) * self.eps / 2.0

    def power_tolerance(self, i: int) -> float:
        return self.delta * self.mult_tolerance(i)


def inverse_net(cfg: InverseNetConfig, n: int) -> ReluNetwork:
    """Network mapping vec(A) to approximately vec((I - A)^-1).

    Valid for ||A||_2 <= 1 - delta with spectral error at most eps.  Realizes
    the truncated Neumann series through the recursion
    Pi^i = mult (.) P(Pi^{i-1}, shift-by-identity o power), closed by an
    input-duplication layer feeding every branch its own copy of vec(A).
    """
    l = cfg.stage_count
    nn = n * n
    shift = affine_network(sp.eye(nn, format="csr"),
                           np.eye(n).reshape(-1, order="F"))
    pi = shift  # Pi^1 realizes A + I
    for i in range(2, l + 1):
        power = power_net(i - 1, cfg.power_tolerance(i), cfg.delta, n)
        branch = concat(shift, power)
        stacked = parallelize(pi, branch)
        pi = sparse_concat(mult_net(cfg.z2, n, n, n, cfg.mult_tolerance(i)), stacked)
    if l == 1:
        return pi
    eye = sp.eye(nn, format="csr")
    dup = affine_network(sp.vstack([eye] * l).tocsr(), np.zeros(l * nn))
    return concat(pi, dup)


def neumann_product_check(a, l: int):
    """Both sides of sum_{i<2^l} A^i = prod_{i<l} (A^{2^i} + I), numerically.

    A test oracle: the two sides are computed by plain linear algebra and
    should agree to rounding for any square A.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if l < 1:
        raise ValueError("l must be at least 1")
    eye = np.eye(a.shape[0])
    total = eye.copy()
    term = eye.copy()
    for _ in range(2**l - 1):
        term = term @ a
        total = total + term
    prod = a + eye
    sq = a.copy()
    for _ in range(l - 1):
        sq = sq @ sq
        prod = prod @ (sq + eye)
    return total, prod

"""Networks realizing the parametric map mu -> least-squares coefficients.

Assembles mu -> (B_mu^T B_mu)^{-1} B_mu^T (f, g) from the building blocks:
approximate matrix products, a Neumann-series inverse applied to
I - lambda B^T B (with lambda chosen from the spectrum bounds so the argument
is a contraction), and caller-supplied networks for mu -> B_mu and
mu -> (f, g).  For operators with affine parameter dependence the B-networks
are exact single affine layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .approx import InverseNetConfig, inverse_net, mult_net
from .network import ReluNetwork, affine_network, concat, parallelize, sparse_concat, vec

__all__ = [
    "ParametricNetConfig",
    "btb_inverse_net",
    "parametric_map_net",
    "affine_b_network",
    "constant_network",
    "measure_parametric_bounds",
]


@dataclass(frozen=True)
class ParametricNetConfig:
    """Uniform bounds over the parameter domain.

    ``alpha``/``beta`` bound the spectrum of B^T B within [beta^2, alpha^2]
    and ``gamma`` bounds the right-hand-side norm.  ``lam = 1/(alpha^2+beta^2)``
    scales B^T B so that ||I - lam B^T B|| <= 1 - delta with
    ``delta = lam beta^2``.
    """

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not 0.0 < self.beta < self.alpha:
            raise ValueError("need 0 < beta < alpha")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")

    @property
    def lam(self) -> float:
        return 1.0 / (self.alpha**2 + self.beta**2)

    @property
    def delta(self) -> float:
        return self.lam * self.beta**2

    def btb_schedule(self, eps: float) -> dict:
        a, b = self.alpha, self.beta
        return {
            "eps1": min(eps * b**4 / (24 * a), b**2 * np.sqrt(eps) / 4,
                        b**2 / (12 * a), b / 3),
            "eps2": min(b**4 * eps / 12, b**2 / 6),
            # the Neumann inverse is only defined for tolerances below 1/4;
            # clamping can only tighten the resulting lam * eps3 <= eps/2 bound
            "eps3": min(eps / (2 * self.lam), 0.2),
        }

    def map_schedule(self, eps: float) -> dict:
        a, b, g = self.alpha, self.beta, self.gamma
        eps1 = min(eps * b**2 / (12 * g), b * np.sqrt(eps) / 4, a / 4, np.sqrt(a * g) / 2)
        eps2 = min(eps * b**2 / (12 * a), b * np.sqrt(eps) / 4, g / 4, np.sqrt(a * g) / 2)
        eps3 = min(eps * b**2 / 12, a * g / 4)
        eps4 = eps / (6 * a * g)
        eps5 = eps / 3
        z1 = a + g + eps1 + eps2
        z2 = eps4 + b**-2 + a * eps2 + (g + eps2) * eps1 + eps3 + a * g
        return {"eps1": eps1, "eps2": eps2, "eps3": eps3, "eps4": eps4,
                "eps5": eps5, "z1": z1, "z2": z2}


def _input_duplicator(p: int) -> ReluNetwork:
    eye = sp.eye(p, format="csr")
    return affine_network(sp.vstack([eye, eye]).tocsr(), np.zeros(2 * p))


def btb_inverse_net(phi_b: ReluNetwork, phi_bt: ReluNetwork,
                    cfg: ParametricNetConfig, eps: float,
                    n_rows: int, n_pod: int) -> ReluNetwork:
    """Network mapping mu to approximately vec((B_mu^T B_mu)^{-1}).

    Requires the input networks to track B_mu within the eps1 budget of
    ``cfg.btb_schedule(eps)`` (affine-exact networks satisfy any budget).
    Chain: multiply the two B-networks, map affinely to I - lam B^T B, apply
    the Neumann-series inverse at contraction margin delta/2, scale by lam.
    """
    if phi_b.output_dim != n_rows * n_pod or phi_bt.output_dim != n_rows * n_pod:
        raise ValueError("B-network output does not match n_rows * n_pod")
    sched = cfg.btb_schedule(eps)
    p = phi_b.input_dim

    pair = concat(parallelize(phi_bt, phi_b), _input_duplicator(p))
    prod = sparse_concat(
        mult_net(cfg.alpha + sched["eps1"], n_pod, n_rows, n_pod, sched["eps2"]), pair
    )

    # last-layer rewrite: vec(B^T B) -> vec(I - lam B^T B)
    w_last, b_last = prod.layers[-1]
    shifted = ReluNetwork(
        prod.layers[:-1]
        + [((-cfg.lam) * w_last, -cfg.lam * b_last + vec(np.eye(n_pod)))]
    )

    inv = inverse_net(InverseNetConfig(sched["eps3"], cfg.delta / 2), n_pod)
    scale = affine_network(cfg.lam * sp.eye(n_pod * n_pod, format="csr"),
                           np.zeros(n_pod * n_pod))
    return concat(scale, sparse_concat(inv, shifted))


def parametric_map_net(phi_b: ReluNetwork, phi_bt: ReluNetwork, phi_fg: ReluNetwork,
                       cfg: ParametricNetConfig, eps: float,
                       n_rows: int, n_pod: int) -> ReluNetwork:
    """Network mapping mu to the reduced least-squares coefficients.

    Multiplies the (B^T B)-inverse branch against the B^T (f, g) branch; the
    tolerance split eps4 = eps/(6 alpha gamma) and eps5 = eps/3 gives a total
    sup error of at most eps over the parameter domain when the inputs
    satisfy the eps1/eps2 budgets (exact for affine dependence).
    """
    if phi_fg.output_dim != n_rows:
        raise ValueError("fg-network output does not match n_rows")
    sched = cfg.map_schedule(eps)
    p = phi_b.input_dim

    pair = concat(parallelize(phi_bt, phi_fg), _input_duplicator(p))
    btfg = sparse_concat(mult_net(sched["z1"], n_pod, n_rows, 1, sched["eps3"]), pair)

    binv = btb_inverse_net(phi_b, phi_bt, cfg, sched["eps4"], n_rows, n_pod)

    outer = concat(parallelize(binv, btfg), _input_duplicator(p))
    return sparse_concat(mult_net(sched["z2"], n_pod, n_pod, 1, sched["eps5"]), outer)


def affine_b_network(c0, c1, c2, basis) -> tuple[ReluNetwork, ReluNetwork]:
    """Exact one-layer networks mu -> vec(B_mu) and mu -> vec(B_mu^T).

    Valid when the compact operator is affine in mu:
    B_mu = (C0 + mu1 C1 + mu2 C2) V.
    """
    v = np.asarray(basis, dtype=float)
    b0 = np.asarray(c0 @ v)
    b1 = np.asarray(c1 @ v)
    b2 = np.asarray(c2 @ v)
    w = np.column_stack([vec(b1), vec(b2)])
    wt = np.column_stack([vec(b1.T), vec(b2.T)])
    phi_b = affine_network(sp.csr_matrix(w), vec(b0))
    phi_bt = affine_network(sp.csr_matrix(wt), vec(b0.T))
    return phi_b, phi_bt


def constant_network(values, input_dim: int) -> ReluNetwork:
    """Single affine layer realizing a constant vector (zero weight block)."""
    values = np.asarray(values, dtype=float).ravel()
    w = sp.csr_matrix((values.shape[0], input_dim))
    return affine_network(w, values)


def measure_parametric_bounds(b_of_mu, rhs_of_mu, mu_grid, margin: float = 0.05
                              ) -> ParametricNetConfig:
    """Empirical (alpha, beta, gamma) over a parameter grid, with safety margin.

    Scans the Gram spectrum of B_mu and the right-hand-side norm; callers
    should pass a grid at least as fine as the one they verify on.
    """
    smin, smax, gmax = np.inf, 0.0, 0.0
    for mu in mu_grid:
        b = np.asarray(b_of_mu(mu), dtype=float)
        eigs = np.linalg.eigvalsh(b.T @ b)
        smin = min(smin, float(eigs[0]))
        smax = max(smax, float(eigs[-1]))
        gmax = max(gmax, float(np.linalg.norm(rhs_of_mu(mu))))
    if smin <= 0.0:
        raise ValueError("B is rank deficient somewhere on the grid")
    return ParametricNetConfig(
        alpha=float(np.sqrt(smax) * (1.0 + margin)),
        beta=float(np.sqrt(smin) * (1.0 - margin)),
        gamma=float(gmax * (1.0 + margin)),
    )

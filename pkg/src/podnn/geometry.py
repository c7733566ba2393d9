"""Star-shaped domains, scattered collocation nodes and nearest-neighbor stencils.

Domains are described by a polar boundary curve r(theta).  Node sets combine
equispaced-in-angle boundary nodes with interior nodes picked from a Halton
candidate pool by greedy farthest-point selection, which keeps the fill
distance small without a mesh.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

__all__ = [
    "PolarDomain",
    "NodeSet",
    "StencilSet",
    "flower_domain",
    "circle_domain",
    "boundary_curve",
    "halton_points",
    "generate_nodes",
    "build_stencils",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PolarDomain:
    """Star-shaped domain whose boundary is r(theta) in polar coordinates.

    ``radius_fn`` must be 2*pi-periodic and strictly positive.
    """

    radius_fn: Callable[[np.ndarray], np.ndarray]
    description: str = ""

    def __post_init__(self):
        probe = np.linspace(0.0, TWO_PI, 721)
        r = np.asarray(self.radius_fn(probe), dtype=float)
        if not np.all(np.isfinite(r)) or np.any(r <= 0.0):
            raise ValueError("radius_fn must be positive and finite on [0, 2*pi]")
        if abs(float(self.radius_fn(0.0)) - float(self.radius_fn(TWO_PI))) > 1e-12:
            raise ValueError("radius_fn must be 2*pi-periodic")

    def radius(self, theta):
        return np.asarray(self.radius_fn(np.mod(theta, TWO_PI)), dtype=float)

    def max_radius(self, resolution: int = 4096) -> float:
        theta = np.linspace(0.0, TWO_PI, resolution, endpoint=False)
        return float(np.max(self.radius(theta)))

    def contains(self, p, margin: float = 0.0):
        """True where the point lies strictly inside the boundary curve."""
        p = np.asarray(p, dtype=float)
        single = p.ndim == 1
        pts = np.atleast_2d(p)
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        rho = np.hypot(pts[:, 0], pts[:, 1])
        inside = rho < self.radius(theta) - margin
        return bool(inside[0]) if single else inside


def boundary_curve(domain: PolarDomain, theta):
    """Map angles to boundary points (r(theta)*cos, r(theta)*sin)."""
    theta = np.asarray(theta, dtype=float)
    r = domain.radius(theta)
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)


def flower_domain() -> PolarDomain:
    """Flower-shaped benchmark domain r = 0.8 + 0.1*(sin(6t) + sin(3t))."""
    return PolarDomain(
        radius_fn=lambda t: 0.8 + 0.1 * (np.sin(6.0 * t) + np.sin(3.0 * t)),
        description="flower r=0.8+0.1(sin6t+sin3t)",
    )


def circle_domain(radius: float = 1.0) -> PolarDomain:
    return PolarDomain(
        radius_fn=lambda t: np.full_like(np.asarray(t, dtype=float), radius),
        description=f"circle r={radius}",
    )


@dataclass(frozen=True)
class NodeSet:
    """Scattered collocation nodes: interior first, then boundary.

    Global node indices follow the concatenation order, so indices
    ``0..n_interior-1`` are interior and the rest lie on the curve.
    """

    interior: np.ndarray
    boundary: np.ndarray
    seed: int = 0
    domain_description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "interior", np.ascontiguousarray(self.interior, dtype=float).reshape(-1, 2))
        object.__setattr__(self, "boundary", np.ascontiguousarray(self.boundary, dtype=float).reshape(-1, 2))

    @property
    def n_interior(self) -> int:
        return self.interior.shape[0]

    @property
    def n_boundary(self) -> int:
        return self.boundary.shape[0]

    @property
    def n(self) -> int:
        return self.n_interior + self.n_boundary

    @property
    def points(self) -> np.ndarray:
        return np.ascontiguousarray(np.vstack([self.interior, self.boundary]))

    def validate(self, domain: PolarDomain | None = None, boundary_tol: float = 1e-10):
        pts = self.points
        if pts.shape[0] >= 2:
            tree = cKDTree(pts)
            d, _ = tree.query(pts, k=2)
            nearest = float(np.min(d[:, 1]))
            if nearest <= 1e-12:
                raise ValueError(f"duplicate nodes (closest pair at distance {nearest:g})")
        if domain is not None:
            if self.n_interior and not np.all(domain.contains(self.interior)):
                raise ValueError("interior node outside the domain")
            if self.n_boundary:
                theta = np.arctan2(self.boundary[:, 1], self.boundary[:, 0])
                gap = np.abs(np.hypot(self.boundary[:, 0], self.boundary[:, 1]) - domain.radius(theta))
                if float(np.max(gap)) > boundary_tol:
                    raise ValueError("boundary node off the curve")
        return self


@dataclass(frozen=True)
class StencilSet:
    """Per-interior-node index lists; row i starts with node i itself."""

    indices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", np.ascontiguousarray(self.indices, dtype=np.int64))

    @property
    def n_loc(self) -> int:
        return self.indices.shape[1]


def halton_points(count: int, lo, hi, seed: int = 0) -> np.ndarray:
    """Scrambled Halton points (bases 2, 3) scaled to the box [lo, hi]^2."""
    sampler = qmc.Halton(d=2, scramble=True, seed=seed)
    u = sampler.random(count)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return lo + u * (hi - lo)


def generate_nodes(
    domain: PolarDomain,
    n_boundary: int,
    candidate_count: int,
    target_interior: int,
    seed: int = 0,
) -> NodeSet:
    """Boundary nodes equispaced in angle plus greedily spread interior nodes.

    Interior nodes are selected from a Halton candidate pool by farthest-point
    selection: at every step the candidate with the largest distance to all
    nodes selected so far (boundary included) is taken.  Ties break toward the
    lower candidate index, so the output is fully determined by the seed.
    """
    if n_boundary < 3:
        raise ValueError("need at least 3 boundary nodes")
    if candidate_count < target_interior:
        raise ValueError("candidate_count must be at least target_interior")

    theta = TWO_PI * np.arange(n_boundary) / n_boundary
    bnd = boundary_curve(domain, theta)

    if target_interior == 0:
        return NodeSet(np.empty((0, 2)), bnd, seed=seed,
                       domain_description=domain.description).validate(domain)

    rmax = domain.max_radius()
    pool = halton_points(candidate_count, (-rmax, -rmax), (rmax, rmax), seed=seed)
    pool = pool[domain.contains(pool)]
    if pool.shape[0] < target_interior:
        raise ValueError(
            f"only {pool.shape[0]} of {candidate_count} candidates fall inside "
            f"the domain; need {target_interior}"
        )

    # Greedy farthest-point selection, seeded with the boundary nodes.
    dist = cKDTree(bnd).query(pool)[0]
    chosen = np.empty(target_interior, dtype=np.int64)
    for t in range(target_interior):
        best = int(np.argmax(dist))
        chosen[t] = best
        step = np.hypot(pool[:, 0] - pool[best, 0], pool[:, 1] - pool[best, 1])
        np.minimum(dist, step, out=dist)
        dist[best] = -np.inf
    return NodeSet(pool[chosen], bnd, seed=seed,
                   domain_description=domain.description).validate(domain)


def build_stencils(nodes: NodeSet, n_loc: int) -> StencilSet:
    """For each interior node, the n_loc nearest nodes (self first).

    Distance ties break toward the lower global node index.
    """
    pts = nodes.points
    n = pts.shape[0]
    if not 1 <= n_loc <= n:
        raise ValueError(f"n_loc must be in [1, {n}]")
    tree = cKDTree(pts)
    out = np.empty((nodes.n_interior, n_loc), dtype=np.int64)
    for i in range(nodes.n_interior):
        k = min(n, n_loc + 8)
        while True:
            _, idx = tree.query(pts[i], k=k)
            idx = np.atleast_1d(idx)
            d2 = np.sum((pts[idx] - pts[i]) ** 2, axis=1)
            order = np.lexsort((idx, d2))
            idx, d2 = idx[order], d2[order]
            # grow k if a tie straddles the cut, so the lexsort sees all peers
            if k >= n or d2[n_loc - 1] < d2[n_loc]:
                break
            k = min(n, 2 * k)
        out[i] = idx[:n_loc]
        if out[i, 0] != i:
            raise ValueError(f"stencil for node {i} does not start with itself")
    return StencilSet(out)

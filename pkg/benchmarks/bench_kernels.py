"""Compiled stencil kernels vs the pure-numpy fallback.

Times the hot path of the offline phase (per-parameter stencil-weight
assembly) and the one-off affine component build, at desk scale and at the
full benchmark scale.  Run with ``python benchmarks/bench_kernels.py``.
"""

import time

import numpy as np

import podnn
from podnn import _kernels_np
from podnn.geometry import build_stencils, flower_domain, generate_nodes

try:
    from podnn import _kernels as compiled
except ImportError:
    compiled = None


def timeit(fn, repeats=5):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_scale(label, n_boundary, n_interior, repeats):
    nodes = generate_nodes(flower_domain(), n_boundary, candidate_count=6 * n_interior,
                           target_interior=n_interior, seed=42)
    stencils = build_stencils(nodes, 13)
    pts = nodes.points
    idx = stencils.indices
    print(f"\n== {label}: N = {nodes.n}, n_loc = 13 ==")
    rows = []
    for name, fn in [
        ("weights(mu)", lambda mod: mod.helmholtz_weights(pts, idx, 3.0, 1.0, 1.0)),
        ("components", lambda mod: mod.helmholtz_weight_components(pts, idx, 3.0)),
    ]:
        t_np = timeit(lambda: fn(_kernels_np), repeats)
        if compiled is not None:
            t_cy = timeit(lambda: fn(compiled), repeats)
            rows.append((name, t_np, t_cy, t_np / t_cy))
        else:
            rows.append((name, t_np, None, None))
    print(f"{'kernel':<14}{'numpy':>12}{'compiled':>12}{'speedup':>10}")
    for name, t_np, t_cy, speedup in rows:
        if t_cy is None:
            print(f"{name:<14}{t_np * 1e3:>10.2f}ms{'n/a':>12}{'':>10}")
        else:
            print(f"{name:<14}{t_np * 1e3:>10.2f}ms{t_cy * 1e3:>10.2f}ms{speedup:>9.1f}x")


def main():
    print(f"compiled backend available: {compiled is not None} "
          f"(active in podnn: {podnn.COMPILED})")
    bench_scale("desk scale", 133, 1067, repeats=5)
    bench_scale("full scale", 289, 5442, repeats=3)


if __name__ == "__main__":
    main()

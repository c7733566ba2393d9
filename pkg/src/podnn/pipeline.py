"""Offline/online orchestration: stages, persistence, benchmark and reports.

The offline phase runs nodes -> snapshots -> reduced basis -> labeled data
-> surrogate training, persisting every intermediate to the artifact store.
Stages are idempotent: a stage whose artifacts already exist under the same
configuration hash is skipped, so partial runs resume where they stopped.
"""

from __future__ import annotations

import io
import json
import time
import warnings

import numpy as np

from . import dnn, pod, rom
from .config import RunConfig
from .container import ArtifactStore, load_network, save_network
from .geometry import NodeSet, StencilSet, build_stencils, circle_domain, flower_domain, generate_nodes
from .rbf_fd import (
    NO_AUGMENTATION,
    RbfKernel,
    affine_compact_components,
    assemble_system,
    helmholtz_operator,
    solve_high_fidelity,
)

__all__ = [
    "StageFailure",
    "offline",
    "online",
    "benchmark",
    "hyperparameter_grid",
    "decay_report",
    "netcalc_verify",
    "run_stage",
    "STAGES",
]


class StageFailure(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _domain(cfg: RunConfig):
    return flower_domain() if cfg.domain == "flower" else circle_domain()


def helmholtz_forcing(x, mu):
    """Benchmark forcing -10 sin(8 x (y - 1)); homogeneous Dirichlet data."""
    return -10.0 * np.sin(8.0 * x[0] * (x[1] - 1.0))


def _operator(cfg: RunConfig, validate: bool = False):
    kernel = RbfKernel(shape=cfg.shape)
    return kernel, helmholtz_operator(kernel, forcing=helmholtz_forcing, validate=validate)


def _snapshot_params(cfg: RunConfig, n_s: int | None = None) -> np.ndarray:
    n_s = cfg.n_s if n_s is None else n_s
    (a0, a1), (b0, b1) = cfg.mu_bounds
    if cfg.snapshot_sampling == "tensor":
        side = int(round(np.sqrt(n_s)))
        if side * side != n_s:
            raise ValueError(f"tensor sampling needs a square n_s, got {n_s}")
        g1 = np.linspace(a0, a1, side)
        g2 = np.linspace(b0, b1, side)
        return np.array([(x, y) for x in g1 for y in g2])
    rng = np.random.default_rng(cfg.seed + 101)
    return np.column_stack([rng.uniform(a0, a1, n_s), rng.uniform(b0, b1, n_s)])


def _dataset_params(cfg: RunConfig) -> np.ndarray:
    (a0, a1), (b0, b1) = cfg.mu_bounds
    rng = np.random.default_rng(cfg.seed + 202)
    return np.column_stack([rng.uniform(a0, a1, cfg.n_data), rng.uniform(b0, b1, cfg.n_data)])


def _load_nodes(store: ArtifactStore) -> NodeSet:
    meta = store.load_json("nodes.json")
    return NodeSet(
        store.load_matrix("nodes_interior.pdnn"),
        store.load_matrix("nodes_boundary.pdnn"),
        seed=meta["seed"],
        domain_description=meta["domain"],
    )


def _solver_for(cfg: RunConfig, nodes: NodeSet, stencils: StencilSet):
    kernel, op = _operator(cfg)

    def solve(mu):
        system = assemble_system(nodes, stencils, kernel, NO_AUGMENTATION, op, mu)
        return solve_high_fidelity(system, cond_warn=None)

    return solve


# worker-process state for parallel snapshot generation (closures over the
# operator callbacks are not picklable, so each worker rebuilds them once)
_WORKER = {}


def _snapshot_worker_init(interior, boundary, stencil_indices, shape):
    nodes = NodeSet(interior, boundary)
    kernel = RbfKernel(shape=shape)
    op = helmholtz_operator(kernel, forcing=helmholtz_forcing, validate=False)
    _WORKER["ctx"] = (nodes, StencilSet(stencil_indices), kernel, op)


def _snapshot_worker(mu):
    nodes, stencils, kernel, op = _WORKER["ctx"]
    system = assemble_system(nodes, stencils, kernel, NO_AUGMENTATION, op, mu)
    return solve_high_fidelity(system, cond_warn=None)


def _solve_snapshots(cfg: RunConfig, nodes: NodeSet, stencils: StencilSet,
                     params: np.ndarray) -> pod.SnapshotMatrix:
    """Solve per parameter, fanning out over processes when configured.

    Column order always follows the parameter order, so serial and parallel
    runs produce identical matrices.
    """
    if cfg.n_jobs <= 1:
        return pod.build_snapshot_matrix(params, _solver_for(cfg, nodes, stencils))
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(
        max_workers=cfg.n_jobs,
        initializer=_snapshot_worker_init,
        initargs=(nodes.interior, nodes.boundary, stencils.indices, cfg.shape),
    ) as pool:
        cols = list(pool.map(_snapshot_worker, params, chunksize=8))
    return pod.SnapshotMatrix(np.column_stack(cols), params)


def _stage_done(store: ArtifactStore, cfg: RunConfig, stage: str, names) -> bool:
    """A stage is complete when its artifacts verify under the same config."""
    return store.get_meta(f"stage_{stage}") == cfg.digest() and all(store.has(n) for n in names)


def _mark_stage(store: ArtifactStore, cfg: RunConfig, stage: str) -> None:
    store.set_meta(f"stage_{stage}", cfg.digest())


def stage_nodes(cfg: RunConfig, store: ArtifactStore) -> None:
    names = ("nodes_interior.pdnn", "nodes_boundary.pdnn", "nodes.json")
    if _stage_done(store, cfg, "nodes", names):
        return
    nodes = generate_nodes(
        _domain(cfg), cfg.n_boundary, cfg.candidate_count, cfg.target_interior, seed=cfg.seed
    )
    store.save_matrix("nodes_interior.pdnn", nodes.interior)
    store.save_matrix("nodes_boundary.pdnn", nodes.boundary)
    store.save_json("nodes.json", {
        "N": nodes.n, "N_I": nodes.n_interior, "seed": cfg.seed,
        "domain": nodes.domain_description,
    })
    _mark_stage(store, cfg, "nodes")


def stage_snapshots(cfg: RunConfig, store: ArtifactStore) -> None:
    names = ("snapshots.pdnn", "snapshot_params.pdnn")
    if _stage_done(store, cfg, "snapshots", names):
        return
    nodes = _load_nodes(store)
    stencils = build_stencils(nodes, cfg.n_loc)
    params = _snapshot_params(cfg)
    snaps = _solve_snapshots(cfg, nodes, stencils, params)
    store.save_matrix("snapshots.pdnn", snaps.matrix)
    store.save_matrix("snapshot_params.pdnn", snaps.params)
    _mark_stage(store, cfg, "snapshots")


def stage_pod(cfg: RunConfig, store: ArtifactStore) -> None:
    names = ("pod_basis.pdnn", "pod.json")
    if _stage_done(store, cfg, "pod", names):
        return
    snaps = pod.SnapshotMatrix(store.load_matrix("snapshots.pdnn"),
                               store.load_matrix("snapshot_params.pdnn"))
    basis = pod.compute_pod(snaps, cfg.pod_tol)
    store.save_matrix("pod_basis.pdnn", basis.basis)
    store.save_json("pod.json", {
        "n_pod": basis.n_pod,
        "tolerance": basis.tolerance,
        "singular_values": basis.singular_values.tolist(),
    })
    _mark_stage(store, cfg, "pod")


def stage_dataset(cfg: RunConfig, store: ArtifactStore) -> None:
    names = ("dataset_inputs.pdnn", "dataset_targets.pdnn", "dataset_split.json")
    if _stage_done(store, cfg, "dataset", names):
        return
    nodes = _load_nodes(store)
    stencils = build_stencils(nodes, cfg.n_loc)
    basis = store.load_matrix("pod_basis.pdnn")
    params = _dataset_params(cfg)
    snaps = _solve_snapshots(cfg, nodes, stencils, params)
    targets = (basis.T @ snaps.matrix).T
    ds = dnn.Dataset.split(params, targets, cfg.split, seed=cfg.seed + 303)
    store.save_matrix("dataset_inputs.pdnn", ds.inputs)
    store.save_matrix("dataset_targets.pdnn", ds.targets)
    store.save_json("dataset_split.json", {
        "train": ds.train_idx.tolist(),
        "valid": ds.valid_idx.tolist(),
        "test": ds.test_idx.tolist(),
    })
    _mark_stage(store, cfg, "dataset")


def _load_dataset(store: ArtifactStore) -> dnn.Dataset:
    split = store.load_json("dataset_split.json")
    return dnn.Dataset(
        store.load_matrix("dataset_inputs.pdnn"),
        store.load_matrix("dataset_targets.pdnn"),
        np.asarray(split["train"], dtype=np.int64),
        np.asarray(split["valid"], dtype=np.int64),
        np.asarray(split["test"], dtype=np.int64),
    )


def stage_train(cfg: RunConfig, store: ArtifactStore) -> None:
    names = ("model.json", "loss_history.csv")
    if _stage_done(store, cfg, "train", names):
        return
    ds = _load_dataset(store)
    n_pod = store.load_json("pod.json")["n_pod"]
    shift, scale = dnn.normalization_for_box(*np.asarray(cfg.mu_bounds, dtype=float).T)
    widths = cfg.widths + (n_pod,)
    model, history = dnn.train(ds, widths, cfg.train, input_shift=shift, input_scale=scale)
    save_network(store, "model", list(zip(model.weights, model.biases)), meta={
        "widths": list(widths),
        "input_shift": model.input_shift.tolist(),
        "input_scale": model.input_scale.tolist(),
        "train_config": vars(cfg.train).copy(),
        "best_valid": min(h[2] for h in history),
        "epochs_run": len(history),
    })
    buf = io.StringIO()
    buf.write("epoch,train_loss,valid_loss\n")
    for epoch, tr, va in history:
        buf.write(f"{epoch},{tr!r},{va!r}\n")
    store.save_text("loss_history.csv", buf.getvalue())
    _mark_stage(store, cfg, "train")


def load_model(store: ArtifactStore) -> dnn.MlpModel:
    layers, meta = load_network(store, "model")
    return dnn.MlpModel(
        [w for w, _ in layers],
        [b for _, b in layers],
        np.asarray(meta["input_shift"], dtype=float),
        np.asarray(meta["input_scale"], dtype=float),
    )


STAGES = {
    "nodes": stage_nodes,
    "snapshots": stage_snapshots,
    "pod": stage_pod,
    "dataset": stage_dataset,
    "train": stage_train,
}


def run_stage(name: str, cfg: RunConfig, store: ArtifactStore) -> None:
    try:
        STAGES[name](cfg, store)
    except Exception as exc:
        raise StageFailure(name, exc) from exc


def offline(cfg: RunConfig, store_dir=None) -> ArtifactStore:
    """Run every offline stage; completed stages are skipped by manifest hash."""
    store = ArtifactStore(store_dir or cfg.out_dir)
    store.save_text("config.json", cfg.to_json())
    for name in STAGES:
        run_stage(name, cfg, store)
    return store


def online(store: ArtifactStore, mus, out_of_domain: str = "error"):
    """Batched surrogate evaluation: one forward pass, then the basis multiply.

    Returns (solutions, seconds) where row i of ``solutions`` is the predicted
    field for ``mus[i]``.  Parameters outside the configured domain raise, or
    warn with ``out_of_domain='warn'``.
    """
    mus = np.atleast_2d(np.asarray(mus, dtype=float))
    basis = store.load_matrix("pod_basis.pdnn")
    model = load_model(store)
    cfg = RunConfig.from_dict(json.loads(store.path("config.json").read_text()))
    if mus.shape[0] == 0:
        return np.empty((0, basis.shape[0])), 0.0
    (a0, a1), (b0, b1) = cfg.mu_bounds
    bad = (mus[:, 0] < a0) | (mus[:, 0] > a1) | (mus[:, 1] < b0) | (mus[:, 1] > b1)
    if np.any(bad):
        msg = f"{int(bad.sum())} parameter(s) outside the domain"
        if out_of_domain == "warn":
            warnings.warn(msg)
        else:
            raise ValueError(msg)
    t0 = time.perf_counter()
    coeffs = model.forward(mus)
    fields = coeffs @ basis.T
    elapsed = time.perf_counter() - t0
    return fields, elapsed


def benchmark(store: ArtifactStore, mus, cfg: RunConfig | None = None) -> dict:
    """Three-way comparison on a parameter batch: full solve, reduced LS, surrogate.

    The full RBF-FD solve is the timed ground truth; errors are mean relative
    l2 distances to it.  Timing covers assembly+solve per parameter for the
    two solvers and a single batched forward+multiply for the surrogate;
    artifact I/O and affine precomputation are excluded.
    """
    if cfg is None:
        cfg = RunConfig.from_dict(json.loads(store.path("config.json").read_text()))
    mus = np.atleast_2d(np.asarray(mus, dtype=float))
    nodes = _load_nodes(store)
    stencils = build_stencils(nodes, cfg.n_loc)
    basis = store.load_matrix("pod_basis.pdnn")
    model = load_model(store)
    kernel, op = _operator(cfg)

    t0 = time.perf_counter()
    truth = np.empty((mus.shape[0], nodes.n))
    for i, mu in enumerate(mus):
        system = assemble_system(nodes, stencils, kernel, NO_AUGMENTATION, op, mu)
        truth[i] = solve_high_fidelity(system, cond_warn=None)
    t_rbf = time.perf_counter() - t0

    # affine precomputation is offline work, excluded from the online timing
    c0, c1, c2 = affine_compact_components(nodes, stencils, kernel)
    rhs = assemble_system(nodes, stencils, kernel, NO_AUGMENTATION, op, mus[0]).rhs
    reduced = rom.AffineReducedModel.from_components(c0, c1, c2, rhs, basis)
    rom.solve_reduced_ls(reduced.system_for(mus[0]))  # untimed warmup
    t0 = time.perf_counter()
    ls_fields = np.empty_like(truth)
    for i, mu in enumerate(mus):
        ls_fields[i] = basis @ rom.solve_reduced_ls(reduced.system_for(mu))
    t_ls = time.perf_counter() - t0

    model.forward(mus) @ basis.T  # untimed warmup (BLAS thread spin-up)
    t0 = time.perf_counter()
    nn_fields = model.forward(mus) @ basis.T
    t_nn = time.perf_counter() - t0

    result = {
        "n_parameters": int(mus.shape[0]),
        "rbf_fd": {"error": None, "time_s": t_rbf},
        "reduced_ls": {"error": mean_relative_error(ls_fields, truth), "time_s": t_ls},
        "pod_dnn": {"error": mean_relative_error(nn_fields, truth), "time_s": t_nn},
        "ordering_ok": bool(t_nn < t_ls < t_rbf),
    }
    return result


def mean_relative_error(fields, truth) -> float:
    """Mean over rows of ||field - truth|| / ||truth||; 0 iff rows coincide."""
    num = np.linalg.norm(np.asarray(fields) - np.asarray(truth), axis=1)
    den = np.linalg.norm(np.asarray(truth), axis=1)
    return float(np.mean(num / den))


def benchmark_csv(result: dict) -> str:
    buf = io.StringIO()
    buf.write("method,mean_rel_l2_error,total_time_s,n_parameters,ordering_ok\n")
    for key, label in (("rbf_fd", "rbf-fd"), ("reduced_ls", "reduced-ls"), ("pod_dnn", "pod-dnn")):
        entry = result[key]
        err = "" if entry["error"] is None else repr(entry["error"])
        buf.write(f"{label},{err},{entry['time_s']!r},{result['n_parameters']},"
                  f"{result['ordering_ok']}\n")
    return buf.getvalue()


def decay_report(cfg: RunConfig, store: ArtifactStore, ns_values=(25, 100)) -> str:
    """Singular decay and discarded-energy CSV for several snapshot counts."""
    nodes = _load_nodes(store)
    stencils = build_stencils(nodes, cfg.n_loc)
    buf = io.StringIO()
    buf.write("n_s,index,sigma_ratio,tail_energy\n")
    for n_s in ns_values:
        params = _snapshot_params(cfg, n_s)
        snaps = _solve_snapshots(cfg, nodes, stencils, params)
        ratios, tails = pod.singular_decay(snaps.matrix)
        for i, (r, t) in enumerate(zip(ratios, tails), start=1):
            buf.write(f"{n_s},{i},{float(r)!r},{float(t)!r}\n")
    text = buf.getvalue()
    store.save_text("decay.csv", text)
    return text


def hyperparameter_grid(cfg: RunConfig, store: ArtifactStore, grid: dict) -> str:
    """Train one model per grid cell on the stored dataset; emit a CSV table.

    ``grid`` maps any of hidden_layers/width/n_epochs/batch_size/
    learning_rate to lists of values.  Failed cells are recorded and skipped.
    """
    ds = _load_dataset(store)
    n_pod = store.load_json("pod.json")["n_pod"]
    shift, scale = dnn.normalization_for_box(*np.asarray(cfg.mu_bounds, dtype=float).T)
    axes = {
        "hidden_layers": grid.get("hidden_layers", [cfg.hidden_layers]),
        "width": grid.get("width", [cfg.width]),
        "n_epochs": grid.get("n_epochs", [cfg.train.n_epochs]),
        "batch_size": grid.get("batch_size", [cfg.train.batch_size]),
        "learning_rate": grid.get("learning_rate", [cfg.train.learning_rate]),
    }
    buf = io.StringIO()
    buf.write("hidden_layers,width,n_epochs,batch_size,learning_rate,test_error,train_time_s,status\n")
    for L in axes["hidden_layers"]:
        for width in axes["width"]:
            for n_epochs in axes["n_epochs"]:
                for batch in axes["batch_size"]:
                    for lr in axes["learning_rate"]:
                        tc = dnn.TrainConfig(
                            learning_rate=lr, beta1=cfg.train.beta1, beta2=cfg.train.beta2,
                            eps_adam=cfg.train.eps_adam, batch_size=batch,
                            n_epochs=n_epochs, patience=cfg.train.patience, seed=cfg.train.seed,
                        )
                        widths = (2,) + (width,) * L + (n_pod,)
                        t0 = time.perf_counter()
                        try:
                            model, _ = dnn.train(ds, widths, tc, input_shift=shift, input_scale=scale)
                            err = dnn.evaluate(model, *ds.subset("test"))
                            status = "ok"
                        except Exception as exc:  # keep scanning the grid
                            err, status = float("nan"), f"failed: {exc}"
                        dt = time.perf_counter() - t0
                        buf.write(f"{L},{width},{n_epochs},{batch},{lr!r},{err!r},{dt!r},{status}\n")
    text = buf.getvalue()
    store.save_text("grid.csv", text)
    return text


def netcalc_verify(mc_draws: int = 500, seed: int = 0) -> str:
    """Monte-Carlo error contracts and size accounting of the constructions.

    Emits one CSV row per verified construct: measured sup error against the
    requested bound, plus exact depth and nonzero counts.
    """
    from . import netcalc as nc

    rng = np.random.default_rng(seed)
    rows = ["construct,eps,delta,n,stages,measured_error,bound,satisfied,L,M"]

    def spectral_sample(n, bound):
        a = rng.standard_normal((n, n))
        return a * (bound * rng.uniform(0.0, 1.0) / np.linalg.norm(a, 2))

    for n in (1, 2):
        net = nc.identity_net(n, 3)
        err = max(
            float(np.max(np.abs(nc.realize(net, x) - x)))
            for x in rng.standard_normal((100, n))
        )
        rows.append(f"identity,0,,{n},,{err!r},0.0,{err == 0.0},{net.depth},{net.nonzeros}")

    for eps in (1e-1, 1e-2):
        for n in (1, 2, 3):
            z = 2.0
            net = nc.mult_net(z, n, n, n, eps)
            worst = 0.0
            for _ in range(mc_draws):
                a = spectral_sample(n, z)
                b = spectral_sample(n, z)
                got = nc.matr(nc.realize(net, np.concatenate([nc.vec(a), nc.vec(b)])), n, n)
                worst = max(worst, float(np.linalg.norm(a @ b - got, 2)))
            rows.append(
                f"mult,{eps},,{n},,{worst!r},{eps},{worst <= eps},{net.depth},{net.nonzeros}"
            )

    for i in (1, 2, 3):
        eps, delta, n = 0.05, 0.3, 2
        net = nc.power_net(i, eps, delta, n)
        worst = 0.0
        for _ in range(mc_draws):
            a = spectral_sample(n, 1.0 - delta)
            got = nc.matr(nc.realize(net, nc.vec(a)), n, n)
            worst = max(worst, float(np.linalg.norm(np.linalg.matrix_power(a, 2**i) - got, 2)))
        rows.append(
            f"power_2^{i},{eps},{delta},{n},{i},{worst!r},{eps},{worst <= eps},"
            f"{net.depth},{net.nonzeros}"
        )

    for delta in (0.3, 0.5):
        for n in (1, 2, 4):
            eps = 0.1
            cfg = nc.InverseNetConfig(eps, delta)
            net = nc.inverse_net(cfg, n)
            worst = 0.0
            for _ in range(mc_draws):
                a = spectral_sample(n, 1.0 - delta)
                exact = np.linalg.inv(np.eye(n) - a)
                got = nc.matr(nc.realize(net, nc.vec(a)), n, n)
                worst = max(worst, float(np.linalg.norm(exact - got, 2)))
            rows.append(
                f"inverse,{eps},{delta},{n},{cfg.stage_count},{worst!r},{eps},"
                f"{worst <= eps},{net.depth},{net.nonzeros}"
            )

    return "\n".join(rows) + "\n"

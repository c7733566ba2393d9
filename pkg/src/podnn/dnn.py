"""Fully-connected ReLU surrogate of the parametric map, trained with Adam.

Everything is plain numpy: forward pass, exact reverse-mode gradients of the
relative-error loss, bias-corrected Adam, seeded per-epoch Fisher-Yates
shuffling, validation-based model selection and early stopping.  Runs are
bitwise deterministic for a fixed seed in single-threaded mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TrainConfig",
    "MlpModel",
    "Dataset",
    "AdamState",
    "init_mlp",
    "relative_error_loss",
    "loss_and_gradients",
    "adam_update",
    "train",
    "evaluate",
    "fisher_yates",
]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    batch_size: int = 100
    n_epochs: int = 2000
    patience: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not 0.0 < self.beta1 < self.beta2 < 1.0:
            raise ValueError("need 0 < beta1 < beta2 < 1")
        if self.batch_size < 1 or self.n_epochs < 1 or self.patience < 0:
            raise ValueError("invalid batch size / epoch count / patience")


@dataclass
class MlpModel:
    """ReLU hidden layers, affine output, with a stored input normalization.

    ``input_shift``/``input_scale`` map raw parameters to the training range
    (identity by default); they travel with the weights so inference sees the
    same preprocessing as training.
    """

    weights: list
    biases: list
    input_shift: np.ndarray
    input_scale: np.ndarray

    @property
    def widths(self) -> tuple:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def normalize(self, x):
        return (np.asarray(x, dtype=float) - self.input_shift) / self.input_scale

    def forward(self, x):
        """Batch forward pass; rows are samples."""
        a = self.normalize(np.atleast_2d(x))
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ w.T + b, 0.0)
        return a @ self.weights[-1].T + self.biases[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.input_shift.copy(),
            self.input_scale.copy(),
        )


def init_mlp(widths, seed: int = 0, input_shift=None, input_scale=None) -> MlpModel:
    """He-uniform initialization scaled by fan-in, zero biases."""
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2:
        raise ValueError("need at least input and output widths")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    shift = np.zeros(widths[0]) if input_shift is None else np.asarray(input_shift, dtype=float)
    scale = np.ones(widths[0]) if input_scale is None else np.asarray(input_scale, dtype=float)
    return MlpModel(weights, biases, shift, scale)


def normalization_for_box(lo, hi):
    """Affine map taking the box [lo, hi] to [-1, 1] per coordinate."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return (lo + hi) / 2.0, (hi - lo) / 2.0


def relative_error_loss(pred, target) -> float:
    """Mean over the batch of ||pred_i - target_i|| / ||target_i||."""
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    target = np.atleast_2d(np.asarray(target, dtype=float))
    norms = np.linalg.norm(target, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("target rows must have positive norm")
    return float(np.mean(np.linalg.norm(pred - target, axis=1) / norms))


def loss_and_gradients(model: MlpModel, x, target):
    """Loss plus exact gradients for every weight and bias.

    ReLU uses the zero subgradient at the kink; a sample with zero residual
    contributes a zero gradient (subgradient choice for the norm).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    target = np.atleast_2d(np.asarray(target, dtype=float))
    m = x.shape[0]

    activations = [model.normalize(x)]
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        activations.append(np.maximum(activations[-1] @ w.T + b, 0.0))
    pred = activations[-1] @ model.weights[-1].T + model.biases[-1]

    residual = pred - target
    res_norm = np.linalg.norm(residual, axis=1)
    tgt_norm = np.linalg.norm(target, axis=1)
    if np.any(tgt_norm == 0.0):
        raise ValueError("target rows must have positive norm")
    loss = float(np.mean(res_norm / tgt_norm))

    denom = res_norm * tgt_norm
    safe = denom > 0.0
    delta = np.zeros_like(residual)
    delta[safe] = residual[safe] / denom[safe, None] / m

    grad_w = [None] * model.n_layers
    grad_b = [None] * model.n_layers
    for layer in range(model.n_layers - 1, -1, -1):
        grad_w[layer] = delta.T @ activations[layer]
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer]) * (activations[layer] > 0.0)
    return loss, grad_w, grad_b


@dataclass
class AdamState:
    m_w: list
    v_w: list
    m_b: list
    v_b: list
    step: int = 0

    @classmethod
    def zeros_like(cls, model: MlpModel) -> "AdamState":
        return cls(
            [np.zeros_like(w) for w in model.weights],
            [np.zeros_like(w) for w in model.weights],
            [np.zeros_like(b) for b in model.biases],
            [np.zeros_like(b) for b in model.biases],
        )


def adam_update(model: MlpModel, grad_w, grad_b, state: AdamState, cfg: TrainConfig):
    """One bias-corrected Adam step, applied in place."""
    state.step += 1
    t = state.step
    c1 = 1.0 - cfg.beta1**t
    c2 = 1.0 - cfg.beta2**t
    for i in range(model.n_layers):
        for params, grads, ms, vs in (
            (model.weights, grad_w, state.m_w, state.v_w),
            (model.biases, grad_b, state.m_b, state.v_b),
        ):
            ms[i] *= cfg.beta1
            ms[i] += (1.0 - cfg.beta1) * grads[i]
            vs[i] *= cfg.beta2
            vs[i] += (1.0 - cfg.beta2) * grads[i] ** 2
            params[i] -= cfg.learning_rate * (ms[i] / c1) / (np.sqrt(vs[i] / c2) + cfg.eps_adam)
    return state


def fisher_yates(n: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded in-place Fisher-Yates permutation of range(n)."""
    perm = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return perm


@dataclass(frozen=True)
class Dataset:
    """Parameter/coefficient pairs with disjoint, exhaustive split indices."""

    inputs: np.ndarray
    targets: np.ndarray
    train_idx: np.ndarray
    valid_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        n = self.inputs.shape[0]
        if self.targets.shape[0] != n:
            raise ValueError("inputs and targets disagree in length")
        joined = np.concatenate([self.train_idx, self.valid_idx, self.test_idx])
        if len(np.unique(joined)) != n or len(joined) != n:
            raise ValueError("split indices must be disjoint and exhaustive")
        if np.any(np.linalg.norm(self.targets, axis=1) == 0.0):
            raise ValueError("target rows must have positive norm")

    @classmethod
    def split(cls, inputs, targets, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> "Dataset":
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        if abs(sum(fractions) - 1.0) > 1e-12:
            raise ValueError("split fractions must sum to 1")
        n = inputs.shape[0]
        perm = fisher_yates(n, np.random.default_rng(seed))
        n_train = int(round(fractions[0] * n))
        n_valid = int(round(fractions[1] * n))
        return cls(inputs, targets, perm[:n_train],
                   perm[n_train:n_train + n_valid], perm[n_train + n_valid:])

    def subset(self, which: str):
        idx = {"train": self.train_idx, "valid": self.valid_idx, "test": self.test_idx}[which]
        return self.inputs[idx], self.targets[idx]


def train(dataset: Dataset, widths, cfg: TrainConfig,
          input_shift=None, input_scale=None):
    """Mini-batch Adam with per-epoch reshuffling and early stopping.

    Returns the parameter snapshot with the lowest validation loss and the
    per-epoch (train, valid) loss history.  Training aborts on a non-finite
    loss, reporting the epoch.
    """
    x_train, t_train = dataset.subset("train")
    x_valid, t_valid = dataset.subset("valid")
    if cfg.batch_size > x_train.shape[0]:
        raise ValueError("batch size exceeds the training split")

    model = init_mlp(widths, seed=cfg.seed, input_shift=input_shift, input_scale=input_scale)
    state = AdamState.zeros_like(model)
    rng = np.random.default_rng(cfg.seed + 1)

    history = []
    best_valid = np.inf
    best_model = model.copy()
    wait = 0
    for epoch in range(cfg.n_epochs):
        perm = fisher_yates(x_train.shape[0], rng)
        batch_losses = []
        for start in range(0, x_train.shape[0], cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            loss, gw, gb = loss_and_gradients(model, x_train[idx], t_train[idx])
            if not np.isfinite(loss):
                raise RuntimeError(f"non-finite training loss at epoch {epoch}")
            adam_update(model, gw, gb, state, cfg)
            batch_losses.append(loss)
        valid_loss = relative_error_loss(model.forward(x_valid), t_valid)
        if not np.isfinite(valid_loss):
            raise RuntimeError(f"non-finite validation loss at epoch {epoch}")
        history.append((epoch, float(np.mean(batch_losses)), valid_loss))
        if valid_loss < best_valid:
            best_valid = valid_loss
            best_model = model.copy()
            wait = 0
        else:
            wait += 1
            if wait > cfg.patience:
                break
    return best_model, history


def evaluate(model: MlpModel, x, target) -> float:
    """Mean per-sample relative error of the model on a split."""
    return relative_error_loss(model.forward(x), target)

"""Run configuration: one JSON-serializable object drives the whole pipeline."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .dnn import TrainConfig

__all__ = ["RunConfig", "ConfigError", "desk_config", "toy_config", "paper_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Parameters of the offline/online pipeline for the Helmholtz benchmark."""

    domain: str = "flower"
    n_boundary: int = 133
    target_interior: int = 1067
    candidate_count: int = 8000
    shape: float = 3.0
    n_loc: int = 13
    mu_bounds: tuple = ((0.1, 4.0), (0.0, 2.0))
    n_s: int = 100
    snapshot_sampling: str = "tensor"
    pod_tol: float = 1e-6
    n_data: int = 2000
    data_sampling: str = "uniform"
    split: tuple = (0.6, 0.2, 0.2)
    hidden_layers: int = 2
    width: int = 500
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 42
    n_jobs: int = 1
    out_dir: str = "artifacts"

    def __post_init__(self):
        if self.domain not in ("flower", "circle"):
            raise ConfigError(f"unknown domain {self.domain!r}")
        for name in ("n_boundary", "target_interior", "candidate_count",
                     "n_loc", "n_s", "n_data", "hidden_layers", "width"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if abs(sum(self.split) - 1.0) > 1e-12:
            raise ConfigError("split fractions must sum to 1")
        if self.snapshot_sampling not in ("tensor", "uniform"):
            raise ConfigError(f"unknown snapshot sampling {self.snapshot_sampling!r}")
        if not 0.0 < self.pod_tol < 1.0:
            raise ConfigError("pod_tol must be in (0, 1)")
        if self.shape <= 0:
            raise ConfigError("shape must be positive")

    @property
    def widths(self) -> tuple:
        return (2,) + (self.width,) * self.hidden_layers  # output width set by n_pod

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mu_bounds"] = [list(b) for b in self.mu_bounds]
        d["split"] = list(self.split)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        """Stable hash of everything except the output directory."""
        d = self.to_dict()
        d.pop("out_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        train = d.pop("train", {})
        try:
            cfg = cls(
                **{k: tuple(tuple(b) for b in v) if k == "mu_bounds"
                   else tuple(v) if k == "split" else v
                   for k, v in d.items()},
                train=TrainConfig(**train),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    @classmethod
    def from_json_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def with_overrides(self, pairs) -> "RunConfig":
        """Apply ``key=value`` overrides; dotted keys reach the train config."""
        d = self.to_dict()
        for pair in pairs:
            key, _, raw = pair.partition("=")
            if not _:
                raise ConfigError(f"override {pair!r} is not key=value")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            target = d
            parts = key.split(".")
            for part in parts[:-1]:
                if part not in target or not isinstance(target[part], dict):
                    raise ConfigError(f"unknown config section {part!r}")
                target = target[part]
            if parts[-1] not in target:
                raise ConfigError(f"unknown config key {key!r}")
            target[parts[-1]] = value
        return RunConfig.from_dict(d)


def desk_config(out_dir: str = "artifacts") -> RunConfig:
    """Desk-scale benchmark: N ~ 1200 nodes, 2000 data points."""
    return RunConfig(out_dir=out_dir)


def toy_config(out_dir: str = "artifacts-toy") -> RunConfig:
    """Small smoke-test configuration."""
    return RunConfig(
        n_boundary=32,
        target_interior=168,
        candidate_count=1500,
        n_s=9,
        n_data=60,
        width=32,
        train=TrainConfig(learning_rate=1e-3, batch_size=12, n_epochs=60,
                          patience=30, seed=0),
        out_dir=out_dir,
    )


def paper_config(out_dir: str = "artifacts-full") -> RunConfig:
    """Full-scale configuration (N = 5731, n_data = 10000); hours of compute."""
    return RunConfig(
        n_boundary=289,
        target_interior=5442,
        candidate_count=40000,
        n_data=10000,
        train=TrainConfig(learning_rate=1e-4, batch_size=100, n_epochs=2000,
                          patience=500, seed=0),
        out_dir=out_dir,
    )

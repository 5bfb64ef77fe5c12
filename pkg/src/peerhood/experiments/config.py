"""Declarative experiment configuration with JSON round-tripping."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from ..errors import PeerhoodError

EXPERIMENTS = (
    "perturbation_agent",
    "perturbation_center",
    "bin_size_sweep",
    "convergence",
    "check_pi",
    "check_pe",
    "pi_impossibility_demo",
)

# shift samples per (dimension, distribution kind)
THETA_DEFAULTS = {(1, "empirical"): 500, (2, "empirical"): 400, (1, "gmm"): 200, (2, "gmm"): 64}
STEP_DEFAULTS = {(1, "empirical"): 1 / 30, (2, "empirical"): 1 / 10, (1, "gmm"): 1 / 30, (2, "gmm"): 1 / 8}
BIN_VOLUME = 0.2


class ConfigError(PeerhoodError, ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class DistributionSpec:
    kind: str = "empirical"
    n_values: int = 5
    variance_factor: float = 2.0


@dataclass
class PartitionSpec:
    bin_dims: list | None = None
    # bin volumes; each becomes a cube with side volume ** (1/d)
    sweep: list | None = None


@dataclass
class UpdateSpec:
    kind: str | None = None
    alpha: float = 1.0
    delta_fraction: float = 0.05
    k: int = 1
    kernel_mode: str = "centered"


@dataclass
class GridSpec:
    perturb_range: float = 1.0
    perturb_step: float | None = None
    theta_samples: int | None = None
    peers: int = 200
    sampler: str = "mc"
    checkpoints: list = field(default_factory=lambda: [100, 1000, 10000])
    eval_points: int | None = None
    competitors_per_axis: int = 8
    block: int = 16


_SECTIONS = {"distribution": DistributionSpec, "partition": PartitionSpec, "update": UpdateSpec, "grids": GridSpec}


@dataclass
class ExperimentConfig:
    experiment: str = "perturbation_agent"
    dim: int = 1
    seed: int = 0
    distribution: DistributionSpec = field(default_factory=DistributionSpec)
    partition: PartitionSpec = field(default_factory=PartitionSpec)
    update: UpdateSpec = field(default_factory=UpdateSpec)
    grids: GridSpec = field(default_factory=GridSpec)
    c: float = 1.0
    zero_bin: str = "error"
    workers: int = 1
    timestamps: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.dim not in (1, 2):
            raise ConfigError("dim must be 1 or 2")
        if self.distribution.kind not in ("empirical", "gmm"):
            raise ConfigError("distribution.kind must be 'empirical' or 'gmm'")
        if self.distribution.n_values < 2:
            raise ConfigError("distribution.n_values must be >= 2")
        if self.update.kind not in (None, "empirical", "pyramid"):
            raise ConfigError("update.kind must be 'empirical' or 'pyramid'")
        if not 0 < self.update.alpha <= 1:
            raise ConfigError("update.alpha must lie in (0, 1]")
        if not 0 < self.update.delta_fraction <= 0.5:
            raise ConfigError("update.delta_fraction must lie in (0, 0.5]")
        if self.update.k < 1:
            raise ConfigError("update.k must be >= 1")
        if self.update.kernel_mode not in ("centered", "pe"):
            raise ConfigError("update.kernel_mode must be 'centered' or 'pe'")
        g = self.grids
        for name in ("theta_samples", "peers", "eval_points", "competitors_per_axis", "block"):
            v = getattr(g, name)
            if v is not None and v < 1:
                raise ConfigError(f"grids.{name} must be >= 1")
        if g.perturb_step is not None and g.perturb_step <= 0:
            raise ConfigError("grids.perturb_step must be positive")
        if g.perturb_range < 0:
            raise ConfigError("grids.perturb_range must be non-negative")
        if g.sampler not in ("mc", "grid", "quad"):
            raise ConfigError("grids.sampler must be 'mc', 'grid' or 'quad'")
        if not g.checkpoints or any(int(n) < 0 for n in g.checkpoints):
            raise ConfigError("grids.checkpoints must be a non-empty list of counts")
        if self.partition.bin_dims is not None:
            dims = np.atleast_1d(np.asarray(self.partition.bin_dims, dtype=float))
            if dims.size != self.dim or np.any(dims <= 0):
                raise ConfigError("partition.bin_dims must hold dim positive side lengths")
        if self.partition.sweep is not None and (not self.partition.sweep or min(self.partition.sweep) <= 0):
            raise ConfigError("partition.sweep must be a non-empty list of positive bin volumes")
        if self.c <= 0:
            raise ConfigError("c must be positive")
        if self.zero_bin not in ("error", "floor", "contract"):
            raise ConfigError("zero_bin must be 'error', 'floor' or 'contract'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    def resolved(self) -> "ExperimentConfig":
        """Copy with every defaulted field made explicit."""
        self.validate()
        key = (self.dim, self.distribution.kind)
        side = BIN_VOLUME ** (1.0 / self.dim)
        part = replace(self.partition,
                       bin_dims=list(self.partition.bin_dims or [side] * self.dim),
                       sweep=list(self.partition.sweep or [k / 30 for k in range(1, 31)]))
        upd = replace(self.update,
                      kind=self.update.kind or ("empirical" if self.distribution.kind == "empirical" else "pyramid"))
        grids = replace(self.grids,
                        perturb_step=self.grids.perturb_step or STEP_DEFAULTS[key],
                        theta_samples=self.grids.theta_samples or THETA_DEFAULTS[key],
                        eval_points=self.grids.eval_points or (1000 if self.dim == 1 else 64),
                        checkpoints=[int(n) for n in self.grids.checkpoints])
        part.bin_dims = [float(v) for v in part.bin_dims]
        part.sweep = [float(v) for v in part.sweep]
        return replace(self, partition=part, update=upd, grids=grids)

    def to_dict(self, runtime: bool = True) -> dict:
        """Plain dict; ``runtime=False`` drops settings that cannot change results."""
        data = asdict(self)
        if not runtime:
            data.pop("workers")
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for k, v in data.items():
            if k in _SECTIONS:
                section = _SECTIONS[k]
                if not isinstance(v, dict):
                    raise ConfigError(f"{k} must be a mapping")
                bad = set(v) - {f.name for f in fields(section)}
                if bad:
                    raise ConfigError(f"unknown keys in {k}: {sorted(bad)}")
                kwargs[k] = section(**v)
            else:
                kwargs[k] = v
        return cls(**kwargs).validate()

    def to_json(self, runtime: bool = True) -> str:
        return json.dumps(self.to_dict(runtime), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def hash(self) -> str:
        """Digest of the resolved config, so implicit and explicit defaults hash alike."""
        return hashlib.sha256(self.resolved().to_json(runtime=False).encode("utf-8")).hexdigest()[:16]

"""Run configuration (flat YAML mapping) and seed derivation.

Every random stage draws its seed as ``master_seed + ROLE_OFFSETS[role]``
(mod 2**32). Offsets are fixed, so adding a stage never shifts the seeds of
existing ones:

==========  ======
role        offset
==========  ======
split       0
validation  1
blend       2
svm         3
forest      4
net         5
folds       6
==========  ======
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .blend import META_MODES, BlendConfig
from .dataset import FeatureSchema, load_schema
from .errors import ConfigError
from .net import ADAM, OUTPUT_MODES, SGD, SOFTMAX, TrainSpec

ROLE_OFFSETS = {"split": 0, "validation": 1, "blend": 2, "svm": 3, "forest": 4, "net": 5, "folds": 6}
SEED_MODULUS = 2**32
NET_INPUTS = ("meta", "raw")


def derive_seed(master: int, role: str) -> int:
    return (int(master) + ROLE_OFFSETS[role]) % SEED_MODULUS


@dataclass
class RunConfig:
    schema: str = "synthetic"
    data: str = "data.csv"
    split_ratio: tuple[float, float] = (80.0, 20.0)
    stratify: bool = True
    validation_ratio: tuple[float, float] = (90.0, 10.0)
    folds: int = 5
    minmax: bool = True
    standard: bool = True
    blend_ratio: tuple[float, float] = (80.0, 20.0)
    meta_mode: str = "labels"
    meta_include_raw: bool = False
    variance_floor: float = 1e-9
    svm_lambda: float = 1e-4
    svm_epochs: int = 20
    svm_batch_size: int = 1
    tree_max_depth: int | None = 12
    tree_min_samples_leaf: int = 2
    forest_trees: int = 100
    forest_features: int | None = None
    forest_max_depth: int | None = 12
    forest_min_samples_leaf: int = 1
    forest_bootstrap: bool = True
    n_jobs: int = 1
    net_hidden: tuple[int, ...] = (16,)
    net_epochs: int = 200
    net_batch_size: int = 32
    net_learning_rate: float = 1e-3
    net_optimizer: str = ADAM
    net_output: str = SOFTMAX
    net_patience: int | None = None
    net_input: str = "meta"
    beta: float = 0.9
    seed: int = 0
    out: str = "run"
    # directory relative paths resolve against; not part of the snapshot
    base_dir: str = field(default=".", repr=False, compare=False)

    def __post_init__(self):
        self._coerce()
        self.validate()

    def _coerce(self):
        try:
            for f in dataclasses.fields(self):
                v = getattr(self, f.name)
                if f.name in ("split_ratio", "validation_ratio", "blend_ratio"):
                    v = tuple(float(x) for x in v)
                elif f.name == "net_hidden":
                    v = tuple(int(x) for x in v)
                elif f.type == "bool":
                    if not isinstance(v, bool):
                        raise ConfigError(f"{f.name} must be true or false, got {v!r}")
                elif f.type in ("int", "int | None"):
                    v = None if v is None else int(v)
                elif f.type == "float":
                    v = float(v)
                elif f.type == "str":
                    v = str(v)
                setattr(self, f.name, v)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid config value: {exc}") from exc

    def validate(self) -> None:
        for name in ("split_ratio", "validation_ratio", "blend_ratio"):
            r = getattr(self, name)
            if len(r) != 2 or min(r) <= 0 or not math.isclose(sum(r), 100.0, abs_tol=1e-9):
                raise ConfigError(f"{name} must be two positive percentages summing to 100, got {list(r)}")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.meta_mode not in META_MODES:
            raise ConfigError(f"meta_mode must be one of {META_MODES}")
        if self.net_input not in NET_INPUTS:
            raise ConfigError(f"net_input must be one of {NET_INPUTS}")
        if self.net_optimizer not in (ADAM, SGD):
            raise ConfigError("net_optimizer must be 'adam' or 'sgd'")
        if self.net_output not in OUTPUT_MODES:
            raise ConfigError(f"net_output must be one of {OUTPUT_MODES}")
        if not self.net_hidden:
            raise ConfigError("net_hidden needs at least one hidden layer")
        if not 0 < self.beta <= 1:
            raise ConfigError("beta must lie in (0, 1]")
        if self.variance_floor <= 0 or self.svm_lambda <= 0:
            raise ConfigError("variance_floor and svm_lambda must be positive")
        for name in ("svm_epochs", "svm_batch_size", "tree_min_samples_leaf", "forest_trees",
                     "forest_min_samples_leaf", "n_jobs", "net_epochs", "net_batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    # -- derived pieces ----------------------------------------------------

    def seed_for(self, role: str) -> int:
        return derive_seed(self.seed, role)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def check_paths(self) -> None:
        """Fail early when the schema or data file cannot be found."""
        self.load_schema()
        if not self.resolve(self.data).is_file():
            raise ConfigError(f"data file not found: {self.resolve(self.data)}")

    def load_schema(self) -> FeatureSchema:
        candidate = self.resolve(self.schema)
        return load_schema(candidate if candidate.exists() else self.schema)

    def blend_config(self) -> BlendConfig:
        return BlendConfig(
            blend_ratio=self.blend_ratio,
            stratify=self.stratify,
            mode=self.meta_mode,
            include_raw=self.meta_include_raw,
            variance_floor=self.variance_floor,
            svm_lambda=self.svm_lambda,
            svm_epochs=self.svm_epochs,
            svm_batch_size=self.svm_batch_size,
            tree_max_depth=self.tree_max_depth,
            tree_min_samples_leaf=self.tree_min_samples_leaf,
            forest_trees=self.forest_trees,
            forest_features=self.forest_features,
            forest_max_depth=self.forest_max_depth,
            forest_min_samples_leaf=self.forest_min_samples_leaf,
            forest_bootstrap=self.forest_bootstrap,
            n_jobs=self.n_jobs,
            split_seed=self.seed_for("blend"),
            svm_seed=self.seed_for("svm"),
            forest_seed=self.seed_for("forest"),
        )

    def train_spec(self) -> TrainSpec:
        return TrainSpec(
            epochs=self.net_epochs,
            batch_size=self.net_batch_size,
            seed=self.seed_for("net"),
            learning_rate=self.net_learning_rate,
            optimizer=self.net_optimizer,
            output=self.net_output,
            patience=self.net_patience,
        )

    # -- serialisation -----------------------------------------------------

    def snapshot(self) -> dict:
        """Config as a plain mapping, without the output and base directories."""
        out = {}
        for f in dataclasses.fields(self):
            if f.name in ("out", "base_dir"):
                continue
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, data, base_dir: str | Path = ".") -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in dataclasses.fields(cls)} - {"base_dir"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {unknown}")
        return cls(**data, base_dir=str(base_dir))

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data, base_dir=path.parent)

    def dump(self, path: str | Path) -> None:
        data = self.snapshot()
        data["out"] = self.out
        Path(path).write_text(yaml.safe_dump(data, sort_keys=False), encoding="utf-8")

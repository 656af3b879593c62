# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

from .dataset.data_types import _unwrap_type, dump_dataclass


logger = logging.getLogger(__name__)


SEED_ENV = "DEFORM_GNN_SEED"

MODEL_KINDS = ("deformable", "gcn", "mlp")
ABLATIONS = ("none", "regularizers", "deformation")


@dataclass
class TrainConfig:
    model: str = "deformable"
    lr: float = 0.01
    weight_decay: float = 5e-4
    hidden_dim: int = 64
    epochs: int = 500
    dropout: float = 0.5
    # strengths of the separating and focusing regularizers
    alpha: float = 1e-2
    beta: float = 1e-2
    # L: number of smoothing steps, giving L + 1 latent graphs
    num_smoothing: int = 2
    # K
    num_kernels: int = 4
    # k of the latent kNN graphs
    knn: int = 5
    positional_dim: int = 16
    deformation: bool = True
    deform_hidden_dim: Optional[int] = None
    seed: int = 0

    def validate(self) -> None:
        if self.model not in MODEL_KINDS:
            raise ValueError(f"Unknown model {self.model!r}, expected one of {MODEL_KINDS}.")
        for name in ("hidden_dim", "epochs", "num_kernels", "knn", "positional_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1, got {getattr(self, name)}.")
        for name in ("lr", "weight_decay", "alpha", "beta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}.")
        if self.num_smoothing < 0:
            raise ValueError(f"num_smoothing must be >= 0, got {self.num_smoothing}.")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}.")
        if self.deform_hidden_dim is not None and self.deform_hidden_dim < 1:
            raise ValueError(f"deform_hidden_dim must be at least 1, got {self.deform_hidden_dim}.")


@dataclass
class RunConfig:
    command: str = "train"
    # exactly one of `dataset` (a dataset folder) and `synthetic` ("n=200,c=5,h=0.1")
    dataset: Optional[str] = None
    synthetic: Optional[str] = None
    out_dir: str = "runs"
    # number of split instances and of seeds per split
    splits: int = 1
    seeds: int = 1
    jobs: int = 0
    graph_cache: Optional[str] = None
    ablation: str = "none"
    train: TrainConfig = field(default_factory=TrainConfig)
    # hyperparameters given as several comma-separated values
    grid: Dict[str, List[Any]] = field(default_factory=dict)

    def validate(self, needs_dataset: bool = True) -> None:
        if needs_dataset and (self.dataset is None) == (self.synthetic is None):
            raise ValueError("Specify exactly one dataset source: --dataset or --synthetic.")
        if self.splits < 1 or self.seeds < 1:
            raise ValueError(f"splits and seeds must be >= 1, got {self.splits}, {self.seeds}.")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"Unknown ablation {self.ablation!r}, expected one of {ABLATIONS}.")
        self.train.validate()


_TRAIN_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}
_RUN_FIELDS = {
    f.name: f for f in dataclasses.fields(RunConfig) if f.name not in ("train", "grid")
}


def _cast(value: Any, typeannot) -> Any:
    tp = _unwrap_type(typeannot)
    if not isinstance(value, str):
        return value if value is None or tp is Any else tp(value)
    text = value.strip()
    if text.lower() in ("none", "null", "") and tp is not str:
        return None
    if tp is bool:
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"Cannot read {value!r} as a boolean.")
    return tp(text)


def read_config_file(path: str) -> Dict[str, str]:
    """Flat `key = value` file; `#` starts a comment."""
    if not os.path.isfile(path):
        raise FileNotFoundError(f"Config file {path} does not exist.")
    values = {}
    with open(path, "r") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected `key = value`, got {line!r}.")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def resolve_config(
    file_values: Optional[Mapping[str, Any]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """
    Merge configuration layers with precedence
    overrides (command-line flags) > $DEFORM_GNN_SEED (seed only) > file > defaults.
    A training hyperparameter given as a comma-separated list becomes a grid axis
    whose first value is also the value of the base config.
    """
    environ = os.environ if environ is None else environ
    merged: Dict[str, Any] = dict(file_values or {})
    if environ.get(SEED_ENV):
        merged["seed"] = environ[SEED_ENV]
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})

    train_kwargs: Dict[str, Any] = {}
    run_kwargs: Dict[str, Any] = {}
    grid: Dict[str, List[Any]] = {}
    for key, raw in merged.items():
        key = key.replace("-", "_")
        if key in _TRAIN_FIELDS:
            typeannot = _TRAIN_FIELDS[key].type
            if isinstance(raw, str) and "," in raw:
                values = [_cast(v, typeannot) for v in raw.split(",") if v.strip()]
            elif isinstance(raw, (list, tuple)):
                values = [_cast(v, typeannot) for v in raw]
            else:
                values = [_cast(raw, typeannot)]
            if len(values) > 1:
                grid[key] = values
            train_kwargs[key] = values[0]
        elif key in _RUN_FIELDS:
            run_kwargs[key] = _cast(raw, _RUN_FIELDS[key].type)
        else:
            raise ValueError(f"Unknown config key {key!r}.")

    config = RunConfig(train=TrainConfig(**train_kwargs), grid=grid, **run_kwargs)
    for key, values in grid.items():
        for value in values:
            dataclasses.replace(config.train, **{key: value}).validate()
    return config


def grid_points(config: RunConfig) -> List[TrainConfig]:
    """All TrainConfigs of the grid product, in lexicographic order of the value lists."""
    points = [config.train]
    for key in sorted(config.grid):
        points = [
            dataclasses.replace(point, **{key: value})
            for point in points
            for value in config.grid[key]
        ]
    return points


def dump_config(config: Any, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        dump_dataclass(config, f, indent=2, sort_keys=True)

# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import abc
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional

import numpy as np

from ..autodiff import Tensor
from ..autodiff import ops as F
from ..config import TrainConfig
from ..dataset.data_types import Dataset
from .deform_conv import ConvDiagnostics


class Mode(Enum):
    TRAIN = "train"
    EVAL = "eval"


@dataclass
class ForwardOutput:
    logits: Tensor
    # fused representation and n x (L + 2) fusion scores of the deformable model
    fused: Optional[Tensor] = None
    scores: Optional[Tensor] = None
    diagnostics: List[ConvDiagnostics] = field(default_factory=list)
    # per level, n x K (d_phi + 1); empty when the deformation is off
    deformations: List[Tensor] = field(default_factory=list)
    # per level, K x (d_phi + 1)
    kernel_vectors: List[Tensor] = field(default_factory=list)


class NodeClassifier(abc.ABC):
    """
    Stateless model definition. Parameters live outside the model as a flat
    {name: array} dict so that training, checkpoints and gradient checks can
    treat every model alike.
    """

    kind: str = ""

    def __init__(self, dataset: Dataset, config: TrainConfig):
        self.dataset = dataset
        self.config = config

    @abc.abstractmethod
    def init_params(self, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        pass

    @abc.abstractmethod
    def forward(
        self,
        params: Mapping[str, Tensor],
        mode: Mode = Mode.EVAL,
        rng: Optional[np.random.Generator] = None,
        **kwargs,
    ) -> ForwardOutput:
        pass

    def param_groups(self, params: Mapping[str, np.ndarray]) -> Dict[str, List[str]]:
        """Parameter names grouped by their top-level module."""
        groups: Dict[str, List[str]] = {}
        for name in sorted(params):
            groups.setdefault(name.split(".")[0], []).append(name)
        return groups

    def decays(self, name: str) -> bool:
        """Whether weight decay applies to the parameter `name`."""
        return not name.endswith("bias")

    def _dropout(self, x, mode: Mode, rng: Optional[np.random.Generator]):
        return apply_dropout(x, self.config.dropout, mode, rng)


def apply_dropout(x, rate: float, mode: Mode, rng: Optional[np.random.Generator]):
    """Inverted dropout in train mode; identity in eval mode or at rate 0."""
    if mode != Mode.TRAIN or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("Train-mode forward with dropout needs a random generator.")
    return F.dropout(x, rate, rng=rng)

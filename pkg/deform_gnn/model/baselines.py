# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from ..autodiff import Tensor
from ..autodiff import ops as F
from ..config import TrainConfig
from ..dataset.data_types import Dataset
from ..dataset.utils import adjacency_with_self_loops
from .data_types import ForwardOutput, Mode, NodeClassifier, apply_dropout
from .init import linear_weight


def gcn_propagation(dataset: Dataset) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Entries of D~^-1/2 A~ D~^-1/2 with self-loops.

    Returns:
        targets, sources, weights: output row, input row and coefficient of
            every nonzero.
    """
    adjacency = adjacency_with_self_loops(dataset).tocoo()
    degree = np.asarray(adjacency.sum(axis=1)).reshape(-1)
    order = np.lexsort((adjacency.col, adjacency.row))
    targets, sources = adjacency.row[order], adjacency.col[order]
    weights = 1.0 / np.sqrt(degree[targets] * degree[sources])
    return targets.astype(np.int64), sources.astype(np.int64), weights


def _propagate(x: Tensor, propagation, num_nodes: int) -> Tensor:
    targets, sources, weights = propagation
    messages = F.mul(F.gather_rows(x, sources), Tensor(weights[:, None]))
    return F.scatter_add_rows(messages, targets, num_nodes)


def _linear(x, params: Mapping[str, Tensor], prefix: str) -> Tensor:
    return F.add(F.matmul(x, F.transpose(params[f"{prefix}.weight"])), params[f"{prefix}.bias"])


def gcn_forward(
    dataset: Dataset,
    params: Mapping[str, Tensor],
    mode: Mode = Mode.EVAL,
    rng: Optional[np.random.Generator] = None,
    dropout: float = 0.0,
    propagation=None,
) -> Tensor:
    """Two graph convolutions: P relu(P dropout(X) W1^T + b1) W2^T + b2, with P normalized."""
    params = {k: v if isinstance(v, Tensor) else Tensor(v) for k, v in params.items()}
    propagation = propagation if propagation is not None else gcn_propagation(dataset)
    n = dataset.num_nodes
    x = apply_dropout(Tensor(dataset.features), dropout, mode, rng)
    h = F.relu(
        F.add(
            _propagate(F.matmul(x, F.transpose(params["layer1.weight"])), propagation, n),
            params["layer1.bias"],
        )
    )
    h = apply_dropout(h, dropout, mode, rng)
    return F.add(
        _propagate(F.matmul(h, F.transpose(params["layer2.weight"])), propagation, n),
        params["layer2.bias"],
    )


def mlp_forward(
    dataset: Dataset,
    params: Mapping[str, Tensor],
    mode: Mode = Mode.EVAL,
    rng: Optional[np.random.Generator] = None,
    dropout: float = 0.0,
) -> Tensor:
    """Two-layer relu perceptron on the node features; edges are ignored."""
    params = {k: v if isinstance(v, Tensor) else Tensor(v) for k, v in params.items()}
    x = apply_dropout(Tensor(dataset.features), dropout, mode, rng)
    h = apply_dropout(F.relu(_linear(x, params, "layer1")), dropout, mode, rng)
    return _linear(h, params, "layer2")


def _two_layer_params(
    rng: np.random.Generator, d_x: int, d_h: int, num_classes: int
) -> Dict[str, np.ndarray]:
    return {
        "layer1.weight": linear_weight(rng, d_h, d_x),
        "layer1.bias": np.zeros(d_h),
        "layer2.weight": linear_weight(rng, num_classes, d_h),
        "layer2.bias": np.zeros(num_classes),
    }


class GCN(NodeClassifier):
    kind = "gcn"

    def __init__(self, dataset: Dataset, config: TrainConfig):
        super().__init__(dataset, config)
        self.propagation = gcn_propagation(dataset)

    def init_params(self, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        return _two_layer_params(
            rng, self.dataset.num_features, self.config.hidden_dim, self.dataset.num_classes
        )

    def forward(self, params, mode=Mode.EVAL, rng=None, **kwargs) -> ForwardOutput:
        logits = gcn_forward(
            self.dataset,
            params,
            mode=mode,
            rng=rng,
            dropout=self.config.dropout,
            propagation=self.propagation,
        )
        return ForwardOutput(logits=logits)


class MLP(NodeClassifier):
    kind = "mlp"

    def init_params(self, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        return _two_layer_params(
            rng, self.dataset.num_features, self.config.hidden_dim, self.dataset.num_classes
        )

    def forward(self, params, mode=Mode.EVAL, rng=None, **kwargs) -> ForwardOutput:
        logits = mlp_forward(self.dataset, params, mode=mode, rng=rng, dropout=self.config.dropout)
        return ForwardOutput(logits=logits)

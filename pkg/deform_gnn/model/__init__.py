# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

from typing import List, Optional

from ..config import TrainConfig
from ..dataset.data_types import Dataset
from .baselines import GCN, MLP, gcn_forward, mlp_forward  # noqa: F401
from .checkpoint import check_params_compatible, load_checkpoint, save_checkpoint  # noqa: F401
from .data_types import ForwardOutput, Mode, NodeClassifier  # noqa: F401
from .deformable_gcn import DeformableGCN, fuse_attention  # noqa: F401
from .positional import NeighborhoodGraph, SmoothedFeatures


MODELS = {cls.kind: cls for cls in (DeformableGCN, GCN, MLP)}


def build_model(
    dataset: Dataset,
    config: TrainConfig,
    graphs: Optional[List[NeighborhoodGraph]] = None,
    smoothed: Optional[SmoothedFeatures] = None,
    graph_cache: Optional[str] = None,
) -> NodeClassifier:
    if config.model not in MODELS:
        raise ValueError(f"Unknown model {config.model!r}, expected one of {sorted(MODELS)}.")
    if config.model == DeformableGCN.kind:
        return DeformableGCN(
            dataset, config, graphs=graphs, smoothed=smoothed, graph_cache=graph_cache
        )
    return MODELS[config.model](dataset, config)

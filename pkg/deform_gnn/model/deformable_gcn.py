# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import ShapeError, Tensor
from ..autodiff import ops as F
from ..config import TrainConfig
from ..dataset.data_types import Dataset
from .data_types import ForwardOutput, Mode, NodeClassifier
from .deform_conv import (
    DEFORMATION_PARAMS,
    KERNEL_VECTORS,
    WEIGHT,
    KernelParams,
    deform_gconv,
    init_kernel_params,
)
from .init import glorot_uniform, linear_weight
from .positional import (
    NeighborhoodGraph,
    SmoothedFeatures,
    build_all_graphs,
    positional_embed,
    smooth_features,
)


logger = logging.getLogger(__name__)


def fuse_attention(ys: Sequence[Tensor], z) -> Tuple[Tensor, Tensor]:
    """
    Attention fusion over levels: y~ = y / |y|, s_v = softmax_l(z . y~_v^(l)),
    h~_v = sum_l s_v^(l) y~_v^(l).

    Returns:
        fused: n x d_y
        scores: n x (number of levels)
    """
    if len(ys) == 0:
        raise ValueError("Nothing to fuse.")
    z = z if isinstance(z, Tensor) else Tensor(z)
    d_y = z.shape[0]
    for level, y in enumerate(ys):
        if y.ndim != 2 or y.shape[1] != d_y:
            raise ShapeError(f"Level {level} output has shape {y.shape}, expected (n, {d_y}).")
    normalized = [F.row_l2_normalize(y) for y in ys]
    z_col = F.reshape(z, (d_y, 1))
    scores = F.softmax(F.concat([F.matmul(y, z_col) for y in normalized]))

    fused = None
    for level, y in enumerate(normalized):
        select = np.zeros((len(ys), 1))
        select[level] = 1.0
        term = F.mul(y, F.matmul(scores, Tensor(select)))
        fused = term if fused is None else F.add(fused, term)
    return fused, scores


class DeformableGCN(NodeClassifier):
    """
    encoder -> one deformable convolution per latent kNN graph and on the input
    graph -> attention fusion -> linear classifier.
    """

    kind = "deformable"

    def __init__(
        self,
        dataset: Dataset,
        config: TrainConfig,
        graphs: Optional[List[NeighborhoodGraph]] = None,
        smoothed: Optional[SmoothedFeatures] = None,
        graph_cache: Optional[str] = None,
    ):
        super().__init__(dataset, config)
        L = config.num_smoothing
        self.smoothed = smoothed if smoothed is not None else smooth_features(dataset, L)
        if len(self.smoothed) != L + 1:
            raise ValueError(
                f"Got {len(self.smoothed)} smoothing levels, expected {L + 1}."
            )
        if graphs is None:
            graphs = build_all_graphs(dataset, self.smoothed, config.knn, cache_dir=graph_cache)
        if len(graphs) != L + 2:
            raise ValueError(f"Got {len(graphs)} graphs, expected {L + 2}.")
        self.graphs = graphs

    @property
    def num_levels(self) -> int:
        return len(self.graphs)

    def init_params(self, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        cfg = self.config
        d_x, d_h = self.dataset.num_features, cfg.hidden_dim
        d_y = d_h
        params = {
            "encoder.weight": linear_weight(rng, d_h, d_x),
            "encoder.bias": np.zeros(d_h),
        }
        for level in range(cfg.num_smoothing + 1):
            params[f"positional.{level}.weight"] = linear_weight(rng, cfg.positional_dim, d_x)
        for level in range(self.num_levels):
            conv = init_kernel_params(
                rng,
                num_kernels=cfg.num_kernels,
                positional_dim=cfg.positional_dim,
                in_dim=d_x,
                hidden_dim=d_h,
                out_dim=d_y,
                deform_hidden_dim=cfg.deform_hidden_dim,
                deformation=cfg.deformation,
            )
            params.update({f"conv.{level}.{k}": v for k, v in conv.items()})
        params["fusion.z"] = glorot_uniform(rng, (d_y,), fan_in=d_y, fan_out=1)
        params["classifier.weight"] = linear_weight(rng, self.dataset.num_classes, d_y)
        params["classifier.bias"] = np.zeros(self.dataset.num_classes)
        return params

    def forward(
        self,
        params: Mapping[str, Tensor],
        mode: Mode = Mode.EVAL,
        rng: Optional[np.random.Generator] = None,
        use_deformation: bool = True,
    ) -> ForwardOutput:
        params = {k: v if isinstance(v, Tensor) else Tensor(v) for k, v in params.items()}
        L = self.config.num_smoothing

        x = self._dropout(Tensor(self.dataset.features), mode, rng)
        h = F.relu(
            F.add(F.matmul(x, F.transpose(params["encoder.weight"])), params["encoder.bias"])
        )
        embedding = positional_embed(
            self.smoothed, [params[f"positional.{level}.weight"] for level in range(L + 1)]
        )

        ys, output = [], ForwardOutput(logits=None)
        for level, graph in enumerate(self.graphs):
            # the input graph reuses the last positions and the raw features
            coord_level, feature_level = (level, level) if level <= L else (L, 0)
            kernel = KernelParams.from_params(params, prefix=f"conv.{level}.")
            conv = deform_gconv(
                graph,
                h,
                embedding.coordinates[coord_level],
                self.smoothed[feature_level],
                kernel,
                use_deformation=use_deformation,
            )
            ys.append(conv.y)
            output.diagnostics.append(conv.diagnostics)
            output.kernel_vectors.append(kernel.kernel_vectors)
            if conv.deformations is not None:
                output.deformations.append(conv.deformations)

        output.fused, output.scores = fuse_attention(ys, params["fusion.z"])
        output.logits = F.add(
            F.matmul(
                self._dropout(output.fused, mode, rng),
                F.transpose(params["classifier.weight"]),
            ),
            params["classifier.bias"],
        )
        return output

    def decays(self, name: str) -> bool:
        return not (name.endswith("bias") or name.endswith(KERNEL_VECTORS))

    def param_groups(self, params: Mapping[str, np.ndarray]) -> Dict[str, List[str]]:
        groups: Dict[str, List[str]] = {}
        for name in sorted(params):
            parts = name.split(".")
            if parts[0] == "conv":
                suffix = ".".join(parts[2:])
                if suffix == KERNEL_VECTORS:
                    group = "kernel_vectors"
                elif suffix == WEIGHT:
                    group = "kernel_weights"
                elif suffix in DEFORMATION_PARAMS:
                    group = "deformation"
                else:
                    group = "conv"
            elif parts[0] == "positional":
                group = f"positional.{parts[1]}"
            else:
                group = parts[0]
            groups.setdefault(group, []).append(name)
        return groups

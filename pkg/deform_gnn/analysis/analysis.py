# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..dataset.data_types import Dataset
from ..model.data_types import ForwardOutput
from ..model.deform_conv import ConvDiagnostics
from ..model.deformable_gcn import DeformableGCN
from ..train.trainer import TrainedModel, predict


logger = logging.getLogger(__name__)


@dataclass
class AnalysisReport:
    # level tags in model order: "0", ..., "L", "input"
    levels: List[str] = field(default_factory=list)
    # averaged fusion score of every level
    attention: np.ndarray = field(default_factory=lambda: np.zeros(0))
    # n x (number of levels)
    h_weight_no_deform: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    h_weight_deform: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    # target -> (nodes, intensities), intensities descending, ties by node
    receptive_fields: Dict[int, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)


def homophilic_weight(v: int, diagnostics: ConvDiagnostics, labels: np.ndarray) -> float:
    """
    Kernel weight mass v puts on neighbors with its own label, summed over
    kernels. v itself does not count.
    """
    if diagnostics is None:
        raise ValueError("No diagnostics given.")
    neighbors, weights = diagnostics.for_node(v)
    same = (neighbors != v) & (labels[neighbors] == labels[v])
    return float(weights[same].sum())


def homophilic_weights(diagnostics: ConvDiagnostics, labels: np.ndarray) -> np.ndarray:
    """`homophilic_weight` of every node of one level."""
    labels = np.asarray(labels)
    centers, neighbors = diagnostics.centers, diagnostics.neighbors
    same = (neighbors != centers) & (labels[neighbors] == labels[centers])
    return np.bincount(
        centers[same],
        weights=diagnostics.weights[same].sum(axis=1),
        minlength=diagnostics.num_nodes,
    ).astype(np.float64)


def attention_summary(output: ForwardOutput) -> np.ndarray:
    """Fusion score of every level averaged over all nodes."""
    if output.scores is None:
        raise ValueError("The forward output carries no fusion scores.")
    return output.scores.values.mean(axis=0)


def receptive_field(
    v: int,
    output: ForwardOutput,
    diagnostics: Optional[Sequence[ConvDiagnostics]] = None,
) -> np.ndarray:
    """
    Intensity of every node u for target v: sum over levels l and kernels k of
    s_v^(l) a_hat(u, v, k) at level l, zero where u is not a neighbor of v.
    """
    diagnostics = output.diagnostics if diagnostics is None else diagnostics
    if output.scores is None or len(diagnostics) == 0:
        raise ValueError("Receptive fields need fusion scores and diagnostics.")
    n = diagnostics[0].num_nodes
    if not 0 <= v < n:
        raise ValueError(f"Target node {v} is outside [0, {n}).")
    scores = output.scores.values[v]
    if scores.shape[0] != len(diagnostics):
        raise ValueError(f"Got {len(diagnostics)} diagnostics for {scores.shape[0]} levels.")
    intensity = np.zeros(n)
    for score, diag in zip(scores, diagnostics):
        neighbors, weights = diag.for_node(v)
        np.add.at(intensity, neighbors, score * weights.sum(axis=1))
    return intensity


def sorted_intensities(intensity: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Nonzero intensities, descending, ties broken by ascending node."""
    nodes = np.flatnonzero(intensity)
    order = np.lexsort((nodes, -intensity[nodes]))
    return nodes[order], intensity[nodes[order]]


def build_report(
    trained: TrainedModel,
    dataset: Dataset,
    target_nodes: Optional[Sequence[int]] = None,
) -> AnalysisReport:
    """
    Eval-mode analysis of a trained deformable model. Homophilic weights come
    from one pass with the deformation and one with it switched off.
    """
    if not isinstance(trained.model, DeformableGCN):
        raise ValueError(f"Analysis needs the deformable model, got {trained.model.kind}.")
    deformed = predict(trained, use_deformation=True)
    plain = predict(trained, use_deformation=False)
    labels = dataset.labels

    levels = [str(diag.level) for diag in deformed.diagnostics]
    h_deform = np.stack([homophilic_weights(d, labels) for d in deformed.diagnostics], axis=1)
    h_plain = np.stack([homophilic_weights(d, labels) for d in plain.diagnostics], axis=1)

    targets = range(dataset.num_nodes) if target_nodes is None else target_nodes
    receptive_fields = {}
    for v in targets:
        receptive_fields[int(v)] = sorted_intensities(receptive_field(int(v), deformed))

    attention = attention_summary(deformed)
    logger.info(
        "Averaged attention scores: "
        + ", ".join(f"{level}={score:.4f}" for level, score in zip(levels, attention))
    )
    return AnalysisReport(
        levels=levels,
        attention=attention,
        h_weight_no_deform=h_plain,
        h_weight_deform=h_deform,
        receptive_fields=receptive_fields,
    )

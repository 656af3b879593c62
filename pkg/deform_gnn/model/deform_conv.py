# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

"""
Deformable graph convolution on one neighborhood graph.

For a center v with neighbors u (v included) the layer computes

    r_uv   = [(phi_u - phi_v) / |phi_u - phi_v|, 0]   or [0, ..., 0, 1] if phi_u == phi_v
    a_uvk  = softmax_u( r_uv . (kernel_k + delta_k(e_v)) )
    y_v    = sum_k W_k sum_u a_uvk h_u

with delta produced by a one-hidden-layer perceptron of the center's smoothed
features.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np

from ..autodiff import ShapeError, Tensor
from ..autodiff import ops as F
from .init import linear_weight, unit_vectors
from .positional import NeighborhoodGraph


logger = logging.getLogger(__name__)


# positions closer than this are treated as identical
POSITION_EPS = 1e-12

KERNEL_VECTORS = "kernel_vectors"
WEIGHT = "weight"
DEFORM_HIDDEN_WEIGHT = "deform_hidden.weight"
DEFORM_HIDDEN_BIAS = "deform_hidden.bias"
DEFORM_OUT_WEIGHT = "deform_out.weight"
DEFORM_OUT_BIAS = "deform_out.bias"
DEFORMATION_PARAMS = (
    DEFORM_HIDDEN_WEIGHT,
    DEFORM_HIDDEN_BIAS,
    DEFORM_OUT_WEIGHT,
    DEFORM_OUT_BIAS,
)


@dataclass
class KernelParams:
    kernel_vectors: Tensor  # K x (d_phi + 1)
    weight: Tensor  # K x d_y x d_h
    deform_hidden_weight: Optional[Tensor] = None  # d_def x d_x
    deform_hidden_bias: Optional[Tensor] = None  # d_def
    deform_out_weight: Optional[Tensor] = None  # K (d_phi + 1) x d_def
    deform_out_bias: Optional[Tensor] = None  # K (d_phi + 1)

    @property
    def num_kernels(self) -> int:
        return int(self.kernel_vectors.shape[0])

    @property
    def relation_dim(self) -> int:
        return int(self.kernel_vectors.shape[1])

    @property
    def has_deformation(self) -> bool:
        return self.deform_hidden_weight is not None

    @classmethod
    def from_params(cls, params: Mapping[str, Tensor], prefix: str = "") -> "KernelParams":
        def _get(name):
            value = params.get(prefix + name)
            if value is None or isinstance(value, Tensor):
                return value
            return Tensor(value)

        kernel_params = cls(
            kernel_vectors=_get(KERNEL_VECTORS),
            weight=_get(WEIGHT),
            deform_hidden_weight=_get(DEFORM_HIDDEN_WEIGHT),
            deform_hidden_bias=_get(DEFORM_HIDDEN_BIAS),
            deform_out_weight=_get(DEFORM_OUT_WEIGHT),
            deform_out_bias=_get(DEFORM_OUT_BIAS),
        )
        if kernel_params.kernel_vectors is None or kernel_params.weight is None:
            raise KeyError(f"Missing kernel parameters under prefix {prefix!r}.")
        kernel_params.check()
        return kernel_params

    def check(self) -> None:
        K, d1 = self.kernel_vectors.shape
        if self.weight.ndim != 3 or self.weight.shape[0] != K:
            raise ShapeError(f"Kernel weight shape {self.weight.shape} does not match K={K}.")
        if self.has_deformation and self.deform_out_weight.shape[0] != K * d1:
            raise ShapeError(
                f"Deformation output size {self.deform_out_weight.shape[0]} != K*(d_phi+1)={K * d1}."
            )


def init_kernel_params(
    rng: np.random.Generator,
    num_kernels: int,
    positional_dim: int,
    in_dim: int,
    hidden_dim: int,
    out_dim: int,
    deform_hidden_dim: Optional[int] = None,
    deformation: bool = True,
) -> Dict[str, np.ndarray]:
    """Fresh parameters of one convolution, keyed by parameter suffix."""
    if num_kernels < 1:
        raise ValueError(f"Need at least one kernel, got K={num_kernels}.")
    d1 = positional_dim + 1
    params = {
        KERNEL_VECTORS: unit_vectors(rng, num_kernels, d1),
        WEIGHT: np.stack(
            [linear_weight(rng, out_dim, hidden_dim) for _ in range(num_kernels)]
        ),
    }
    if deformation:
        d_def = deform_hidden_dim or hidden_dim
        params[DEFORM_HIDDEN_WEIGHT] = linear_weight(rng, d_def, in_dim)
        params[DEFORM_HIDDEN_BIAS] = np.zeros(d_def)
        params[DEFORM_OUT_WEIGHT] = linear_weight(rng, num_kernels * d1, d_def)
        params[DEFORM_OUT_BIAS] = np.zeros(num_kernels * d1)
    return params


@dataclass
class ConvDiagnostics:
    """Kernel weights a_hat[i, k] of every graph entry i = (centers[i], neighbors[i])."""

    level: Union[int, str]
    indptr: np.ndarray
    centers: np.ndarray
    neighbors: np.ndarray
    weights: np.ndarray

    @property
    def num_nodes(self) -> int:
        return int(self.indptr.shape[0] - 1)

    @property
    def num_kernels(self) -> int:
        return int(self.weights.shape[1])

    def for_node(self, v: int) -> Tuple[np.ndarray, np.ndarray]:
        """(neighbors of v, their len(neighbors) x K weights)"""
        if not 0 <= v < self.num_nodes:
            raise ValueError(f"Node {v} is outside [0, {self.num_nodes}).")
        sl = slice(self.indptr[v], self.indptr[v + 1])
        return self.neighbors[sl], self.weights[sl]

    def weight_sums(self) -> np.ndarray:
        """n x K sums of a_hat over each neighborhood; all ones."""
        sums = np.zeros((self.num_nodes, self.num_kernels))
        np.add.at(sums, self.centers, self.weights)
        return sums


@dataclass
class ConvOutput:
    y: Tensor
    diagnostics: ConvDiagnostics
    # n x K (d_phi + 1), None when the deformation is switched off
    deformations: Optional[Tensor] = None


def _relations_from_differences(diff: Tensor) -> Tensor:
    norms = np.sqrt(np.sum(diff.values * diff.values, axis=1))
    moved = (norms > POSITION_EPS)[:, None].astype(np.float64)
    unit = F.mul(F.row_l2_normalize(diff, eps=POSITION_EPS), Tensor(moved))
    return F.concat([unit, Tensor(1.0 - moved)])


def relation_vector(phi_u, phi_v) -> Tensor:
    phi_u = phi_u if isinstance(phi_u, Tensor) else Tensor(phi_u)
    phi_v = phi_v if isinstance(phi_v, Tensor) else Tensor(phi_v)
    if phi_u.ndim != 1 or phi_u.shape != phi_v.shape:
        raise ShapeError(f"Positions {phi_u.shape} and {phi_v.shape} differ.")
    d = phi_u.shape[0]
    diff = F.sub(F.reshape(phi_u, (1, d)), F.reshape(phi_v, (1, d)))
    return F.reshape(_relations_from_differences(diff), (d + 1,))


def relation_vectors(phi: Tensor, centers: np.ndarray, neighbors: np.ndarray) -> Tensor:
    """Relation vector of every (center, neighbor) entry, m x (d_phi + 1)."""
    diff = F.sub(F.gather_rows(phi, neighbors), F.gather_rows(phi, centers))
    return _relations_from_differences(diff)


def deformation(e, params: KernelParams) -> Tensor:
    """
    Deformation vectors delta_k(e_v). For an n x d_x input the result is
    n x K (d_phi + 1); for a single d_x vector it is K x (d_phi + 1).
    """
    if not params.has_deformation:
        raise ValueError("These kernel parameters have no deformation network.")
    e = e if isinstance(e, Tensor) else Tensor(e)
    single = e.ndim == 1
    x = F.reshape(e, (1, e.shape[0])) if single else e
    if x.shape[1] != params.deform_hidden_weight.shape[1]:
        raise ShapeError(
            f"Deformation input has {x.shape[1]} features, expected"
            f" {params.deform_hidden_weight.shape[1]}."
        )
    hidden = F.relu(
        F.add(F.matmul(x, F.transpose(params.deform_hidden_weight)), params.deform_hidden_bias)
    )
    out = F.add(F.matmul(hidden, F.transpose(params.deform_out_weight)), params.deform_out_bias)
    if single:
        return F.reshape(out, (params.num_kernels, params.relation_dim))
    return out


def _block_sum_matrix(num_kernels: int, block: int) -> np.ndarray:
    # (K * block) x K, column k sums the k-th block of a row
    return np.kron(np.eye(num_kernels), np.ones((block, 1)))


def kernel_weights(
    relations: Tensor,
    params: KernelParams,
    deformations: Optional[Tensor] = None,
    centers: Optional[np.ndarray] = None,
    num_centers: Optional[int] = None,
) -> Tensor:
    """
    a_hat of every entry and kernel (m x K), normalized with a softmax over the
    entries sharing a center. Without `centers` all rows belong to one center
    and `deformations` may be given as K x (d_phi + 1).
    """
    m = relations.shape[0]
    K, d1 = params.num_kernels, params.relation_dim
    if m == 0:
        raise ValueError("Kernel weights need a non-empty neighborhood.")
    if relations.shape[1] != d1:
        raise ShapeError(f"Relations have dimension {relations.shape[1]}, kernels {d1}.")
    if centers is None:
        centers, num_centers = np.zeros(m, dtype=np.int64), 1
        if deformations is not None:
            deformations = F.reshape(deformations, (1, K * d1))
    elif num_centers is None:
        num_centers = int(centers.max()) + 1
    empty = np.flatnonzero(np.bincount(centers, minlength=num_centers) == 0)
    if empty.size > 0:
        raise ValueError(f"Node {int(empty[0])} has an empty neighborhood.")

    shifted = F.reshape(params.kernel_vectors, (1, K * d1))
    if deformations is not None:
        shifted = F.add(F.gather_rows(deformations, centers), shifted)
    tiled = F.concat([relations] * K) if K > 1 else relations
    logits = F.matmul(F.mul(tiled, shifted), Tensor(_block_sum_matrix(K, d1)))
    return F.softmax(logits, groups=centers, num_groups=num_centers)


def deform_gconv(
    graph: NeighborhoodGraph,
    h: Tensor,
    phi: Tensor,
    e,
    params: KernelParams,
    use_deformation: bool = True,
) -> ConvOutput:
    """
    Y = sum_k (A_k H) W_k^T with A_k[v, u] = a_hat(u, v, k), computed through one
    scatter over the graph entries and one stacked matmul.
    """
    n = graph.num_nodes
    for what, t in (("hidden features", h), ("positions", phi)):
        if t.ndim != 2 or t.shape[0] != n:
            raise ShapeError(f"Convolution {what} have shape {t.shape}, graph has {n} nodes.")
    if np.any(np.diff(graph.indptr) == 0):
        raise ValueError(f"Graph level {graph.level} has an empty neighborhood.")
    K = params.num_kernels
    d_h = h.shape[1]
    if params.weight.shape[2] != d_h:
        raise ShapeError(f"Kernel weight expects {params.weight.shape[2]} inputs, got {d_h}.")
    d_y = params.weight.shape[1]

    centers, neighbors = graph.centers(), graph.indices
    relations = relation_vectors(phi, centers, neighbors)
    deformations = None
    if use_deformation and params.has_deformation:
        deformations = deformation(e, params)
    a_hat = kernel_weights(relations, params, deformations, centers, n)

    spread = Tensor(np.kron(np.eye(K), np.ones((1, d_h))))
    a_rep = F.matmul(a_hat, spread) if K > 1 else a_hat
    h_neighbors = F.gather_rows(h, neighbors)
    h_rep = F.concat([h_neighbors] * K) if K > 1 else h_neighbors
    aggregated = F.scatter_add_rows(F.mul(a_rep, h_rep), centers, n)
    stacked = F.reshape(F.transpose(params.weight, (0, 2, 1)), (K * d_h, d_y))
    y = F.matmul(aggregated, stacked)

    diagnostics = ConvDiagnostics(
        level=graph.level,
        indptr=np.asarray(graph.indptr),
        centers=centers,
        neighbors=np.asarray(neighbors),
        weights=a_hat.values.copy(),
    )
    return ConvOutput(y=y, diagnostics=diagnostics, deformations=deformations)

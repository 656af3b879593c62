# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import hashlib
import logging
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.spatial.distance import cdist

from ..autodiff import Tensor
from ..autodiff import ops as F
from ..dataset.data_types import Dataset
from ..dataset.utils import adjacency_with_self_loops


logger = logging.getLogger(__name__)


INPUT_LEVEL = "input"

# query rows per block of the brute-force distance matrix
KNN_CHUNK_SIZE = 1024

# hex characters of the feature digest in cache file names
CACHE_DIGEST_LENGTH = 16


@dataclass
class SmoothedFeatures:
    # levels[l] is E^(l), n x d_x; levels[0] is the raw feature matrix
    levels: List[np.ndarray]

    @property
    def num_smoothing(self) -> int:
        return len(self.levels) - 1

    def __getitem__(self, level: int) -> np.ndarray:
        return self.levels[level]

    def __len__(self) -> int:
        return len(self.levels)


@dataclass
class PositionalEmbedding:
    projections: List[Tensor]
    coordinates: List[Tensor]


@dataclass(frozen=True)
class NeighborhoodGraph:
    """
    Neighbor lists in CSR layout: the list of node v is
    indices[indptr[v]:indptr[v + 1]], starting with v itself.
    """

    level: Union[int, str]
    indptr: np.ndarray
    indices: np.ndarray
    built_from: str

    def __post_init__(self):
        for arr in (self.indptr, self.indices):
            arr.setflags(write=False)

    @property
    def num_nodes(self) -> int:
        return int(self.indptr.shape[0] - 1)

    @property
    def num_entries(self) -> int:
        return int(self.indices.shape[0])

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def centers(self) -> np.ndarray:
        """Center node of every entry of `indices`."""
        return np.repeat(np.arange(self.num_nodes), np.diff(self.indptr))

    def same_as(self, other: "NeighborhoodGraph") -> bool:
        return (
            self.level == other.level
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )


def _graph_from_lists(
    lists: Sequence[np.ndarray], level: Union[int, str], built_from: str
) -> NeighborhoodGraph:
    sizes = np.asarray([len(x) for x in lists], dtype=np.int64)
    indptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    indices = (
        np.concatenate(lists).astype(np.int64) if lists else np.zeros(0, np.int64)
    )
    return NeighborhoodGraph(
        level=level, indptr=indptr, indices=indices, built_from=built_from
    )


def smoothing_operator(dataset: Dataset) -> sparse.csr_matrix:
    adjacency = adjacency_with_self_loops(dataset)
    degree = np.asarray(adjacency.sum(axis=1)).reshape(-1)
    return sparse.diags(1.0 / degree) @ adjacency


def smooth_features(dataset: Dataset, num_smoothing: int) -> SmoothedFeatures:
    """E^(l) = D~^-1 A~ E^(l-1) with self-loops, E^(0) = X."""
    if num_smoothing < 0:
        raise ValueError(f"Number of smoothing steps must be >= 0, got {num_smoothing}.")
    operator = smoothing_operator(dataset)
    levels = [np.array(dataset.features, dtype=np.float64)]
    for _ in range(num_smoothing):
        levels.append(np.asarray(operator @ levels[-1]))
    return SmoothedFeatures(levels=levels)


def positional_embed(
    smoothed: SmoothedFeatures,
    projections: Sequence[Union[Tensor, np.ndarray]],
) -> PositionalEmbedding:
    """phi^(l) = E^(l) W_phi^(l)^T for every level l."""
    if len(projections) != len(smoothed):
        raise ValueError(
            f"Got {len(projections)} projections for {len(smoothed)} smoothing levels."
        )
    projections = [p if isinstance(p, Tensor) else Tensor(p) for p in projections]
    coordinates = []
    for level, (features, w) in enumerate(zip(smoothed.levels, projections)):
        if w.ndim != 2 or w.shape[1] != features.shape[1]:
            raise ValueError(
                f"Projection of level {level} has shape {w.shape}, expected"
                f" (d_phi, {features.shape[1]})."
            )
        coordinates.append(F.matmul(Tensor(features), F.transpose(w)))
    return PositionalEmbedding(projections=list(projections), coordinates=coordinates)


def build_knn_graph(
    features: np.ndarray,
    k: int,
    level: Union[int, str] = 0,
    built_from: str = "features",
    chunk_size: int = KNN_CHUNK_SIZE,
) -> NeighborhoodGraph:
    """
    Exact kNN graph by brute force. Every list is the node itself followed by
    its k nearest other nodes in ascending l2 distance, ties going to the
    lower node index.
    """
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}.")
    if k >= n:
        raise ValueError(f"k={k} must be smaller than the number of nodes {n}.")

    lists = np.empty((n, k + 1), dtype=np.int64)
    lists[:, 0] = np.arange(n)
    for start in range(0, n, chunk_size):
        stop = min(start + chunk_size, n)
        dist = cdist(features[start:stop], features, metric="sqeuclidean")
        dist[np.arange(stop - start), np.arange(start, stop)] = np.inf
        # stable sort keeps ascending column order among equal distances
        lists[start:stop, 1:] = np.argsort(dist, axis=1, kind="stable")[:, :k]
    logger.debug(f"Built kNN graph level={level} k={k} on {n} nodes from {built_from}.")
    return NeighborhoodGraph(
        level=level,
        indptr=np.arange(0, n * (k + 1) + 1, k + 1, dtype=np.int64),
        indices=lists.reshape(-1),
        built_from=built_from,
    )


def input_graph(dataset: Dataset) -> NeighborhoodGraph:
    """The input graph with self-loops: each list is v, then its neighbors by index."""
    adjacency = adjacency_with_self_loops(dataset)
    adjacency.sort_indices()
    lists = []
    for v in range(dataset.num_nodes):
        row = adjacency.indices[adjacency.indptr[v] : adjacency.indptr[v + 1]]
        lists.append(np.concatenate([[v], row[row != v]]))
    return _graph_from_lists(lists, INPUT_LEVEL, built_from=f"edges:{dataset.name}")


def feature_digest(features: np.ndarray) -> str:
    """Short sha256 of the shape and float64 bytes of a feature table."""
    features = np.ascontiguousarray(features, dtype=np.float64)
    sha256_hash = hashlib.sha256()
    sha256_hash.update(str(features.shape).encode("utf8"))
    sha256_hash.update(features.tobytes())
    return sha256_hash.hexdigest()[:CACHE_DIGEST_LENGTH]


def graph_cache_path(
    cache_dir: str,
    dataset: Dataset,
    features: np.ndarray,
    level: Union[int, str],
    k: int,
) -> str:
    """Cache file of the kNN graph over `features`; keyed on their content."""
    return os.path.join(
        cache_dir, f"{dataset.name}_level{level}_k{k}_{feature_digest(features)}.txt"
    )


def build_all_graphs(
    dataset: Dataset,
    smoothed: SmoothedFeatures,
    k: int,
    cache_dir: Optional[str] = None,
) -> List[NeighborhoodGraph]:
    """
    kNN graphs G^(0..L) on the smoothed features, followed by the input graph.
    With `cache_dir`, kNN graphs are read from / written to cache files.
    """
    graphs = []
    for level, features in enumerate(smoothed.levels):
        built_from = f"smoothed:{level}"
        path = (
            None
            if cache_dir is None
            else graph_cache_path(cache_dir, dataset, features, level, k)
        )
        if path is not None and os.path.isfile(path):
            graph = read_graph(path, level=level, built_from=built_from)
            if graph.num_nodes != dataset.num_nodes or graph.num_entries != graph.num_nodes * (k + 1):
                raise ValueError(f"Cached graph {path} does not match {dataset.name} with k={k}.")
            logger.info(f"Loaded cached graph {path}.")
        else:
            graph = build_knn_graph(features, k, level=level, built_from=built_from)
            if path is not None:
                write_graph(graph, path)
        graphs.append(graph)
    graphs.append(input_graph(dataset))
    return graphs


def write_graph(graph: NeighborhoodGraph, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        for v in range(graph.num_nodes):
            f.write(f"{v}\t{','.join(str(int(u)) for u in graph.neighbors(v))}\n")


def read_graph(
    path: str, level: Union[int, str] = 0, built_from: str = "cache"
) -> NeighborhoodGraph:
    lists = {}
    with open(path, "r") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\r\n").split("\t")
            try:
                v = int(fields[0])
                lists[v] = np.asarray([int(u) for u in fields[1].split(",")], dtype=np.int64)
            except (ValueError, IndexError):
                raise ValueError(f"{path}:{line_no}: malformed neighbor list.") from None
            if lists[v][0] != v:
                raise ValueError(f"{path}:{line_no}: list of node {v} must start with {v}.")
    n = len(lists)
    if sorted(lists) != list(range(n)):
        raise ValueError(f"{path}: node ids must be exactly 0..{n - 1}.")
    return _graph_from_lists([lists[v] for v in range(n)], level, built_from)

# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import json
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from .data_types import DataSplit, Dataset, DatasetStats, _asdict_rec


logger = logging.getLogger(__name__)


DEFAULT_SPLIT_FRACTIONS = (0.48, 0.32, 0.20)

# (num_nodes, num_edges, num_features, num_classes, homophily_ratio)
KNOWN_BENCHMARK_STATS: Dict[str, Tuple[int, int, int, int, float]] = {
    "texas": (183, 279, 1703, 5, 0.11),
    "wisconsin": (251, 450, 1703, 5, 0.21),
    "actor": (7600, 26659, 932, 5, 0.22),
    "squirrel": (5201, 198353, 2089, 5, 0.22),
    "chameleon": (2277, 31371, 2325, 5, 0.23),
    "cornell": (183, 277, 1703, 5, 0.30),
    "citeseer": (3327, 4552, 3703, 6, 0.74),
    "pubmed": (19717, 44324, 500, 3, 0.80),
    "cora": (2708, 5278, 1433, 7, 0.81),
}


def canonical_edges(pairs: np.ndarray, num_nodes: int) -> np.ndarray:
    """
    Symmetrize, deduplicate and sort an edge list. Self-loops are dropped.

    Returns:
        edges: |E| x 2 int64 array of rows (u, v) with u < v, sorted.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if pairs.size > 0 and (pairs.min() < 0 or pairs.max() >= num_nodes):
        raise ValueError(f"Edge endpoints must lie in [0, {num_nodes}).")
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    pairs = np.sort(pairs, axis=1)
    if pairs.shape[0] == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(pairs, axis=0)


def adjacency_with_self_loops(dataset: Dataset) -> sparse.csr_matrix:
    """Binary symmetric adjacency of the neighborhoods including v itself."""
    n = dataset.num_nodes
    u, v = dataset.edges[:, 0], dataset.edges[:, 1]
    rows = np.concatenate([u, v, np.arange(n)])
    cols = np.concatenate([v, u, np.arange(n)])
    return sparse.csr_matrix(
        (np.ones(rows.shape[0], dtype=np.float64), (rows, cols)), shape=(n, n)
    )


def homophily_ratio(dataset: Dataset) -> float:
    """Fraction of undirected edges whose endpoints share a label."""
    if dataset.num_edges == 0:
        raise ValueError(
            f"Homophily ratio of {dataset.name} is undefined: the graph has no edges."
        )
    u, v = dataset.edges[:, 0], dataset.edges[:, 1]
    return float(np.mean(dataset.labels[u] == dataset.labels[v]))


def dataset_stats(dataset: Dataset) -> DatasetStats:
    n = dataset.num_nodes
    return DatasetStats(
        num_classes=dataset.num_classes,
        num_nodes=n,
        num_edges=dataset.num_edges,
        num_features=dataset.num_features,
        average_degree=2.0 * dataset.num_edges / n if n > 0 else 0.0,
        homophily_ratio=homophily_ratio(dataset) if dataset.num_edges > 0 else None,
    )


def dump_stats(stats: DatasetStats, path: str) -> None:
    with open(path, "w") as f:
        json.dump(_asdict_rec(stats), f, indent=2, sort_keys=True)


def check_against_known_stats(dataset: Dataset) -> bool:
    """
    Log a warning when a dataset carrying a known benchmark name does not match
    the published counts. Edge counts are compared up to a factor of 2 since
    the published numbers mix directed and undirected counting.
    """
    known = KNOWN_BENCHMARK_STATS.get(dataset.name.lower())
    if known is None:
        return True
    n, num_edges, d_x, num_classes, _ = known
    ok = (
        dataset.num_nodes == n
        and dataset.num_features == d_x
        and dataset.num_classes == num_classes
        and num_edges / 2.0 - 1 <= dataset.num_edges <= 2.0 * num_edges + 1
    )
    if not ok:
        logger.warning(
            f"{dataset.name}: n={dataset.num_nodes}, |E|={dataset.num_edges},"
            f" d_x={dataset.num_features}, C={dataset.num_classes} differ from the"
            f" published n={n}, |E|={num_edges}, d_x={d_x}, C={num_classes}."
        )
    return ok


def check_split(split: DataSplit, num_nodes: int, where: str = "split") -> None:
    masks = [split.train_mask, split.val_mask, split.test_mask]
    for mask in masks:
        if mask.shape != (num_nodes,):
            raise ValueError(
                f"{where}: mask length {mask.shape[0]} != number of nodes {num_nodes}."
            )
    counts = np.sum(np.stack(masks).astype(np.int64), axis=0)
    if np.any(counts != 1):
        bad = int(np.flatnonzero(counts != 1)[0])
        raise ValueError(
            f"{where}: node {bad} must belong to exactly one of train/val/test."
        )


def check_dataset(dataset: Dataset) -> None:
    n = dataset.num_nodes
    if dataset.features.ndim != 2:
        raise ValueError(f"{dataset.name}: features must be an n x d_x matrix.")
    if dataset.labels.shape != (n,):
        raise ValueError(f"{dataset.name}: expected {n} labels, got {dataset.labels.shape}.")
    if n > 0 and (dataset.labels.min() < 0 or dataset.labels.max() >= dataset.num_classes):
        raise ValueError(
            f"{dataset.name}: labels must lie in [0, {dataset.num_classes})."
        )
    if not np.all(np.isfinite(dataset.features)):
        raise ValueError(f"{dataset.name}: features contain non-finite values.")
    if not np.array_equal(canonical_edges(dataset.edges, n), dataset.edges):
        raise ValueError(
            f"{dataset.name}: edges must be deduplicated (u, v) rows with u < v, sorted."
        )
    for i, split in enumerate(dataset.splits):
        check_split(split, n, where=f"{dataset.name} split {i}")


def make_splits(
    dataset: Dataset,
    fractions: Sequence[float] = DEFAULT_SPLIT_FRACTIONS,
    num_splits: int = 10,
    seed: int = 0,
) -> List[DataSplit]:
    """
    Per-class stratified random splits. Within each class of size c the first
    floor(f_train * c) shuffled nodes go to train, the next floor(f_val * c)
    to val and the remainder to test.
    """
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"Split fractions {fractions} must be three values summing to 1.")
    if any(f < 0 for f in fractions):
        raise ValueError(f"Split fractions {fractions} must be non-negative.")
    f_train, f_val, _ = fractions
    n = dataset.num_nodes
    class_members = [np.flatnonzero(dataset.labels == c) for c in range(dataset.num_classes)]
    for c, members in enumerate(class_members):
        if len(members) > 0 and int(np.floor(f_train * len(members) + 1e-9)) == 0:
            raise ValueError(
                f"Class {c} has only {len(members)} nodes, too few for a"
                f" {f_train:.2f} training fraction."
            )

    rng = np.random.default_rng(seed)
    splits = []
    for _ in range(num_splits):
        part = np.full(n, 2, dtype=np.int64)
        for members in class_members:
            shuffled = rng.permutation(members)
            n_train = int(np.floor(f_train * len(members) + 1e-9))
            n_val = int(np.floor(f_val * len(members) + 1e-9))
            part[shuffled[:n_train]] = 0
            part[shuffled[n_train : n_train + n_val]] = 1
        splits.append(DataSplit(train_mask=part == 0, val_mask=part == 1, test_mask=part == 2))
    return splits


def with_splits(dataset: Dataset, splits: List[DataSplit]) -> Dataset:
    return Dataset(
        features=dataset.features,
        edges=dataset.edges,
        labels=dataset.labels,
        num_classes=dataset.num_classes,
        splits=list(splits),
        name=dataset.name,
    )


def summarize_dataset(dataset: Dataset, splits: Optional[List[DataSplit]] = None) -> str:
    stats = dataset_stats(dataset)
    h = "n/a" if stats.homophily_ratio is None else f"{stats.homophily_ratio:.3f}"
    return (
        f"{dataset.name}: n={stats.num_nodes} |E|={stats.num_edges}"
        f" d_x={stats.num_features} C={stats.num_classes}"
        f" deg={stats.average_degree:.2f} h={h}"
        f" splits={len(splits if splits is not None else dataset.splits)}"
    )

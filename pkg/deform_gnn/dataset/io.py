# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import glob
import json
import logging
import os
import re
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .data_types import DataSplit, Dataset, SplitPart
from .utils import (
    canonical_edges,
    check_against_known_stats,
    check_dataset,
    dataset_stats,
    dump_stats,
    make_splits,
    summarize_dataset,
)


logger = logging.getLogger(__name__)


NODE_FILE = "nodes.txt"
EDGE_FILE = "edges.txt"
META_FILE = "meta.json"
STATS_FILE = "stats.json"
SPLIT_FILE_PATTERN = "split_{}.txt"

GEOM_GCN_NODE_FILE = "out1_node_feature_label.txt"
GEOM_GCN_EDGE_FILE = "out1_graph_edges.txt"

# raw folders whose node file lists nonzero feature indices
MULTI_HOT_DATASETS = ("film", "actor")
ACTOR_FEATURE_DIM = 932


class DatasetFormatError(ValueError):
    pass


def _check_file(path: str, what: str) -> None:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{what} {path} does not exist.")


def _data_lines(path: str, skip_header: bool = False):
    with open(path, "r") as f:
        for line_no, line in enumerate(f, start=1):
            if skip_header and line_no == 1:
                continue
            line = line.rstrip("\r\n")
            if line.strip():
                yield line_no, line


def _multi_hot(indices: List[int], dim: int) -> List[float]:
    row = [0.0] * dim
    for i in indices:
        if not 0 <= i < dim:
            raise ValueError(f"feature index {i} outside [0, {dim})")
        row[i] = 1.0
    return row


def read_node_file(
    path: str, skip_header: bool = False, multi_hot_dim: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Parses `node_id<TAB>f1,...,fd<TAB>label` lines. With `multi_hot_dim` the
    middle field lists the indices of the nonzero features instead, as in
    the raw actor co-occurrence benchmark.

    Returns:
        features: n x d float64 matrix ordered by node id.
        labels: n int64 labels.
    """
    _check_file(path, "Node file")
    ids, rows, labels = [], [], []
    for line_no, line in _data_lines(path, skip_header=skip_header):
        fields = line.split("\t")
        if len(fields) != 3:
            raise DatasetFormatError(
                f"{path}:{line_no}: expected 3 tab-separated fields, got {len(fields)}."
            )
        try:
            node_id = int(fields[0])
            if multi_hot_dim is None:
                row = [float(v) for v in fields[1].split(",")]
            else:
                row = _multi_hot([int(v) for v in fields[1].split(",") if v.strip()], multi_hot_dim)
            label = int(fields[2])
        except ValueError as exc:
            raise DatasetFormatError(f"{path}:{line_no}: malformed line {line!r} ({exc}).") from None
        if label < 0:
            raise DatasetFormatError(f"{path}:{line_no}: negative label {label}.")
        if rows and len(row) != len(rows[0]):
            raise DatasetFormatError(
                f"{path}:{line_no}: {len(row)} features, expected {len(rows[0])}."
            )
        ids.append(node_id)
        rows.append(row)
        labels.append(label)

    if not ids:
        raise DatasetFormatError(f"{path}: no nodes.")
    ids = np.asarray(ids, dtype=np.int64)
    if not np.array_equal(np.sort(ids), np.arange(len(ids))):
        raise DatasetFormatError(f"{path}: node ids must be exactly 0..{len(ids) - 1}.")
    order = np.argsort(ids)
    features = np.asarray(rows, dtype=np.float64)[order]
    return features, np.asarray(labels, dtype=np.int64)[order]


def read_edge_file(path: str, num_nodes: int, skip_header: bool = False) -> np.ndarray:
    _check_file(path, "Edge file")
    pairs = []
    for line_no, line in _data_lines(path, skip_header=skip_header):
        fields = line.split()
        if len(fields) != 2:
            raise DatasetFormatError(
                f"{path}:{line_no}: expected 2 fields `u<TAB>v`, got {len(fields)}."
            )
        try:
            u, v = int(fields[0]), int(fields[1])
        except ValueError:
            raise DatasetFormatError(f"{path}:{line_no}: malformed line {line!r}.") from None
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise DatasetFormatError(
                f"{path}:{line_no}: edge ({u}, {v}) references a node outside [0, {num_nodes})."
            )
        pairs.append((u, v))
    n_loops = sum(1 for u, v in pairs if u == v)
    if n_loops > 0:
        logger.info(f"{path}: dropping {n_loops} self-loops.")
    return canonical_edges(np.asarray(pairs, dtype=np.int64), num_nodes)


def read_split_file(path: str, num_nodes: int) -> DataSplit:
    _check_file(path, "Split file")
    part = np.full(num_nodes, -1, dtype=np.int64)
    codes = {SplitPart.TRAIN.value: 0, SplitPart.VAL.value: 1, SplitPart.TEST.value: 2}
    for line_no, line in _data_lines(path):
        fields = line.split("\t")
        if len(fields) != 2 or fields[1].strip() not in codes:
            raise DatasetFormatError(
                f"{path}:{line_no}: expected `node_id<TAB>train|val|test`, got {line!r}."
            )
        try:
            node_id = int(fields[0])
        except ValueError:
            raise DatasetFormatError(f"{path}:{line_no}: malformed node id.") from None
        if not 0 <= node_id < num_nodes:
            raise DatasetFormatError(
                f"{path}:{line_no}: node {node_id} outside [0, {num_nodes})."
            )
        if part[node_id] != -1:
            raise DatasetFormatError(f"{path}:{line_no}: node {node_id} listed twice.")
        part[node_id] = codes[fields[1].strip()]
    n_listed = int(np.sum(part >= 0))
    if n_listed != num_nodes:
        raise DatasetFormatError(
            f"{path}: mask length {n_listed} != number of nodes {num_nodes}."
        )
    return DataSplit(train_mask=part == 0, val_mask=part == 1, test_mask=part == 2)


def load_dataset(
    node_file: str,
    edge_file: str,
    split_files: Sequence[str] = (),
    num_classes: Optional[int] = None,
    name: Optional[str] = None,
) -> Dataset:
    """
    Load and validate a dataset stored in the plain-text node / edge / split
    formats. Edges are symmetrized and deduplicated.
    """
    for path, what in [(node_file, "Node file"), (edge_file, "Edge file")] + [
        (p, "Split file") for p in split_files
    ]:
        _check_file(path, what)
    features, labels = read_node_file(node_file)
    n = features.shape[0]
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    elif labels.max() >= num_classes:
        bad = int(np.flatnonzero(labels >= num_classes)[0])
        raise DatasetFormatError(
            f"{node_file}: label {int(labels[bad])} of node {bad} is out of range"
            f" [0, {num_classes})."
        )
    dataset = Dataset(
        features=features,
        edges=read_edge_file(edge_file, n),
        labels=labels,
        num_classes=num_classes,
        splits=[read_split_file(p, n) for p in split_files],
        name=name or os.path.basename(os.path.dirname(os.path.abspath(node_file))),
    )
    check_dataset(dataset)
    check_against_known_stats(dataset)
    logger.info(f"Loaded {summarize_dataset(dataset)}")
    return dataset


def _split_index(path: str) -> int:
    match = re.search(r"(\d+)\D*$", os.path.basename(path))
    return int(match.group(1)) if match else -1


def list_split_files(folder: str) -> List[str]:
    files = glob.glob(os.path.join(folder, SPLIT_FILE_PATTERN.format("*")))
    return sorted(files, key=_split_index)


def load_dataset_folder(folder: str) -> Dataset:
    """Load a dataset folder written by `save_dataset`."""
    if not os.path.isdir(folder):
        raise FileNotFoundError(f"Dataset folder {folder} does not exist.")
    num_classes, name = None, os.path.basename(os.path.normpath(folder))
    meta_path = os.path.join(folder, META_FILE)
    if os.path.isfile(meta_path):
        with open(meta_path, "r") as f:
            meta = json.load(f)
        num_classes, name = meta.get("num_classes"), meta.get("name", name)
    return load_dataset(
        os.path.join(folder, NODE_FILE),
        os.path.join(folder, EDGE_FILE),
        list_split_files(folder),
        num_classes=num_classes,
        name=name,
    )


def save_dataset(dataset: Dataset, folder: str) -> None:
    check_dataset(dataset)
    os.makedirs(folder, exist_ok=True)
    for stale in list_split_files(folder):
        os.remove(stale)
    with open(os.path.join(folder, NODE_FILE), "w") as f:
        for v in range(dataset.num_nodes):
            row = ",".join(format(x, ".17g") for x in dataset.features[v])
            f.write(f"{v}\t{row}\t{int(dataset.labels[v])}\n")
    with open(os.path.join(folder, EDGE_FILE), "w") as f:
        for u, v in dataset.edges:
            f.write(f"{int(u)}\t{int(v)}\n")
    for i, split in enumerate(dataset.splits):
        with open(os.path.join(folder, SPLIT_FILE_PATTERN.format(i)), "w") as f:
            for v in range(dataset.num_nodes):
                part = next(p for p in SplitPart if split.mask(p)[v])
                f.write(f"{v}\t{part.value}\n")
    with open(os.path.join(folder, META_FILE), "w") as f:
        json.dump({"name": dataset.name, "num_classes": dataset.num_classes}, f, indent=2)
    dump_stats(dataset_stats(dataset), os.path.join(folder, STATS_FILE))
    logger.info(f"Saved {summarize_dataset(dataset)} to {folder}")


def import_geom_gcn(
    raw_dir: str,
    name: str,
    out_dir: str,
    num_splits: int = 10,
    seed: int = 0,
    multi_hot_dim: Optional[int] = None,
) -> Dataset:
    """
    Convert a raw WebKB / Wikipedia / citation / actor benchmark folder laid out as

        out1_node_feature_label.txt   header, then `id<TAB>f1,f2,...<TAB>label`
        out1_graph_edges.txt          header, then `u<TAB>v`
        <name>_split_*_<i>.npz        optional, with train_mask/val_mask/test_mask

    into the plain-text dataset format. Without split archives, stratified
    48/32/20 splits are generated. The actor folder (`film`) stores nonzero
    feature indices; they are expanded to `multi_hot_dim` (932 by default).
    """
    if multi_hot_dim is None and name.lower() in MULTI_HOT_DATASETS:
        multi_hot_dim = ACTOR_FEATURE_DIM
    node_path = os.path.join(raw_dir, GEOM_GCN_NODE_FILE)
    edge_path = os.path.join(raw_dir, GEOM_GCN_EDGE_FILE)
    features, labels = read_node_file(node_path, skip_header=True, multi_hot_dim=multi_hot_dim)
    n = features.shape[0]
    dataset = Dataset(
        features=features,
        edges=read_edge_file(edge_path, n, skip_header=True),
        labels=labels,
        num_classes=int(labels.max()) + 1,
        name=name,
    )

    split_paths = sorted(
        glob.glob(os.path.join(raw_dir, f"{name}_split_*.npz")), key=_split_index
    )
    if split_paths:
        for path in split_paths[:num_splits]:
            with np.load(path) as archive:
                dataset.splits.append(
                    DataSplit(
                        train_mask=archive["train_mask"].astype(bool),
                        val_mask=archive["val_mask"].astype(bool),
                        test_mask=archive["test_mask"].astype(bool),
                    )
                )
        logger.info(f"Imported {len(dataset.splits)} split archives from {raw_dir}.")
    else:
        logger.info(f"No split archives in {raw_dir}; generating {num_splits} splits.")
        dataset.splits.extend(make_splits(dataset, num_splits=num_splits, seed=seed))

    save_dataset(dataset, out_dir)
    return dataset

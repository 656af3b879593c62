# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import json
import os
import tempfile
import unittest

import numpy as np

from deform_gnn.dataset import (
    DataSplit,
    Dataset,
    DatasetFormatError,
    SplitPart,
    SyntheticSpec,
    dataset_stats,
    generate_from_spec,
    generate_synthetic,
    homophily_ratio,
    import_geom_gcn,
    load_dataset,
    load_dataset_folder,
    make_splits,
    save_dataset,
)
from deform_gnn.dataset.utils import canonical_edges, with_splits


def _write(path, lines):
    with open(path, "w") as f:
        f.write("".join(line + "\n" for line in lines))


def _path_graph(labels):
    n = len(labels)
    return Dataset(
        features=np.zeros((n, 1)),
        edges=canonical_edges(np.array([(i, i + 1) for i in range(n - 1)]), n),
        labels=np.asarray(labels, dtype=np.int64),
        num_classes=max(labels) + 1,
    )


class TestLoadDataset(unittest.TestCase):
    def test_load(self):
        with tempfile.TemporaryDirectory() as tmpd:
            nodes = os.path.join(tmpd, "nodes.txt")
            edges = os.path.join(tmpd, "edges.txt")
            split = os.path.join(tmpd, "split_0.txt")
            _write(nodes, [f"{v}\t{v}.5,{-v}\t{v % 2}" for v in range(6)])
            _write(edges, ["2\t5", "5\t2", "2\t5", "0\t1", "3\t3"])
            _write(split, [f"{v}\t{p}" for v, p in enumerate(["train"] * 3 + ["val", "test", "test"])])
            dataset = load_dataset(nodes, edges, [split])
        self.assertEqual(dataset.num_nodes, 6)
        self.assertEqual(dataset.num_features, 2)
        self.assertEqual(dataset.num_classes, 2)
        self.assertTrue(np.array_equal(dataset.edges, [[0, 1], [2, 5]]))
        self.assertTrue(np.allclose(dataset.features[3], [3.5, -3.0]))
        self.assertEqual(dataset.split(0).indices(SplitPart.TRAIN).tolist(), [0, 1, 2])

    def test_single_node(self):
        with tempfile.TemporaryDirectory() as tmpd:
            nodes = os.path.join(tmpd, "nodes.txt")
            edges = os.path.join(tmpd, "edges.txt")
            _write(nodes, ["0\t1.0,2.0\t0"])
            _write(edges, [])
            dataset = load_dataset(nodes, edges)
        self.assertEqual(dataset.num_nodes, 1)
        self.assertEqual(dataset.num_edges, 0)

    def test_errors(self):
        with tempfile.TemporaryDirectory() as tmpd:
            nodes = os.path.join(tmpd, "nodes.txt")
            edges = os.path.join(tmpd, "edges.txt")
            split = os.path.join(tmpd, "split_0.txt")
            _write(nodes, ["0\t1.0\t0", "1\t1.0\t1", "2\tx\t0"])
            _write(edges, ["0\t1"])
            with self.assertRaisesRegex(DatasetFormatError, "nodes.txt:3"):
                load_dataset(nodes, edges)

            _write(nodes, ["0\t1.0\t0", "1\t1.0\t3"])
            with self.assertRaisesRegex(DatasetFormatError, "out of range"):
                load_dataset(nodes, edges, num_classes=2)

            _write(nodes, ["0\t1.0\t0", "1\t1.0\t1"])
            _write(split, ["0\ttrain"])
            with self.assertRaisesRegex(DatasetFormatError, "mask length 1 != number of nodes 2"):
                load_dataset(nodes, edges, [split])

            with self.assertRaisesRegex(FileNotFoundError, "missing.txt"):
                load_dataset(nodes, os.path.join(tmpd, "missing.txt"))

    def test_save_load_round_trip(self):
        dataset = generate_synthetic(60, 3, 0.3, 5, 3, 1.0, seed=3)
        dataset = with_splits(dataset, make_splits(dataset, num_splits=2, seed=1))
        with tempfile.TemporaryDirectory() as tmpd:
            save_dataset(dataset, tmpd)
            loaded = load_dataset_folder(tmpd)
            with open(os.path.join(tmpd, "stats.json")) as f:
                stats = json.load(f)
        self.assertEqual(loaded.name, dataset.name)
        self.assertTrue(np.array_equal(loaded.edges, dataset.edges))
        self.assertTrue(np.array_equal(loaded.labels, dataset.labels))
        self.assertTrue(np.allclose(loaded.features, dataset.features, atol=1e-12, rtol=0))
        self.assertEqual(loaded.splits, dataset.splits)
        self.assertEqual(stats["num_nodes"], 60)
        self.assertAlmostEqual(stats["homophily_ratio"], homophily_ratio(dataset))

    def test_import_geom_gcn(self):
        rng = np.random.default_rng(0)
        n = 20
        with tempfile.TemporaryDirectory() as tmpd:
            raw, out = os.path.join(tmpd, "raw"), os.path.join(tmpd, "out")
            os.makedirs(raw)
            _write(
                os.path.join(raw, "out1_node_feature_label.txt"),
                ["node_id\tfeature\tlabel"]
                + [f"{v}\t{','.join(str(int(x)) for x in rng.integers(0, 2, 4))}\t{v % 2}" for v in range(n)],
            )
            _write(
                os.path.join(raw, "out1_graph_edges.txt"),
                ["node_id\tnode_id"] + [f"{v}\t{(v + 1) % n}" for v in range(n)],
            )
            part = np.arange(n) % 5
            np.savez(
                os.path.join(raw, "toy_split_0.6_0.2_0.npz"),
                train_mask=part < 3,
                val_mask=part == 3,
                test_mask=part == 4,
            )
            imported = import_geom_gcn(raw, "toy", out)
            loaded = load_dataset_folder(out)
        self.assertEqual(imported.num_edges, n)
        self.assertEqual(len(loaded.splits), 1)
        self.assertEqual(loaded.split(0).indices(SplitPart.VAL).tolist(), [3, 8, 13, 18])

    def test_import_multi_hot(self):
        n = 12
        rows = [f"{v}\t{v},{v + 20}\t{v % 3}" for v in range(n)]
        rows[0] = "0\t3,931\t0"
        with tempfile.TemporaryDirectory() as tmpd:
            raw, out = os.path.join(tmpd, "raw"), os.path.join(tmpd, "out")
            os.makedirs(raw)
            _write(os.path.join(raw, "out1_node_feature_label.txt"), ["node_id\tfeature\tlabel"] + rows)
            _write(
                os.path.join(raw, "out1_graph_edges.txt"),
                ["node_id\tnode_id"] + [f"{v}\t{(v + 1) % n}" for v in range(n)],
            )
            imported = import_geom_gcn(raw, "film", out, num_splits=1)
            self.assertEqual(imported.features.shape, (n, 932))
            self.assertEqual(np.flatnonzero(imported.features[0]).tolist(), [3, 931])
            self.assertEqual(np.flatnonzero(imported.features[5]).tolist(), [5, 25])
            self.assertTrue(np.all(imported.features.sum(axis=1) == 2.0))

            # other names keep dense parsing unless asked
            dense = import_geom_gcn(raw, "other", os.path.join(tmpd, "dense"), num_splits=1)
            self.assertEqual(dense.features.shape, (n, 2))
            with self.assertRaises(DatasetFormatError):
                import_geom_gcn(raw, "other", os.path.join(tmpd, "bad"), num_splits=1, multi_hot_dim=8)


class TestHomophily(unittest.TestCase):
    def test_examples(self):
        triangle = Dataset(
            features=np.zeros((3, 1)),
            edges=canonical_edges(np.array([[0, 1], [1, 2], [0, 2]]), 3),
            labels=np.zeros(3, dtype=np.int64),
            num_classes=1,
        )
        self.assertEqual(homophily_ratio(triangle), 1.0)
        self.assertEqual(homophily_ratio(_path_graph([0, 1, 0])), 0.0)

    def test_no_edges(self):
        with self.assertRaises(ValueError):
            homophily_ratio(_path_graph([0]))
        self.assertIsNone(dataset_stats(_path_graph([0])).homophily_ratio)

    def test_stats(self):
        stats = dataset_stats(_path_graph([0, 1, 1, 0]))
        self.assertEqual(stats.num_edges, 3)
        self.assertAlmostEqual(stats.average_degree, 1.5)
        self.assertAlmostEqual(stats.homophily_ratio, 1 / 3)


class TestSynthetic(unittest.TestCase):
    def test_target_homophily(self):
        dataset = generate_synthetic(200, 5, 0.1, 32, 4, 1.0, seed=7)
        self.assertLess(abs(homophily_ratio(dataset) - 0.1), 0.05)
        self.assertEqual(dataset.num_features, 32)
        self.assertEqual(np.bincount(dataset.labels).tolist(), [40] * 5)

    def test_full_homophily(self):
        dataset = generate_synthetic(100, 4, 1.0, 8, 3, 1.0, seed=0)
        self.assertEqual(homophily_ratio(dataset), 1.0)

    def test_convergence(self):
        for target in (0.2, 0.8):
            for seed in range(5):
                with self.subTest(target=target, seed=seed):
                    dataset = generate_synthetic(1000, 5, target, 4, 10, 1.0, seed=seed)
                    self.assertLess(abs(homophily_ratio(dataset) - target), 0.05)

    def test_determinism(self):
        a = generate_synthetic(80, 3, 0.4, 6, 3, 0.5, seed=11)
        b = generate_synthetic(80, 3, 0.4, 6, 3, 0.5, seed=11)
        self.assertEqual(a.features.tobytes(), b.features.tobytes())
        self.assertEqual(a.edges.tobytes(), b.edges.tobytes())
        self.assertEqual(a.labels.tobytes(), b.labels.tobytes())

    def test_errors(self):
        with self.assertRaises(ValueError):
            generate_synthetic(10, 2, 0.5, 3, 10, 1.0, seed=0)
        with self.assertRaises(ValueError):
            generate_synthetic(10, 1, 0.5, 3, 2, 1.0, seed=0)
        with self.assertRaises(ValueError):
            generate_synthetic(10, 2, 1.5, 3, 2, 1.0, seed=0)

    def test_spec_string(self):
        spec = SyntheticSpec.from_string("n=200,c=5,h=0.1,d=32,deg=4,noise=1.0,seed=7")
        self.assertEqual(spec, SyntheticSpec(200, 5, 0.1, 32, 4, 1.0, 7))
        self.assertEqual(SyntheticSpec.from_string(spec.to_string()), spec)
        self.assertEqual(
            generate_from_spec(spec).name, "synthetic_n200_c5_h0.1_d32_deg4_noise1_s7"
        )
        with self.assertRaises(ValueError):
            SyntheticSpec.from_string("bogus=1")


class TestSplits(unittest.TestCase):
    def test_fractions(self):
        dataset = Dataset(
            features=np.zeros((100, 1)),
            edges=np.zeros((0, 2), dtype=np.int64),
            labels=np.zeros(100, dtype=np.int64),
            num_classes=1,
        )
        splits = make_splits(dataset, (0.48, 0.32, 0.20), num_splits=10, seed=0)
        self.assertEqual(len(splits), 10)
        for split in splits:
            sizes = [split.mask(p).sum() for p in SplitPart]
            self.assertEqual(sizes, [48, 32, 20])
        distinct = {split.train_mask.tobytes() for split in splits}
        self.assertEqual(len(distinct), 10)
        self.assertEqual(make_splits(dataset, num_splits=10, seed=0), splits)

    def test_stratified(self):
        # class sizes 52, 52, 51, 51 keep every fraction off an integer
        dataset = generate_synthetic(206, 4, 0.5, 2, 2, 1.0, seed=0)
        for split in make_splits(dataset, num_splits=3, seed=5):
            counts = sum(split.mask(p).astype(int) for p in SplitPart)
            self.assertTrue(np.all(counts == 1))
            for c in range(4):
                size = int(np.sum(dataset.labels == c))
                n_train = int(np.sum(split.train_mask & (dataset.labels == c)))
                n_val = int(np.sum(split.val_mask & (dataset.labels == c)))
                self.assertEqual(n_train, int(np.floor(0.48 * size)))
                self.assertEqual(n_val, int(np.floor(0.32 * size)))

    def test_tiny_class(self):
        dataset = _path_graph([0, 0, 0, 0, 1])
        with self.assertRaisesRegex(ValueError, "Class 1"):
            make_splits(dataset)

    def test_split_equality(self):
        mask = np.array([True, False])
        a = DataSplit(mask, ~mask, np.zeros(2, dtype=bool))
        b = DataSplit(mask.copy(), ~mask, np.zeros(2, dtype=bool))
        self.assertEqual(a, b)

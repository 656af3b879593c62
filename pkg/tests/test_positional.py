# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import os
import tempfile
import unittest

import numpy as np

from deform_gnn.dataset import Dataset, generate_synthetic
from deform_gnn.dataset.utils import canonical_edges
from deform_gnn.model.positional import (
    INPUT_LEVEL,
    build_all_graphs,
    build_knn_graph,
    graph_cache_path,
    input_graph,
    positional_embed,
    read_graph,
    smooth_features,
    write_graph,
)


def _graph(features, pairs):
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    return Dataset(
        features=features,
        edges=canonical_edges(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), n),
        labels=np.zeros(n, dtype=np.int64),
        num_classes=1,
    )


class TestSmoothing(unittest.TestCase):
    def test_examples(self):
        dataset = generate_synthetic(30, 3, 0.5, 4, 2, 1.0, seed=0)
        smoothed = smooth_features(dataset, 0)
        self.assertEqual(len(smoothed), 1)
        self.assertTrue(np.array_equal(smoothed[0], dataset.features))

        smoothed = smooth_features(_graph([[2.0], [0.0]], [(0, 1)]), 1)
        self.assertTrue(np.allclose(smoothed[1], [[1.0], [1.0]]))

        smoothed = smooth_features(_graph([[5.0]], []), 3)
        for level in range(4):
            self.assertTrue(np.array_equal(smoothed[level], [[5.0]]))

    def test_direct_recomputation(self):
        dataset = generate_synthetic(25, 3, 0.3, 3, 2, 1.0, seed=4)
        smoothed = smooth_features(dataset, 2)
        neighbors = [{v} for v in range(dataset.num_nodes)]
        for u, v in dataset.edges:
            neighbors[u].add(v)
            neighbors[v].add(u)
        for level in (1, 2):
            for v in range(dataset.num_nodes):
                expected = np.mean([smoothed[level - 1][u] for u in neighbors[v]], axis=0)
                self.assertTrue(np.allclose(smoothed[level][v], expected, atol=1e-12))

    def test_linear(self):
        rng = np.random.default_rng(0)
        pairs = [(0, 1), (1, 2), (2, 3), (1, 4), (4, 5)]
        x, y = rng.standard_normal((6, 3)), rng.standard_normal((6, 3))
        sx = smooth_features(_graph(x, pairs), 3)
        sy = smooth_features(_graph(y, pairs), 3)
        sxy = smooth_features(_graph(2.0 * x - 0.5 * y, pairs), 3)
        for level in range(4):
            self.assertTrue(
                np.allclose(sxy[level], 2.0 * sx[level] - 0.5 * sy[level], atol=1e-10, rtol=0)
            )

    def test_regular_graph_preserves_sums(self):
        rng = np.random.default_rng(1)
        n = 7
        x = rng.standard_normal((n, 2))
        smoothed = smooth_features(_graph(x, [(v, (v + 1) % n) for v in range(n)]), 4)
        for level in range(5):
            self.assertTrue(np.allclose(smoothed[level].sum(axis=0), x.sum(axis=0), atol=1e-10))

    def test_negative_levels(self):
        with self.assertRaises(ValueError):
            smooth_features(_graph([[1.0]], []), -1)


class TestPositionalEmbed(unittest.TestCase):
    def test_examples(self):
        rng = np.random.default_rng(0)
        smoothed = smooth_features(_graph(rng.standard_normal((5, 3)), [(0, 1), (2, 3)]), 1)
        identity = positional_embed(smoothed, [np.eye(3), np.eye(3)])
        for level in range(2):
            self.assertTrue(np.allclose(identity.coordinates[level].values, smoothed[level]))
        zero = positional_embed(smoothed, [np.zeros((2, 3)), np.zeros((2, 3))])
        self.assertTrue(np.all(zero.coordinates[1].values == 0.0))

        single = smooth_features(_graph([[1.0, 2.0]], []), 0)
        embedded = positional_embed(single, [np.array([[1.0, 1.0], [1.0, -1.0]])])
        self.assertTrue(np.allclose(embedded.coordinates[0].values, [[3.0, -1.0]]))

    def test_mismatch(self):
        smoothed = smooth_features(_graph([[1.0, 2.0]], []), 1)
        with self.assertRaises(ValueError):
            positional_embed(smoothed, [np.eye(2)])
        with self.assertRaises(ValueError):
            positional_embed(smoothed, [np.eye(2), np.eye(3)])


class TestKnnGraph(unittest.TestCase):
    def test_collinear(self):
        graph = build_knn_graph(np.array([[0.0], [1.0], [10.0]]), 1)
        self.assertEqual([graph.neighbors(v).tolist() for v in range(3)], [[0, 1], [1, 0], [2, 1]])

    def test_complete(self):
        rng = np.random.default_rng(0)
        graph = build_knn_graph(rng.standard_normal((6, 2)), 5)
        for v in range(6):
            self.assertEqual(graph.neighbors(v)[0], v)
            self.assertEqual(sorted(graph.neighbors(v).tolist()), list(range(6)))

    def test_ties_go_to_lower_index(self):
        graph = build_knn_graph(np.array([[0.0], [1.0], [1.0], [5.0]]), 1)
        self.assertEqual(graph.neighbors(0).tolist(), [0, 1])
        self.assertEqual(graph.neighbors(1).tolist(), [1, 2])
        self.assertEqual(graph.neighbors(3).tolist(), [3, 1])

    def test_sorted_by_distance(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((20, 4))
        graph = build_knn_graph(x, 6, chunk_size=7)
        for v in range(20):
            dist = np.linalg.norm(x[graph.neighbors(v)] - x[v], axis=1)
            self.assertTrue(np.all(np.diff(dist) >= 0))

    def test_permutation(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((15, 3))
        perm = rng.permutation(15)
        graph = build_knn_graph(x, 4)
        permuted = build_knn_graph(x[perm], 4)
        for i in range(15):
            self.assertEqual(perm[permuted.neighbors(i)].tolist(), graph.neighbors(perm[i]).tolist())

    def test_errors(self):
        with self.assertRaises(ValueError):
            build_knn_graph(np.zeros((3, 1)), 3)
        with self.assertRaises(ValueError):
            build_knn_graph(np.zeros((3, 1)), 0)

    def test_immutable(self):
        graph = build_knn_graph(np.array([[0.0], [1.0], [3.0]]), 1)
        with self.assertRaises(ValueError):
            graph.indices[0] = 2
        with self.assertRaises(Exception):
            graph.level = 3


class TestAllGraphs(unittest.TestCase):
    def test_counts(self):
        dataset = generate_synthetic(40, 4, 0.2, 5, 3, 1.0, seed=1)
        for num_smoothing in (0, 5):
            with self.subTest(num_smoothing=num_smoothing):
                graphs = build_all_graphs(dataset, smooth_features(dataset, num_smoothing), 3)
                self.assertEqual(len(graphs), num_smoothing + 2)
                self.assertEqual(graphs[-1].level, INPUT_LEVEL)
                for level, graph in enumerate(graphs[:-1]):
                    self.assertEqual(graph.level, level)
                    self.assertEqual(graph.num_entries, 40 * 4)

    def test_input_graph(self):
        graph = input_graph(_graph(np.zeros((4, 1)), [(0, 2), (2, 1)]))
        self.assertEqual(
            [graph.neighbors(v).tolist() for v in range(4)], [[0, 2], [1, 2], [2, 0, 1], [3]]
        )
        empty = input_graph(_graph(np.zeros((3, 1)), []))
        self.assertEqual([empty.neighbors(v).tolist() for v in range(3)], [[0], [1], [2]])

    def test_cache(self):
        dataset = generate_synthetic(30, 3, 0.2, 4, 2, 1.0, seed=2)
        smoothed = smooth_features(dataset, 1)
        with tempfile.TemporaryDirectory() as tmpd:
            built = build_all_graphs(dataset, smoothed, 4, cache_dir=tmpd)
            self.assertTrue(
                os.path.isfile(graph_cache_path(tmpd, dataset, smoothed[1], 1, 4))
            )
            cached = build_all_graphs(dataset, smoothed, 4, cache_dir=tmpd)
        for a, b in zip(built, cached):
            self.assertTrue(a.same_as(b))

    def test_cache_keyed_on_features(self):
        first = generate_synthetic(60, 3, 0.1, 8, 3, 1.0, seed=7)
        second = generate_synthetic(60, 3, 0.1, 16, 3, 1.0, seed=7)
        self.assertNotEqual(first.name, second.name)
        # same name, different features
        second.name = first.name
        with tempfile.TemporaryDirectory() as tmpd:
            build_all_graphs(first, smooth_features(first, 2), 3, cache_dir=tmpd)
            smoothed = smooth_features(second, 2)
            cached = build_all_graphs(second, smoothed, 3, cache_dir=tmpd)
            self.assertEqual(len(os.listdir(tmpd)), 6)
        fresh = build_all_graphs(second, smoothed, 3)
        for level, (a, b) in enumerate(zip(cached, fresh)):
            with self.subTest(level=level):
                self.assertTrue(a.same_as(b))

    def test_write_read(self):
        graph = build_knn_graph(np.random.default_rng(0).standard_normal((9, 2)), 3, level=2)
        with tempfile.TemporaryDirectory() as tmpd:
            path = os.path.join(tmpd, "graph.txt")
            write_graph(graph, path)
            with open(path) as f:
                first = f.readline().rstrip("\n").split("\t")
            self.assertTrue(graph.same_as(read_graph(path, level=2)))
        self.assertEqual(first[0], "0")
        self.assertEqual(first[1], ",".join(str(u) for u in graph.neighbors(0)))

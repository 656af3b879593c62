# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import csv
import dataclasses
import os
import tempfile
import unittest

import numpy as np

from deform_gnn.analysis import (
    AnalysisReport,
    attention_summary,
    build_report,
    export_diagnostics,
    export_report,
    homophilic_weight,
    homophilic_weights,
    load_report,
    receptive_field,
    sorted_intensities,
)
from deform_gnn.analysis.io import ATTENTION_FILE, HOMOPHILIC_WEIGHT_FILE, RECEPTIVE_FIELD_FILE
from deform_gnn.autodiff import Tensor
from deform_gnn.config import TrainConfig
from deform_gnn.dataset import toy_dataset
from deform_gnn.model import ForwardOutput, build_model
from deform_gnn.model.deform_conv import ConvDiagnostics
from deform_gnn.train import TrainedModel, predict


def _diagnostics():
    # node 0: {0, 1, 2}, node 1: {1, 0}, node 2: {2}; two kernels
    return ConvDiagnostics(
        level=0,
        indptr=np.array([0, 3, 5, 6]),
        centers=np.array([0, 0, 0, 1, 1, 2]),
        neighbors=np.array([0, 1, 2, 1, 0, 2]),
        weights=np.array(
            [[0.2, 0.5], [0.3, 0.25], [0.5, 0.25], [0.4, 0.6], [0.6, 0.4], [1.0, 1.0]]
        ),
    )


def _trained(deformation=True, model="deformable"):
    dataset = toy_dataset()
    config = TrainConfig(
        model=model,
        hidden_dim=6,
        num_smoothing=1,
        num_kernels=3,
        knn=2,
        positional_dim=3,
        deformation=deformation,
    )
    built = build_model(dataset, config)
    params = built.init_params(np.random.default_rng(2))
    return dataset, TrainedModel(model=built, params=params, config=config)


class TestHomophilicWeight(unittest.TestCase):
    def test_examples(self):
        labels = np.array([0, 0, 1])
        diagnostics = _diagnostics()
        self.assertAlmostEqual(homophilic_weight(0, diagnostics, labels), 0.55)
        self.assertAlmostEqual(homophilic_weight(1, diagnostics, labels), 1.0)
        self.assertEqual(homophilic_weight(2, diagnostics, labels), 0.0)
        self.assertTrue(np.allclose(homophilic_weights(diagnostics, labels), [0.55, 1.0, 0.0]))

    def test_vectorized_matches_per_node(self):
        dataset, trained = _trained()
        for diagnostics in predict(trained).diagnostics:
            weights = homophilic_weights(diagnostics, dataset.labels)
            for v in range(dataset.num_nodes):
                self.assertAlmostEqual(
                    weights[v], homophilic_weight(v, diagnostics, dataset.labels), places=12
                )
            self.assertTrue(np.all(weights >= 0) and np.all(weights <= 3 + 1e-9))

    def test_out_of_range(self):
        with self.assertRaises(ValueError):
            homophilic_weight(3, _diagnostics(), np.array([0, 0, 1]))


class TestReceptiveField(unittest.TestCase):
    def test_hand_computed(self):
        output = ForwardOutput(logits=None, scores=Tensor([[0.25, 0.75], [0.5, 0.5], [1.0, 0.0]]))
        diagnostics = [_diagnostics(), dataclasses.replace(_diagnostics(), level="input")]
        intensity = receptive_field(0, output, diagnostics)
        self.assertTrue(np.allclose(intensity, [0.7, 0.55, 0.75]))
        self.assertAlmostEqual(intensity.sum(), 2.0)
        self.assertTrue(np.allclose(receptive_field(2, output, diagnostics), [0.0, 0.0, 2.0]))

    def test_mass_is_number_of_kernels(self):
        dataset, trained = _trained()
        output = predict(trained)
        for v in range(dataset.num_nodes):
            intensity = receptive_field(v, output)
            self.assertAlmostEqual(intensity.sum(), 3.0, places=9)
            self.assertTrue(np.all(intensity >= 0))

    def test_errors(self):
        output = ForwardOutput(logits=None, scores=Tensor([[1.0], [1.0], [1.0]]))
        with self.assertRaises(ValueError):
            receptive_field(3, output, [_diagnostics()])
        with self.assertRaises(ValueError):
            receptive_field(0, ForwardOutput(logits=None), [_diagnostics()])
        with self.assertRaises(ValueError):
            receptive_field(0, output, [_diagnostics(), _diagnostics()])

    def test_sorted(self):
        nodes, values = sorted_intensities(np.array([0.0, 0.5, 0.2, 0.5]))
        self.assertEqual(nodes.tolist(), [1, 3, 2])
        self.assertEqual(values.tolist(), [0.5, 0.5, 0.2])


class TestReport(unittest.TestCase):
    def test_build(self):
        dataset, trained = _trained()
        report = build_report(trained, dataset, target_nodes=[3, 0])
        self.assertEqual(report.levels, ["0", "1", "input"])
        self.assertTrue(np.allclose(report.attention, attention_summary(predict(trained))))
        self.assertAlmostEqual(report.attention.sum(), 1.0)
        self.assertEqual(report.h_weight_deform.shape, (6, 3))
        self.assertEqual(report.h_weight_no_deform.shape, (6, 3))
        self.assertEqual(sorted(report.receptive_fields), [0, 3])
        _, values = report.receptive_fields[3]
        self.assertTrue(np.all(np.diff(values) <= 0))
        self.assertAlmostEqual(values.sum(), 3.0, places=9)

    def test_without_deformation(self):
        dataset, trained = _trained(deformation=False)
        report = build_report(trained, dataset)
        self.assertTrue(np.array_equal(report.h_weight_deform, report.h_weight_no_deform))
        self.assertEqual(len(report.receptive_fields), 6)

    def test_needs_deformable_model(self):
        dataset, trained = _trained(model="gcn")
        with self.assertRaises(ValueError):
            build_report(trained, dataset)

    def test_export_load(self):
        dataset, trained = _trained()
        report = build_report(trained, dataset, target_nodes=[1, 4])
        with tempfile.TemporaryDirectory() as tmpd:
            export_report(report, tmpd)
            with open(os.path.join(tmpd, HOMOPHILIC_WEIGHT_FILE)) as f:
                rows = list(csv.reader(f))
            loaded = load_report(tmpd)
        self.assertEqual(rows[0], ["node", "level", "h_weight_no_deform", "h_weight_deform"])
        self.assertEqual(len(rows), 1 + 6 * 3)
        self.assertEqual(loaded.levels, report.levels)
        self.assertTrue(np.array_equal(loaded.attention, report.attention))
        self.assertTrue(np.array_equal(loaded.h_weight_deform, report.h_weight_deform))
        self.assertTrue(np.array_equal(loaded.h_weight_no_deform, report.h_weight_no_deform))
        for target in (1, 4):
            self.assertTrue(np.array_equal(loaded.receptive_fields[target][0], report.receptive_fields[target][0]))
            self.assertTrue(np.array_equal(loaded.receptive_fields[target][1], report.receptive_fields[target][1]))

    def test_empty_report(self):
        with tempfile.TemporaryDirectory() as tmpd:
            export_report(AnalysisReport(), tmpd)
            for name in (ATTENTION_FILE, HOMOPHILIC_WEIGHT_FILE, RECEPTIVE_FIELD_FILE):
                with open(os.path.join(tmpd, name)) as f:
                    self.assertEqual(len(f.readlines()), 1)
            loaded = load_report(tmpd)
        self.assertEqual(loaded.levels, [])
        self.assertEqual(loaded.receptive_fields, {})
        self.assertEqual(loaded.h_weight_deform.shape, (0, 0))

    def test_bad_header(self):
        with tempfile.TemporaryDirectory() as tmpd:
            export_report(AnalysisReport(), tmpd)
            with open(os.path.join(tmpd, ATTENTION_FILE), "w") as f:
                f.write("level,score\n")
            with self.assertRaises(ValueError):
                load_report(tmpd)

    def test_export_diagnostics(self):
        with tempfile.TemporaryDirectory() as tmpd:
            path = os.path.join(tmpd, "diagnostics.csv")
            export_diagnostics([_diagnostics()], path)
            with open(path) as f:
                rows = list(csv.reader(f))
        self.assertEqual(rows[0], ["level", "v", "u", "k", "a_hat"])
        self.assertEqual(len(rows), 1 + 6 * 2)
        self.assertEqual(rows[1], ["0", "0", "0", "0", "0.20000000000000001"])

# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

"""
End-to-end comparisons on synthetic graphs. They train full models for
hundreds of epochs and only run when DEFORM_GNN_EXPERIMENTS is set, e.g.

    DEFORM_GNN_EXPERIMENTS=1 python -m unittest tests.test_experiments

DEFORM_GNN_EXPERIMENT_SEEDS and DEFORM_GNN_EXPERIMENT_EPOCHS scale them down.
"""

import logging
import os
import unittest

import numpy as np

from deform_gnn.analysis import attention_summary
from deform_gnn.config import TrainConfig
from deform_gnn.dataset import generate_synthetic, make_splits
from deform_gnn.dataset.utils import with_splits
from deform_gnn.train.trainer import predict, train


EXPERIMENTS_ENV = "DEFORM_GNN_EXPERIMENTS"
SEEDS = int(os.environ.get("DEFORM_GNN_EXPERIMENT_SEEDS", "5"))
EPOCHS = int(os.environ.get("DEFORM_GNN_EXPERIMENT_EPOCHS", "500"))

HETEROPHILIC, HOMOPHILIC = 0.1, 0.8


def _dataset(homophily, seed):
    dataset = generate_synthetic(800, 5, homophily, 64, 5, 1.0, seed=seed)
    return with_splits(dataset, make_splits(dataset, num_splits=1, seed=seed))


def _runs(homophily, **config_kwargs):
    """Test accuracies and trained models over the seeds."""
    accuracies, models = [], []
    for seed in range(SEEDS):
        config = TrainConfig(epochs=EPOCHS, seed=seed, **config_kwargs)
        trained, metrics = train(_dataset(homophily, seed), config)
        accuracies.append(metrics.test_acc)
        models.append(trained)
    return 100.0 * float(np.mean(accuracies)), models


@unittest.skipUnless(os.environ.get(EXPERIMENTS_ENV), f"set {EXPERIMENTS_ENV}=1 to run")
class TestSyntheticExperiments(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        logging.getLogger("deform_gnn").setLevel(logging.WARNING)
        cls.accuracy, cls.models = {}, {}
        for homophily in (HETEROPHILIC, HOMOPHILIC):
            for model in ("deformable", "gcn"):
                acc, trained = _runs(homophily, model=model)
                cls.accuracy[homophily, model] = acc
                cls.models[homophily, model] = trained

    def test_heterophilic_gap(self):
        deformable = self.accuracy[HETEROPHILIC, "deformable"]
        gcn = self.accuracy[HETEROPHILIC, "gcn"]
        self.assertGreaterEqual(deformable - gcn, 10.0, msg=f"{deformable:.2f} vs {gcn:.2f}")

    def test_homophilic_parity(self):
        deformable = self.accuracy[HOMOPHILIC, "deformable"]
        gcn = self.accuracy[HOMOPHILIC, "gcn"]
        self.assertGreaterEqual(deformable, gcn - 3.0, msg=f"{deformable:.2f} vs {gcn:.2f}")

    def test_regularizers(self):
        both = self.accuracy[HETEROPHILIC, "deformable"]
        defaults = TrainConfig()
        self.assertGreater(defaults.alpha, 0.0)
        self.assertGreater(defaults.beta, 0.0)
        plain, _ = _runs(HETEROPHILIC, model="deformable", alpha=0.0, beta=0.0)
        self.assertGreaterEqual(both, plain - 0.5, msg=f"{both:.2f} vs {plain:.2f}")

    def test_input_graph_attention(self):
        def input_score(homophily):
            scores = [attention_summary(predict(t))[-1] for t in self.models[homophily, "deformable"]]
            return float(np.mean(scores))

        for homophily in (HETEROPHILIC, HOMOPHILIC):
            for trained in self.models[homophily, "deformable"]:
                summary = attention_summary(predict(trained))
                self.assertAlmostEqual(float(summary.sum()), 1.0, delta=1e-6)
        self.assertGreater(input_score(HOMOPHILIC), input_score(HETEROPHILIC))


if __name__ == "__main__":
    unittest.main()

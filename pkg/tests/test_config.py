# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import json
import os
import tempfile
import unittest

from deform_gnn.config import (
    SEED_ENV,
    RunConfig,
    TrainConfig,
    dump_config,
    grid_points,
    read_config_file,
    resolve_config,
)


class TestResolveConfig(unittest.TestCase):
    def test_defaults(self):
        config = resolve_config(environ={})
        self.assertEqual(config, RunConfig())
        self.assertEqual(config.train.num_smoothing, 2)
        self.assertEqual(config.grid, {})

    def test_precedence(self):
        file_values = {"lr": "0.1", "seed": "3", "hidden_dim": "16", "splits": "4"}
        overrides = {"lr": "0.2", "hidden_dim": None}
        config = resolve_config(file_values, overrides, environ={SEED_ENV: "9"})
        self.assertEqual(config.train.lr, 0.2)
        self.assertEqual(config.train.seed, 9)
        self.assertEqual(config.train.hidden_dim, 16)
        self.assertEqual(config.splits, 4)

        config = resolve_config(file_values, {"seed": "1"}, environ={SEED_ENV: "9"})
        self.assertEqual(config.train.seed, 1)

    def test_casting(self):
        config = resolve_config(
            {"deformation": "off", "deform_hidden_dim": "none", "dropout": "0"}, environ={}
        )
        self.assertIs(config.train.deformation, False)
        self.assertIsNone(config.train.deform_hidden_dim)
        self.assertEqual(config.train.dropout, 0.0)
        with self.assertRaises(ValueError):
            resolve_config({"deformation": "maybe"}, environ={})
        with self.assertRaises(ValueError):
            resolve_config({"epochs": "ten"}, environ={})

    def test_grid(self):
        config = resolve_config(overrides={"lr": "0.01,0.05", "num_kernels": "2,4"}, environ={})
        self.assertEqual(config.grid, {"lr": [0.01, 0.05], "num_kernels": [2, 4]})
        self.assertEqual(config.train.lr, 0.01)
        points = grid_points(config)
        self.assertEqual(
            [(p.lr, p.num_kernels) for p in points],
            [(0.01, 2), (0.01, 4), (0.05, 2), (0.05, 4)],
        )
        with self.assertRaises(ValueError):
            resolve_config(overrides={"dropout": "0.5,1.5"}, environ={})

    def test_unknown_key(self):
        with self.assertRaises(ValueError):
            resolve_config({"learning_rate": "0.1"}, environ={})


class TestValidate(unittest.TestCase):
    def test_train_config(self):
        TrainConfig().validate()
        for kwargs in (
            {"model": "gat"},
            {"num_kernels": 0},
            {"lr": -1.0},
            {"num_smoothing": -1},
            {"dropout": 1.0},
            {"deform_hidden_dim": 0},
        ):
            with self.subTest(**kwargs):
                with self.assertRaises(ValueError):
                    TrainConfig(**kwargs).validate()

    def test_run_config(self):
        RunConfig(synthetic="n=10").validate()
        RunConfig().validate(needs_dataset=False)
        with self.assertRaises(ValueError):
            RunConfig().validate()
        with self.assertRaises(ValueError):
            RunConfig(dataset="a", synthetic="n=10").validate()
        with self.assertRaises(ValueError):
            RunConfig(synthetic="n=10", seeds=0).validate()
        with self.assertRaises(ValueError):
            RunConfig(synthetic="n=10", ablation="kernels").validate()


class TestConfigFiles(unittest.TestCase):
    def test_read(self):
        with tempfile.TemporaryDirectory() as tmpd:
            path = os.path.join(tmpd, "run.cfg")
            with open(path, "w") as f:
                f.write("# texas sweep\nlr = 0.05  # tuned\n\nhidden-dim = 32\nsplits=10\n")
            values = read_config_file(path)
            self.assertEqual(values, {"lr": "0.05", "hidden_dim": "32", "splits": "10"})

            with open(path, "w") as f:
                f.write("lr 0.05\n")
            with self.assertRaisesRegex(ValueError, "run.cfg:1"):
                read_config_file(path)
            with self.assertRaises(FileNotFoundError):
                read_config_file(os.path.join(tmpd, "missing.cfg"))

    def test_dump(self):
        config = RunConfig(synthetic="n=10", train=TrainConfig(alpha=0.5))
        with tempfile.TemporaryDirectory() as tmpd:
            path = os.path.join(tmpd, "out", "config.json")
            dump_config(config, path)
            with open(path) as f:
                dumped = json.load(f)
        self.assertEqual(dumped["train"]["alpha"], 0.5)
        self.assertEqual(dumped["synthetic"], "n=10")

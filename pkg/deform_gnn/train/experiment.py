# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import csv
import dataclasses
import json
import logging
import multiprocessing
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from tabulate import tabulate
from tqdm import tqdm

from ..config import RunConfig, TrainConfig, dump_config, grid_points
from ..dataset.data_types import Dataset
from ..model import save_checkpoint
from ..model.positional import build_all_graphs, smooth_features
from .metric_utils import summarize_runs
from .trainer import train


logger = logging.getLogger(__name__)


SUMMARY_FILE = "summary.json"
RESULTS_TABLE_FILE = "results.csv"
METRICS_FILE = "metrics.jsonl"
CHECKPOINT_FILE = "checkpoint.h5"
CONFIG_FILE = "config.json"


def ablation_variants(config: TrainConfig, ablation: str) -> List[Tuple[str, TrainConfig]]:
    """(row label, config) pairs of one ablation study."""
    if ablation == "none":
        return [(config.model, config)]
    if ablation == "regularizers":
        alpha, beta = config.alpha, config.beta
        return [
            ("no_reg", dataclasses.replace(config, alpha=0.0, beta=0.0)),
            ("sep", dataclasses.replace(config, alpha=alpha, beta=0.0)),
            ("focus", dataclasses.replace(config, alpha=0.0, beta=beta)),
            ("sep+focus", dataclasses.replace(config, alpha=alpha, beta=beta)),
        ]
    if ablation == "deformation":
        return [
            ("deformable", dataclasses.replace(config, deformation=True)),
            ("no_deformation", dataclasses.replace(config, deformation=False)),
        ]
    raise ValueError(f"Unknown ablation {ablation!r}.")


@dataclass
class RunResult:
    variant: str
    grid_index: int
    split: int
    seed: int
    best_epoch: int
    val_acc: float
    test_acc: float


@dataclass
class VariantSummary:
    variant: str
    # hyperparameters of the grid point selected by mean validation accuracy
    selected: Dict[str, Any]
    num_runs: int
    mean_val_acc: float
    mean_test_acc: float
    std_test_acc: float
    ci95_test_acc: Optional[float]
    test_accs: List[float] = field(default_factory=list)


@dataclass
class ExperimentSummary:
    dataset: str
    model: str
    ablation: str
    splits: int
    seeds: int
    variants: List[VariantSummary]
    runs: List[RunResult]


def _train_one(args) -> RunResult:
    dataset, variant, grid_index, split, train_config, graphs, smoothed, run_dir = args
    trained, metrics = train(
        dataset,
        train_config,
        split_index=split,
        graphs=graphs,
        smoothed=smoothed,
        metrics_file=None if run_dir is None else os.path.join(run_dir, METRICS_FILE),
    )
    if run_dir is not None:
        dump_config(train_config, os.path.join(run_dir, CONFIG_FILE))
        save_checkpoint(os.path.join(run_dir, CHECKPOINT_FILE), trained.params, train_config)
    return RunResult(
        variant=variant,
        grid_index=grid_index,
        split=split,
        seed=train_config.seed,
        best_epoch=metrics.best_epoch,
        val_acc=metrics.val_acc,
        test_acc=metrics.test_acc,
    )


def _prebuild_graphs(
    dataset: Dataset, configs: List[TrainConfig], graph_cache: Optional[str]
) -> Dict[Tuple[int, int], tuple]:
    """Smoothed features and neighborhood graphs per (num_smoothing, knn) in use."""
    built = {}
    for config in configs:
        key = (config.num_smoothing, config.knn)
        if config.model != "deformable" or key in built:
            continue
        smoothed = smooth_features(dataset, config.num_smoothing)
        graphs = build_all_graphs(dataset, smoothed, config.knn, cache_dir=graph_cache)
        built[key] = (graphs, smoothed)
        logger.info(f"Built {len(graphs)} neighborhood graphs for L={key[0]}, k={key[1]}.")
    return built


def _grid_params(config: RunConfig, point: TrainConfig) -> Dict[str, Any]:
    return {key: getattr(point, key) for key in sorted(config.grid)}


def run_experiment(
    dataset: Dataset,
    config: RunConfig,
    out_dir: Optional[str] = None,
    progress: bool = True,
) -> ExperimentSummary:
    """
    Train every (variant x grid point x split x seed) combination, select the
    grid point with the best mean validation accuracy per variant and report
    its test accuracies. Results are collected in submission order, so the
    summary does not depend on `config.jobs`.
    """
    config.validate(needs_dataset=False)
    if len(dataset.splits) < config.splits:
        raise ValueError(
            f"Dataset {dataset.name} has {len(dataset.splits)} splits, {config.splits} requested."
        )

    if config.ablation != "none" and config.train.model != "deformable":
        raise ValueError(f"The {config.ablation} ablation needs the deformable model.")

    points = grid_points(config)
    tasks, all_configs = [], []
    for grid_index, point in enumerate(points):
        for variant, variant_config in ablation_variants(point, config.ablation):
            for split in range(config.splits):
                for seed_offset in range(config.seeds):
                    run_config = dataclasses.replace(
                        variant_config, seed=variant_config.seed + seed_offset
                    )
                    all_configs.append(run_config)
                    tasks.append((variant, grid_index, split, run_config))

    graphs = _prebuild_graphs(dataset, all_configs, config.graph_cache)
    arg_list = []
    for variant, grid_index, split, run_config in tasks:
        graphs_, smoothed_ = graphs.get((run_config.num_smoothing, run_config.knn), (None, None))
        if run_config.model != "deformable":
            graphs_, smoothed_ = None, None
        run_dir = None
        if out_dir is not None:
            run_dir = os.path.join(
                out_dir, "runs", variant, f"grid{grid_index}", f"split{split}_seed{run_config.seed}"
            )
        arg_list.append(
            (dataset, variant, grid_index, split, run_config, graphs_, smoothed_, run_dir)
        )
    logger.info(
        f"Running {len(arg_list)} trainings ({len(points)} grid points, {config.splits}"
        f" splits, {config.seeds} seeds, ablation {config.ablation}) with {config.jobs} jobs."
    )

    if config.jobs <= 0:
        results = [_train_one(args) for args in tqdm(arg_list, disable=not progress)]
    else:
        with multiprocessing.Pool(config.jobs) as pool:
            results = list(
                tqdm(pool.imap(_train_one, arg_list), total=len(arg_list), disable=not progress)
            )

    variants = []
    labels = [label for label, _ in ablation_variants(config.train, config.ablation)]
    for label in labels:
        per_grid = []
        for grid_index in range(len(points)):
            runs = [r for r in results if r.variant == label and r.grid_index == grid_index]
            per_grid.append((float(np.mean([r.val_acc for r in runs])), grid_index, runs))
        # first grid point wins ties
        best_val, best_index, best_runs = max(per_grid, key=lambda x: (x[0], -x[1]))
        test_accs = [r.test_acc for r in best_runs]
        summary = summarize_runs(test_accs)
        variants.append(
            VariantSummary(
                variant=label,
                selected=_grid_params(config, points[best_index]),
                num_runs=summary.num_runs,
                mean_val_acc=best_val,
                mean_test_acc=summary.mean,
                std_test_acc=summary.std,
                ci95_test_acc=summary.ci95,
                test_accs=test_accs,
            )
        )

    experiment = ExperimentSummary(
        dataset=dataset.name,
        model=config.train.model,
        ablation=config.ablation,
        splits=config.splits,
        seeds=config.seeds,
        variants=variants,
        runs=results,
    )
    log_summary_table(experiment)
    if out_dir is not None:
        export_summary(experiment, out_dir)
    return experiment


def _table_rows(experiment: ExperimentSummary) -> List[list]:
    rows = []
    for v in experiment.variants:
        ci = "" if v.ci95_test_acc is None else f"{100 * v.ci95_test_acc:.2f}"
        rows.append(
            [
                v.variant,
                v.num_runs,
                f"{100 * v.mean_val_acc:.2f}",
                f"{100 * v.mean_test_acc:.2f}",
                ci,
                json.dumps(v.selected, sort_keys=True),
            ]
        )
    return rows


TABLE_HEADER = ["Variant", "Runs", "Val acc", "Test acc", "95% CI", "Selected"]


def log_summary_table(experiment: ExperimentSummary) -> None:
    table_str = tabulate(_table_rows(experiment), headers=TABLE_HEADER)
    logger.info(f"Results on {experiment.dataset}:\n" + table_str)


def export_summary(experiment: ExperimentSummary, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    summary_file = os.path.join(out_dir, SUMMARY_FILE)
    logger.info(f"Dumping the experiment summary to {summary_file}.")
    with open(summary_file, "w") as f:
        json.dump(dataclasses.asdict(experiment), f, indent=2, sort_keys=True)

    table_file = os.path.join(out_dir, RESULTS_TABLE_FILE)
    with open(table_file, "w", encoding="UTF8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TABLE_HEADER)
        writer.writerows(_table_rows(experiment))

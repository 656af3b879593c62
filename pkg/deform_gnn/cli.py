# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np
from tabulate import tabulate

from .analysis import build_report, export_diagnostics, export_report
from .autodiff import grad_check_params
from .config import (
    ABLATIONS,
    MODEL_KINDS,
    RunConfig,
    TrainConfig,
    dump_config,
    read_config_file,
    resolve_config,
)
from .dataset import (
    Dataset,
    SplitPart,
    SyntheticSpec,
    dataset_stats,
    generate_from_spec,
    import_geom_gcn,
    load_dataset_folder,
    make_splits,
    save_dataset,
    toy_dataset,
)
from .dataset.data_types import _asdict_rec
from .dataset.utils import with_splits
from .model import Mode, build_model, check_params_compatible, load_checkpoint
from .train import TrainedModel, accuracy, loss_total, predict, run_experiment
from .train.metric_utils import Timer


logger = logging.getLogger(__name__)


GRADCHECK_TOLERANCE = 1e-4

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_REFUSED = 2

# every TrainConfig field becomes a --flag; values stay strings so that
# comma-separated lists reach the grid
_TRAIN_FLAGS = [f.name for f in dataclasses.fields(TrainConfig)]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="Flat `key = value` config file.")
    parser.add_argument("--verbose", action="store_true", help="Log debug messages.")
    parser.add_argument("--quiet", action="store_true", help="Hide progress bars.")


def _add_dataset_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", type=str, default=None, help="Dataset folder.")
    parser.add_argument(
        "--synthetic",
        type=str,
        default=None,
        help="Synthetic graph spec, e.g. `n=200,c=5,h=0.1,d=32,deg=4,noise=1,seed=7`.",
    )
    parser.add_argument("--splits", type=str, default=None, help="Number of split instances.")


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    for name in _TRAIN_FLAGS:
        help_str = "Comma-separated values span a grid."
        if name == "model":
            help_str = f"One of {', '.join(MODEL_KINDS)}."
        parser.add_argument(f"--{name.replace('_', '-')}", dest=name, type=str, default=None, help=help_str)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deform-gnn",
        description="Deformable graph convolutional networks for node classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Train over splits x seeds and summarize test accuracy.")
    _add_common(p)
    _add_dataset_source(p)
    _add_train_flags(p)
    p.add_argument("--seeds", type=str, default=None, help="Seeds per split.")
    p.add_argument("--out-dir", dest="out_dir", type=str, default=None)
    p.add_argument("--jobs", type=str, default=None, help="Worker processes, 0 runs inline.")
    p.add_argument("--graph-cache", dest="graph_cache", type=str, default=None)
    p.add_argument("--ablation", type=str, default=None, choices=ABLATIONS)

    p = sub.add_parser("eval", help="Accuracy of a checkpoint on one split.")
    _add_common(p)
    _add_dataset_source(p)
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--split", type=int, default=0)

    p = sub.add_parser("analyze", help="Export attention, homophilic weight and receptive fields.")
    _add_common(p)
    _add_dataset_source(p)
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--out-dir", dest="out_dir", type=str, required=True)
    p.add_argument(
        "--target-nodes",
        dest="target_nodes",
        type=lambda x: [int(x_) for x_ in x.split(",") if x_.strip()],
        default=None,
        help="Comma-separated receptive-field targets; all nodes by default.",
    )
    p.add_argument(
        "--diagnostics", action="store_true", help="Also export every kernel weight."
    )

    p = sub.add_parser("gradcheck", help="Finite-difference check of the full model gradient.")
    _add_common(p)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=GRADCHECK_TOLERANCE)
    p.add_argument("--model", type=str, default="deformable", choices=MODEL_KINDS)
    p.add_argument(
        "--train-mode", dest="train_mode", action="store_true",
        help="Check with dropout on (refused: the loss is not deterministic).",
    )

    p = sub.add_parser("synth", help="Write a synthetic dataset folder.")
    _add_common(p)
    p.add_argument("--synthetic", type=str, required=True)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--splits", type=int, default=10)

    p = sub.add_parser("import", help="Convert a raw WebKB / Wikipedia / citation folder.")
    _add_common(p)
    p.add_argument("--raw-dir", dest="raw_dir", type=str, required=True)
    p.add_argument("--name", type=str, required=True)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--splits", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--multi-hot-dim", dest="multi_hot_dim", type=int, default=None,
        help="Node file lists nonzero feature indices; expand to this many features.",
    )

    p = sub.add_parser("stats", help="Print dataset statistics.")
    _add_common(p)
    _add_dataset_source(p)
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, object]:
    keys = set(_TRAIN_FLAGS) | {f.name for f in dataclasses.fields(RunConfig)}
    return {
        k: v for k, v in vars(args).items() if k in keys and k not in ("command", "config")
    }


def _resolve(args: argparse.Namespace) -> RunConfig:
    file_values = read_config_file(args.config) if args.config else {}
    overrides = _overrides(args)
    overrides["command"] = args.command
    return resolve_config(file_values, overrides)


def load_run_dataset(config: RunConfig) -> Dataset:
    """The dataset of a run, with `config.splits` split instances."""
    if config.dataset is not None:
        dataset = load_dataset_folder(config.dataset)
    else:
        dataset = generate_from_spec(SyntheticSpec.from_string(config.synthetic))
    if len(dataset.splits) < config.splits:
        logger.info(f"{dataset.name} has {len(dataset.splits)} splits; generating {config.splits}.")
        dataset = with_splits(dataset, make_splits(dataset, num_splits=config.splits, seed=0))
    return dataset


def _load_trained(checkpoint: str, dataset: Dataset) -> TrainedModel:
    params, train_config = load_checkpoint(checkpoint)
    model = build_model(dataset, train_config)
    check_params_compatible(model.init_params(np.random.default_rng(0)), params)
    return TrainedModel(model=model, params=params, config=train_config)


def cmd_train(config: RunConfig, progress: bool = True) -> int:
    dataset = load_run_dataset(config)
    out_dir = os.path.join(config.out_dir, dataset.name)
    dump_config(config, os.path.join(out_dir, "config.json"))
    with Timer(f"train {config.train.model} on {dataset.name}"):
        experiment = run_experiment(dataset, config, out_dir=out_dir, progress=progress)
    for v in experiment.variants:
        print(f"{v.variant}: test accuracy {100 * v.mean_test_acc:.2f} over {v.num_runs} runs")
    print(os.path.join(out_dir, "summary.json"))
    return EXIT_OK


def cmd_eval(config: RunConfig, checkpoint: str, split: int) -> int:
    dataset = load_run_dataset(dataclasses.replace(config, splits=max(config.splits, split + 1)))
    trained = _load_trained(checkpoint, dataset)
    logits = predict(trained).logits.values
    data_split = dataset.split(split)
    result = {
        part.value: accuracy(logits, dataset.labels, data_split.mask(part))
        for part in SplitPart
        if data_split.mask(part).any()
    }
    print(json.dumps(result, sort_keys=True))
    return EXIT_OK


def cmd_analyze(
    config: RunConfig,
    checkpoint: str,
    out_dir: str,
    target_nodes: Optional[Sequence[int]] = None,
    diagnostics: bool = False,
) -> int:
    dataset = load_run_dataset(config)
    trained = _load_trained(checkpoint, dataset)
    report = build_report(trained, dataset, target_nodes=target_nodes)
    export_report(report, out_dir)
    if diagnostics:
        export_diagnostics(predict(trained).diagnostics, os.path.join(out_dir, "diagnostics.csv"))
    print(out_dir)
    return EXIT_OK


def gradcheck_errors(
    model_kind: str = "deformable", epsilon: float = 1e-5
) -> Dict[str, float]:
    """Max relative gradient error per parameter group on the 6-node toy graph."""
    dataset = toy_dataset()
    config = TrainConfig(
        model=model_kind,
        hidden_dim=4,
        dropout=0.0,
        alpha=0.1,
        beta=0.1,
        num_smoothing=1,
        num_kernels=2,
        knn=2,
        positional_dim=3,
        deform_hidden_dim=3,
    )
    model = build_model(dataset, config)
    params = model.init_params(np.random.default_rng(0))
    train_mask = dataset.split(0).mask(SplitPart.TRAIN)

    def _loss(p):
        output = model.forward(p, mode=Mode.EVAL)
        return loss_total(
            output, dataset.labels, train_mask, config.alpha, config.beta, config.num_kernels
        ).total

    errors = grad_check_params(_loss, params, epsilon=epsilon)
    return {
        group: max(errors[name] for name in names)
        for group, names in model.param_groups(params).items()
    }


def cmd_gradcheck(
    model_kind: str, epsilon: float, tolerance: float, train_mode: bool = False
) -> int:
    if train_mode:
        logger.error("Refusing to check gradients with dropout on: the loss is random.")
        return EXIT_REFUSED
    with Timer("gradcheck"):
        errors = gradcheck_errors(model_kind, epsilon)
    rows = [
        [group, f"{err:.3e}", "ok" if err < tolerance else "FAIL"]
        for group, err in errors.items()
    ]
    print(tabulate(rows, headers=["Group", "Max rel. error", "Status"]))
    failed = [group for group, err in errors.items() if not err < tolerance]
    if failed:
        logger.error(f"Gradient check failed for {', '.join(failed)}.")
        return EXIT_FAILURE
    return EXIT_OK


def cmd_stats(config: RunConfig) -> int:
    dataset = load_run_dataset(dataclasses.replace(config, splits=0))
    stats = _asdict_rec(dataset_stats(dataset))
    print(tabulate([[k, stats[k]] for k in sorted(stats)], headers=["Statistic", dataset.name]))
    print(json.dumps(stats, indent=2, sort_keys=True))
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        if args.command == "gradcheck":
            return cmd_gradcheck(args.model, args.epsilon, args.tolerance, args.train_mode)
        if args.command == "synth":
            spec = SyntheticSpec.from_string(args.synthetic)
            dataset = generate_from_spec(spec)
            dataset = with_splits(dataset, make_splits(dataset, num_splits=args.splits, seed=spec.seed))
            save_dataset(dataset, args.out)
            return EXIT_OK
        if args.command == "import":
            import_geom_gcn(
                args.raw_dir,
                args.name,
                args.out,
                num_splits=args.splits,
                seed=args.seed,
                multi_hot_dim=args.multi_hot_dim,
            )
            return EXIT_OK

        config = _resolve(args)
        config.validate()
        if args.command == "train":
            return cmd_train(config, progress=not args.quiet)
        if args.command == "eval":
            return cmd_eval(config, args.checkpoint, args.split)
        if args.command == "analyze":
            return cmd_analyze(
                config, args.checkpoint, args.out_dir, args.target_nodes, args.diagnostics
            )
        if args.command == "stats":
            return cmd_stats(config)
        raise ValueError(f"Unknown command {args.command}!")
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        logger.error(str(exc))
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

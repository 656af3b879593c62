# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from ..autodiff import NonFiniteError, Tape, backward
from ..config import TrainConfig
from ..dataset.data_types import Dataset, SplitPart
from ..model import ForwardOutput, Mode, NodeClassifier, build_model
from ..model.positional import NeighborhoodGraph, SmoothedFeatures
from .losses import loss_total
from .metric_utils import accuracy
from .optimizer import AdamState, adam_step


logger = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, message: str):
        super().__init__(f"Training diverged at epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    loss_cls: float
    loss_sep: float
    loss_focus: float
    alpha: float
    beta: float
    val_acc: float
    test_acc: float


@dataclass
class RunMetrics:
    split: int
    seed: int
    # epoch (1-based) of the first maximum of the validation accuracy
    best_epoch: int
    val_acc: float
    test_acc: float
    train_time: float = 0.0
    epochs: List[EpochRecord] = field(default_factory=list)


@dataclass
class TrainedModel:
    model: NodeClassifier
    params: Dict[str, np.ndarray]
    config: TrainConfig


def seeded_generators(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for parameter init and dropout masks."""
    init_seq, dropout_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_seq), np.random.default_rng(dropout_seq)


def predict(trained: TrainedModel, **kwargs) -> ForwardOutput:
    return trained.model.forward(trained.params, mode=Mode.EVAL, **kwargs)


def evaluate(trained: TrainedModel, dataset: Dataset, mask: np.ndarray) -> float:
    """Accuracy of the eval-mode argmax prediction over `mask`."""
    return accuracy(predict(trained).logits.values, dataset.labels, mask)


def train(
    dataset: Dataset,
    config: TrainConfig,
    split_index: int = 0,
    graphs: Optional[List[NeighborhoodGraph]] = None,
    smoothed: Optional[SmoothedFeatures] = None,
    graph_cache: Optional[str] = None,
    metrics_file: Optional[str] = None,
    progress: bool = False,
) -> Tuple[TrainedModel, RunMetrics]:
    """
    Full-graph training for `config.epochs` epochs on split `split_index`.

    Returns the parameters of the epoch with the highest validation accuracy
    (earliest on ties) and the test accuracy of that epoch. With
    `metrics_file` every epoch is appended to it as one JSON line.
    """
    config.validate()
    split = dataset.split(split_index)
    train_mask = split.mask(SplitPart.TRAIN)
    val_mask = split.mask(SplitPart.VAL)
    test_mask = split.mask(SplitPart.TEST)
    if not train_mask.any():
        raise ValueError(f"Split {split_index} of {dataset.name} has an empty train mask.")

    model = build_model(dataset, config, graphs=graphs, smoothed=smoothed, graph_cache=graph_cache)
    init_rng, dropout_rng = seeded_generators(config.seed)
    params = model.init_params(init_rng)
    state = AdamState.zeros_like(params)
    logger.info(
        f"Training {model.kind} on {dataset.name} split {split_index} seed {config.seed}"
        f" ({sum(p.size for p in params.values())} parameters, {config.epochs} epochs)."
    )

    best_val, best_epoch, best_test = -1.0, 0, 0.0
    best_params = {k: v.copy() for k, v in params.items()}
    history: List[EpochRecord] = []
    metrics_fh = None
    if metrics_file is not None:
        os.makedirs(os.path.dirname(os.path.abspath(metrics_file)), exist_ok=True)
        metrics_fh = open(metrics_file, "w")

    start = time.time()
    try:
        for epoch in tqdm(range(1, config.epochs + 1), disable=not progress, desc=dataset.name):
            try:
                with Tape() as tape:
                    tracked = tape.watch_all(params)
                    output = model.forward(tracked, mode=Mode.TRAIN, rng=dropout_rng)
                    terms = loss_total(
                        output,
                        dataset.labels,
                        train_mask,
                        alpha=config.alpha,
                        beta=config.beta,
                        num_kernels=config.num_kernels,
                    )
                grads = backward(tape, terms.total)
                params, state = adam_step(
                    params,
                    {name: grads[t.node_id].values for name, t in tracked.items()},
                    state,
                    lr=config.lr,
                    weight_decay=config.weight_decay,
                    decays=model.decays,
                )
                if not all(np.all(np.isfinite(p)) for p in params.values()):
                    raise DivergenceError(epoch, "non-finite parameters after the update")
                logits = model.forward(params, mode=Mode.EVAL).logits.values
            except NonFiniteError as exc:
                raise DivergenceError(epoch, str(exc)) from exc

            val_acc = accuracy(logits, dataset.labels, val_mask) if val_mask.any() else 0.0
            test_acc = accuracy(logits, dataset.labels, test_mask) if test_mask.any() else 0.0
            record = EpochRecord(
                epoch=epoch,
                alpha=config.alpha,
                beta=config.beta,
                val_acc=val_acc,
                test_acc=test_acc,
                **terms.as_floats(),
            )
            history.append(record)
            if metrics_fh is not None:
                metrics_fh.write(json.dumps(record.__dict__, sort_keys=True) + "\n")
            logger.debug(
                f"epoch {epoch}: loss={record.loss:.4f} (cls={record.loss_cls:.4f},"
                f" sep={record.loss_sep:.4f}, focus={record.loss_focus:.4f})"
                f" val={val_acc:.4f} test={test_acc:.4f}"
            )
            if val_acc > best_val:
                best_val, best_epoch, best_test = val_acc, epoch, test_acc
                best_params = {k: v.copy() for k, v in params.items()}
    finally:
        if metrics_fh is not None:
            metrics_fh.close()

    metrics = RunMetrics(
        split=split_index,
        seed=config.seed,
        best_epoch=best_epoch,
        val_acc=best_val,
        test_acc=best_test,
        train_time=time.time() - start,
        epochs=history,
    )
    logger.info(
        f"{model.kind} on {dataset.name} split {split_index} seed {config.seed}:"
        f" best val {best_val:.4f} at epoch {best_epoch}, test {best_test:.4f}"
        f" ({metrics.train_time:.1f} sec)."
    )
    return TrainedModel(model=model, params=best_params, config=config), metrics

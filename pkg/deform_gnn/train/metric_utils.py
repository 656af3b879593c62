# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats


logger = logging.getLogger(__name__)


def predictions(logits: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the lowest class
    return np.argmax(np.asarray(logits), axis=1)


def accuracy(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> float:
    index = np.flatnonzero(mask)
    if index.size == 0:
        raise ValueError("Cannot compute the accuracy over an empty mask.")
    pred = predictions(np.asarray(logits)[index])
    return float(np.mean(pred == np.asarray(labels)[index]))


def confidence_interval(values: Sequence[float], level: float = 0.95) -> float:
    """Half-width of the two-sided Student-t interval of the mean."""
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise ValueError(f"A confidence interval needs at least 2 runs, got {values.size}.")
    sem = np.std(values, ddof=1) / math.sqrt(values.size)
    return float(stats.t.ppf(0.5 + level / 2.0, df=values.size - 1) * sem)


@dataclass
class RunSummary:
    num_runs: int
    mean: float
    std: float
    # None with fewer than 2 runs
    ci95: Optional[float] = None
    values: List[float] = field(default_factory=list)

    def __str__(self) -> str:
        ci = "n/a" if self.ci95 is None else f"{100 * self.ci95:.2f}"
        return f"{100 * self.mean:.2f} +- {ci} ({self.num_runs} runs)"


def summarize_runs(values: Sequence[float]) -> RunSummary:
    values = [float(v) for v in values]
    if len(values) == 0:
        raise ValueError("No runs to summarize.")
    arr = np.asarray(values)
    return RunSummary(
        num_runs=len(values),
        mean=float(arr.mean()),
        std=float(arr.std(ddof=1)) if len(values) > 1 else 0.0,
        ci95=confidence_interval(values) if len(values) > 1 else None,
        values=values,
    )


class Timer:
    def __init__(self, name=None):
        self.name = name if name is not None else "timer"

    def __enter__(self):
        self.start = time.time()
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.elapsed = time.time() - self.start
        logger.info(f"{self.name} - {self.elapsed:.3e} sec")

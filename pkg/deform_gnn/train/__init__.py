# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

from .experiment import ExperimentSummary, ablation_variants, run_experiment  # noqa: F401
from .losses import (  # noqa: F401
    LossTerms,
    classification_loss,
    loss_focusing,
    loss_separating,
    loss_total,
)
from .metric_utils import RunSummary, Timer, accuracy, confidence_interval, summarize_runs  # noqa: F401
from .optimizer import AdamState, adam_step  # noqa: F401
from .trainer import (  # noqa: F401
    DivergenceError,
    EpochRecord,
    RunMetrics,
    TrainedModel,
    evaluate,
    predict,
    train,
)

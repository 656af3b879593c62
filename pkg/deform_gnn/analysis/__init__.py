# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

from .analysis import (  # noqa: F401
    AnalysisReport,
    attention_summary,
    build_report,
    homophilic_weight,
    homophilic_weights,
    receptive_field,
    sorted_intensities,
)
from .io import export_diagnostics, export_report, load_report  # noqa: F401

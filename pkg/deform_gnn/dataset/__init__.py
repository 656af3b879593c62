# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

from .data_types import DataSplit, Dataset, DatasetStats, SplitPart  # noqa: F401
from .io import (  # noqa: F401
    DatasetFormatError,
    import_geom_gcn,
    load_dataset,
    load_dataset_folder,
    save_dataset,
)
from .synthetic import SyntheticSpec, generate_from_spec, generate_synthetic, toy_dataset  # noqa: F401
from .utils import dataset_stats, homophily_ratio, make_splits  # noqa: F401

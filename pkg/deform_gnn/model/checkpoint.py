# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import io
import json
import logging
import os
from typing import Dict, Mapping, Tuple

import h5py
import numpy as np

from ..config import TrainConfig
from ..dataset.data_types import _asdict_rec, _dataclass_from_dict


logger = logging.getLogger(__name__)


def save_checkpoint(
    path: str,
    params: Mapping[str, np.ndarray],
    config: TrainConfig,
) -> None:
    """
    Store all parameters in one HDF5 file: one float64 dataset per parameter,
    the config as a JSON attribute and the model kind as an attribute.
    """
    logger.info(f"Saving {len(params)} parameter tensors to {path}.")
    if len(params) == 0:
        raise ValueError("No parameters to save!")
    if os.path.isfile(path):
        os.remove(path)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with h5py.File(path, "w") as fh5:
        fh5.attrs["config"] = json.dumps(_asdict_rec(config), sort_keys=True)
        fh5.attrs["model"] = config.model
        group = fh5.create_group("params")
        for name in sorted(params):
            group.create_dataset(name, data=np.asarray(params[name], dtype=np.float64))


def load_checkpoint(path: str) -> Tuple[Dict[str, np.ndarray], TrainConfig]:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"Checkpoint {path} does not exist.")
    params: Dict[str, np.ndarray] = {}
    with h5py.File(path, "r") as fh5:
        config = _dataclass_from_dict(json.load(io.StringIO(fh5.attrs["config"])), TrainConfig)

        def _collect(name, obj):
            if isinstance(obj, h5py.Dataset):
                params[name] = np.array(obj, dtype=np.float64)

        fh5["params"].visititems(_collect)
    logger.info(f"Loaded {len(params)} parameter tensors of a {config.model} model from {path}.")
    return params, config


def check_params_compatible(
    expected: Mapping[str, np.ndarray], loaded: Mapping[str, np.ndarray]
) -> None:
    """Raise naming the first tensor whose presence or shape differs."""
    for name in sorted(expected):
        if name not in loaded:
            raise ValueError(f"Checkpoint is missing parameter tensor {name}.")
        if loaded[name].shape != expected[name].shape:
            raise ValueError(
                f"Parameter tensor {name} has shape {loaded[name].shape} in the"
                f" checkpoint, the model expects {expected[name].shape}."
            )
    extra = sorted(set(loaded) - set(expected))
    if extra:
        raise ValueError(f"Checkpoint has unexpected parameter tensor {extra[0]}.")

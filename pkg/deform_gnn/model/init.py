# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

from typing import Tuple

import numpy as np


def glorot_uniform(
    rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int, fan_out: int
) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def linear_weight(rng: np.random.Generator, out_dim: int, in_dim: int) -> np.ndarray:
    """out_dim x in_dim matrix, uniform in +-sqrt(6 / (in_dim + out_dim))."""
    return glorot_uniform(rng, (out_dim, in_dim), fan_in=in_dim, fan_out=out_dim)


def unit_vectors(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """`count` vectors drawn uniformly from the unit sphere in R^dim."""
    vectors = rng.standard_normal((count, dim))
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return vectors / np.maximum(norms, 1e-12)

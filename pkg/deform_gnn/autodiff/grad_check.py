# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import logging
from typing import Callable, Dict, Iterable, Mapping, Optional

import numpy as np

from .tape import ShapeError, Tape, Tensor, backward


logger = logging.getLogger(__name__)


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    if analytic.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def _scalar_value(out: Tensor) -> float:
    if not isinstance(out, Tensor) or out.values.size != 1:
        shape = getattr(out, "shape", None)
        raise ShapeError(f"Function output must be a scalar tensor, got shape {shape}.")
    return out.item()


def grad_check(
    fn: Callable[[Tensor], Tensor],
    point: np.ndarray,
    epsilon: float = 1e-5,
) -> float:
    """
    Compare the tape gradient of `fn` at `point` with central differences.

    Returns:
        The maximum coordinate-wise relative error, with denominator
        max(|analytic|, |numeric|, 1e-8).
    """
    params = {"x": np.asarray(point, dtype=np.float64)}
    errors = grad_check_params(lambda p: fn(p["x"]), params, epsilon=epsilon)
    return errors["x"]


def grad_check_params(
    fn: Callable[[Mapping[str, Tensor]], Tensor],
    params: Mapping[str, np.ndarray],
    epsilon: float = 1e-5,
    names: Optional[Iterable[str]] = None,
) -> Dict[str, float]:
    """
    Multi-parameter version of `grad_check`: one reverse sweep for all of
    `params`, then central differences for every coordinate of the tensors
    listed in `names` (all of them by default).

    Returns:
        {parameter name: max relative error}
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}.")
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}

    with Tape() as tape:
        tracked = tape.watch_all(base)
        out = fn(tracked)
        _scalar_value(out)
    grads = backward(tape, out)

    def _evaluate(values: Mapping[str, np.ndarray]) -> float:
        return _scalar_value(fn({k: Tensor(v) for k, v in values.items()}))

    errors = {}
    for name in names if names is not None else base:
        point = base[name]
        numeric = np.zeros_like(point)
        for i in range(point.size):
            shifted = dict(base)
            plus = point.copy()
            plus.flat[i] += epsilon
            shifted[name] = plus
            f_plus = _evaluate(shifted)
            minus = point.copy()
            minus.flat[i] -= epsilon
            shifted[name] = minus
            f_minus = _evaluate(shifted)
            numeric.flat[i] = (f_plus - f_minus) / (2.0 * epsilon)
        analytic = grads[tracked[name].node_id].values
        errors[name] = max_relative_error(analytic, numeric)
        logger.debug(f"grad_check {name}: max relative error {errors[name]:.3e}")
    return errors

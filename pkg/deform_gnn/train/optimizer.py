# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Tuple

import numpy as np


@dataclass
class AdamState:
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "AdamState":
        return cls(
            step=0,
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    betas: Tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 0.0,
    decays: Optional[Callable[[str], bool]] = None,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    One Adam step with bias correction. Weight decay is coupled: wd * theta is
    added to the gradient before the moment updates, for the parameters that
    `decays` accepts (all of them by default).

    Returns:
        new_params, new_state: fresh arrays; the inputs are not modified.
    """
    beta1, beta2 = betas
    step = state.step + 1
    bias1 = 1.0 - beta1 ** step
    bias2 = 1.0 - beta2 ** step
    new_params, new_m, new_v = {}, {}, {}
    for name, theta in params.items():
        if name not in grads:
            raise ValueError(f"Missing gradient for parameter {name}.")
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != theta.shape:
            raise ValueError(f"Gradient of {name} has shape {g.shape}, expected {theta.shape}.")
        if weight_decay != 0.0 and (decays is None or decays(name)):
            g = g + weight_decay * theta
        m = beta1 * state.m.get(name, np.zeros_like(theta)) + (1.0 - beta1) * g
        v = beta2 * state.v.get(name, np.zeros_like(theta)) + (1.0 - beta2) * g * g
        m_hat = m / bias1
        v_hat = v / bias2
        new_params[name] = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name], new_v[name] = m, v
    return new_params, AdamState(step=step, m=new_m, v=new_v)

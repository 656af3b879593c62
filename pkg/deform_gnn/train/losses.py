# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..autodiff import Tensor
from ..autodiff import ops as F
from ..model.data_types import ForwardOutput


@dataclass
class LossTerms:
    total: Tensor
    cls: Tensor
    sep: Tensor
    focus: Tensor

    def as_floats(self) -> dict:
        return {
            "loss": self.total.item(),
            "loss_cls": self.cls.item(),
            "loss_sep": self.sep.item(),
            "loss_focus": self.focus.item(),
        }


def _level_mean(terms: Sequence[Tensor]) -> Tensor:
    total = terms[0]
    for term in terms[1:]:
        total = F.add(total, term)
    return F.scalar_mul(total, 1.0 / len(terms))


def loss_separating(kernel_vector_sets: Sequence[Tensor]) -> Tensor:
    """
    -(1/K) sum over ordered pairs k1 != k2 of |kernel_k2 - kernel_k1|^2,
    averaged over the kernel sets of all levels. Zero for K = 1.
    """
    terms = []
    for kernels in kernel_vector_sets:
        kernels = kernels if isinstance(kernels, Tensor) else Tensor(kernels)
        K = kernels.shape[0]
        if K < 2:
            terms.append(Tensor(0.0))
            continue
        first, second = np.nonzero(~np.eye(K, dtype=bool))
        diff = F.sub(F.gather_rows(kernels, second), F.gather_rows(kernels, first))
        terms.append(F.scalar_mul(F.squared_l2_norm(diff), -1.0 / K))
    if not terms:
        return Tensor(0.0)
    return _level_mean(terms)


def loss_focusing(deformations: Sequence[Tensor], num_kernels: int) -> Tensor:
    """
    Mean squared norm of the deformation vectors, 1 / (K |V|) sum_v sum_k
    |delta_k(e_v)|^2, averaged over levels. Each entry of `deformations` is
    n x K (d_phi + 1).
    """
    if num_kernels < 1:
        raise ValueError(f"Need at least one kernel, got K={num_kernels}.")
    terms = []
    for delta in deformations:
        delta = delta if isinstance(delta, Tensor) else Tensor(delta)
        n = delta.shape[0] if delta.ndim == 2 else 1
        terms.append(F.scalar_mul(F.squared_l2_norm(delta), 1.0 / (num_kernels * n)))
    if not terms:
        return Tensor(0.0)
    return _level_mean(terms)


def classification_loss(logits: Tensor, labels: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean cross-entropy over the nodes selected by `mask`."""
    index = np.flatnonzero(mask)
    if index.size == 0:
        raise ValueError("Cannot compute a loss over an empty mask.")
    return F.cross_entropy_with_logits(F.gather_rows(logits, index), np.asarray(labels)[index])


def loss_total(
    output: ForwardOutput,
    labels: np.ndarray,
    train_mask: np.ndarray,
    alpha: float,
    beta: float,
    num_kernels: int = 1,
) -> LossTerms:
    """L = L_cls + alpha L_sep + beta L_focus. Weight decay lives in the optimizer."""
    if alpha < 0 or beta < 0:
        raise ValueError(f"Regularizer strengths must be >= 0, got alpha={alpha}, beta={beta}.")
    cls = classification_loss(output.logits, labels, train_mask)
    sep = loss_separating(output.kernel_vectors)
    focus = loss_focusing(output.deformations, num_kernels)
    total = cls
    # zero strengths leave the term off the tape
    if alpha > 0:
        total = F.add(total, F.scalar_mul(sep, alpha))
    if beta > 0:
        total = F.add(total, F.scalar_mul(focus, beta))
    return LossTerms(total=total, cls=cls, sep=sep, focus=focus)

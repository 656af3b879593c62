# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

"""
Forward rules and adjoints of every op the tape understands, plus the
functional wrappers the rest of the package calls.
"""

from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from .tape import (
    OpKind,
    ShapeError,
    Tensor,
    TensorLike,
    forward_op,
    register_op,
)


# rows with a smaller l2 norm are returned unchanged by row-l2-normalize
ROW_NORM_EPS = 1e-12


def segment_sum(x: np.ndarray, index: np.ndarray, num_segments: int) -> np.ndarray:
    """
    out[j] = sum of the rows x[i] with index[i] == j, accumulated in row order.
    """
    index = np.asarray(index, dtype=np.int64)
    m = index.shape[0]
    if m == 0:
        return np.zeros((num_segments,) + x.shape[1:], dtype=np.float64)
    incidence = sparse.csr_matrix(
        (np.ones(m, dtype=np.float64), (index, np.arange(m))),
        shape=(num_segments, m),
    )
    out = incidence @ x.reshape(m, -1)
    return np.asarray(out).reshape((num_segments,) + x.shape[1:])


def _check_index(index: np.ndarray, size: int, kind: OpKind) -> np.ndarray:
    index = np.asarray(index)
    if index.ndim != 1 or not np.issubdtype(index.dtype, np.integer):
        raise ShapeError(f"{kind.value}: index must be a 1-d integer array.")
    if index.size > 0 and (index.min() < 0 or index.max() >= size):
        raise ShapeError(f"{kind.value}: index out of range [0, {size}).")
    return index.astype(np.int64)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a: np.ndarray, b: np.ndarray, kind: OpKind) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(
            f"{kind.value}: shapes {a.shape} and {b.shape} do not broadcast."
        ) from None


# ------------------------------------------------------------------ linear ops


def _matmul_forward(values):
    a, b = values
    if a.ndim != 2 or b.ndim not in (1, 2) or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}.")
    return a @ b, {}


def _matmul_backward(grad, values, out, saved):
    a, b = values
    if b.ndim == 1:
        return np.outer(grad, b), a.T @ grad
    return grad @ b.T, a.T @ grad


def _add_forward(values):
    a, b = values
    _check_broadcast(a, b, OpKind.ADD)
    return a + b, {}


def _add_backward(grad, values, out, saved):
    a, b = values
    return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)


def _sub_forward(values):
    a, b = values
    _check_broadcast(a, b, OpKind.SUB)
    return a - b, {}


def _sub_backward(grad, values, out, saved):
    a, b = values
    return _unbroadcast(grad, a.shape), -_unbroadcast(grad, b.shape)


def _scalar_mul_forward(values, scalar):
    (x,) = values
    return scalar * x, {}


def _scalar_mul_backward(grad, values, out, saved, scalar):
    return (scalar * grad,)


def _mul_forward(values):
    a, b = values
    _check_broadcast(a, b, OpKind.ELEMENTWISE_MUL)
    return a * b, {}


def _mul_backward(grad, values, out, saved):
    a, b = values
    return _unbroadcast(grad * b, a.shape), _unbroadcast(grad * a, b.shape)


def _concat_forward(values):
    if len(values) == 0:
        raise ShapeError("concat-last-axis: nothing to concatenate.")
    lead = values[0].shape[:-1]
    for v in values:
        if v.ndim == 0 or v.shape[:-1] != lead:
            raise ShapeError(
                f"concat-last-axis: incompatible shapes {[x.shape for x in values]}."
            )
    return np.concatenate(values, axis=-1), {}


def _concat_backward(grad, values, out, saved):
    splits = np.cumsum([v.shape[-1] for v in values])[:-1]
    return tuple(np.split(grad, splits, axis=-1))


def _reshape_forward(values, shape):
    (x,) = values
    if int(np.prod(shape)) != x.size:
        raise ShapeError(f"reshape: cannot reshape {x.shape} into {tuple(shape)}.")
    return x.reshape(shape), {}


def _reshape_backward(grad, values, out, saved, shape):
    return (grad.reshape(values[0].shape),)


def _transpose_forward(values, axes=None):
    (x,) = values
    if axes is not None and sorted(axes) != list(range(x.ndim)):
        raise ShapeError(f"transpose: axes {axes} invalid for shape {x.shape}.")
    return np.transpose(x, axes), {}


def _transpose_backward(grad, values, out, saved, axes=None):
    inverse = None if axes is None else tuple(np.argsort(axes))
    return (np.transpose(grad, inverse),)


# -------------------------------------------------------------- nonlinearities


def _relu_forward(values):
    (x,) = values
    return np.maximum(x, 0.0), {}


def _relu_backward(grad, values, out, saved):
    (x,) = values
    return (grad * (x > 0.0),)


def _row_normalize_forward(values, eps=ROW_NORM_EPS):
    (x,) = values
    if x.ndim not in (1, 2):
        raise ShapeError(f"row-l2-normalize: expected 1-d or 2-d input, got {x.shape}.")
    norms = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
    keep = norms > eps
    safe = np.where(keep, norms, 1.0)
    return np.where(keep, x / safe, x), {"norms": safe, "keep": keep}


def _row_normalize_backward(grad, values, out, saved, eps=ROW_NORM_EPS):
    dot = np.sum(grad * out, axis=-1, keepdims=True)
    normalized_grad = (grad - out * dot) / saved["norms"]
    return (np.where(saved["keep"], normalized_grad, grad),)


def _softmax_forward(values, groups=None, num_groups=None):
    (x,) = values
    if groups is None:
        if x.ndim not in (1, 2) or x.shape[-1] == 0:
            raise ShapeError(f"softmax-over-group: bad input shape {x.shape}.")
        e = np.exp(x - x.max(axis=-1, keepdims=True))
        return e / e.sum(axis=-1, keepdims=True), {}
    if x.ndim == 0 or x.shape[0] == 0:
        raise ShapeError("softmax-over-group: empty group.")
    groups = _check_index(groups, num_groups, OpKind.SOFTMAX_OVER_GROUP)
    if groups.shape[0] != x.shape[0]:
        raise ShapeError(
            f"softmax-over-group: {groups.shape[0]} group ids for {x.shape[0]} rows."
        )
    group_max = np.full((num_groups,) + x.shape[1:], -np.inf)
    np.maximum.at(group_max, groups, x)
    e = np.exp(x - group_max[groups])
    return e / segment_sum(e, groups, num_groups)[groups], {}


def _softmax_backward(grad, values, out, saved, groups=None, num_groups=None):
    weighted = grad * out
    if groups is None:
        return (weighted - out * weighted.sum(axis=-1, keepdims=True),)
    return (weighted - out * segment_sum(weighted, groups, num_groups)[groups],)


def _exp_forward(values):
    (x,) = values
    with np.errstate(over="ignore"):
        return np.exp(x), {}


def _exp_backward(grad, values, out, saved):
    return (grad * out,)


def _log_forward(values):
    (x,) = values
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(x), {}


def _log_backward(grad, values, out, saved):
    return (grad / values[0],)


# ------------------------------------------------------------------ reductions


def _sum_forward(values, axis=None):
    (x,) = values
    return np.sum(x, axis=axis), {}


def _sum_backward(grad, values, out, saved, axis=None):
    (x,) = values
    if axis is not None:
        grad = np.expand_dims(grad, axis)
    return (np.broadcast_to(grad, x.shape).copy(),)


def _mean_forward(values, axis=None):
    (x,) = values
    if x.size == 0:
        raise ShapeError("mean: empty input.")
    return np.mean(x, axis=axis), {}


def _mean_backward(grad, values, out, saved, axis=None):
    (x,) = values
    count = x.size if axis is None else x.shape[axis]
    if axis is not None:
        grad = np.expand_dims(grad, axis)
    return (np.broadcast_to(grad / count, x.shape).copy(),)


def _squared_norm_forward(values):
    (x,) = values
    return np.sum(x * x), {}


def _squared_norm_backward(grad, values, out, saved):
    return (2.0 * grad * values[0],)


def _cross_entropy_forward(values, labels):
    (x,) = values
    logits = np.atleast_2d(x)
    labels = np.atleast_1d(np.asarray(labels))
    m, num_classes = logits.shape
    if m == 0 or x.ndim > 2:
        raise ShapeError(f"cross-entropy-with-logits: bad logits shape {x.shape}.")
    labels = _check_index(labels, num_classes, OpKind.CROSS_ENTROPY_WITH_LOGITS)
    if labels.shape[0] != m:
        raise ShapeError(
            f"cross-entropy-with-logits: {labels.shape[0]} labels for {m} rows."
        )
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    losses = log_norm - shifted[np.arange(m), labels]
    probs = np.exp(shifted - log_norm[:, None])
    return np.mean(losses), {"probs": probs, "labels": labels}


def _cross_entropy_backward(grad, values, out, saved, labels):
    probs, labels = saved["probs"], saved["labels"]
    m = probs.shape[0]
    delta = probs.copy()
    delta[np.arange(m), labels] -= 1.0
    return ((grad / m * delta).reshape(values[0].shape),)


# ------------------------------------------------------------- index and masks


def _dropout_forward(values, mask, rate):
    (x,) = values
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout: rate must be in [0, 1), got {rate}.")
    if np.shape(mask) != x.shape:
        raise ShapeError(f"dropout: mask shape {np.shape(mask)} != input {x.shape}.")
    return x * mask / (1.0 - rate), {}


def _dropout_backward(grad, values, out, saved, mask, rate):
    return (grad * mask / (1.0 - rate),)


def _gather_forward(values, index):
    (x,) = values
    if x.ndim == 0:
        raise ShapeError("gather-rows: input must have rows.")
    index = _check_index(index, x.shape[0], OpKind.GATHER_ROWS)
    return x[index], {}


def _gather_backward(grad, values, out, saved, index):
    return (segment_sum(grad, index, values[0].shape[0]),)


def _scatter_forward(values, index, num_rows):
    (x,) = values
    index = _check_index(index, num_rows, OpKind.SCATTER_ADD_ROWS)
    if x.ndim == 0 or index.shape[0] != x.shape[0]:
        raise ShapeError(
            f"scatter-add-rows: {index.shape[0]} targets for input {x.shape}."
        )
    return segment_sum(x, index, num_rows), {}


def _scatter_backward(grad, values, out, saved, index, num_rows):
    return (grad[np.asarray(index, dtype=np.int64)],)


for _kind, _fwd, _bwd in (
    (OpKind.MATMUL, _matmul_forward, _matmul_backward),
    (OpKind.ADD, _add_forward, _add_backward),
    (OpKind.SUB, _sub_forward, _sub_backward),
    (OpKind.SCALAR_MUL, _scalar_mul_forward, _scalar_mul_backward),
    (OpKind.ELEMENTWISE_MUL, _mul_forward, _mul_backward),
    (OpKind.CONCAT_LAST_AXIS, _concat_forward, _concat_backward),
    (OpKind.RELU, _relu_forward, _relu_backward),
    (OpKind.ROW_L2_NORMALIZE, _row_normalize_forward, _row_normalize_backward),
    (OpKind.SOFTMAX_OVER_GROUP, _softmax_forward, _softmax_backward),
    (OpKind.EXP, _exp_forward, _exp_backward),
    (OpKind.LOG, _log_forward, _log_backward),
    (OpKind.SUM, _sum_forward, _sum_backward),
    (OpKind.MEAN, _mean_forward, _mean_backward),
    (OpKind.DROPOUT, _dropout_forward, _dropout_backward),
    (OpKind.GATHER_ROWS, _gather_forward, _gather_backward),
    (OpKind.SCATTER_ADD_ROWS, _scatter_forward, _scatter_backward),
    (OpKind.CROSS_ENTROPY_WITH_LOGITS, _cross_entropy_forward, _cross_entropy_backward),
    (OpKind.SQUARED_L2_NORM, _squared_norm_forward, _squared_norm_backward),
    (OpKind.RESHAPE, _reshape_forward, _reshape_backward),
    (OpKind.TRANSPOSE, _transpose_forward, _transpose_backward),
):
    register_op(_kind, _fwd, _bwd)


# ---------------------------------------------------------- functional wrappers


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    return forward_op(OpKind.MATMUL, a, b)


def add(a: TensorLike, b: TensorLike) -> Tensor:
    return forward_op(OpKind.ADD, a, b)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    return forward_op(OpKind.SUB, a, b)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    return forward_op(OpKind.ELEMENTWISE_MUL, a, b)


def scalar_mul(x: TensorLike, scalar: float) -> Tensor:
    return forward_op(OpKind.SCALAR_MUL, x, scalar=float(scalar))


def concat(tensors: Sequence[TensorLike]) -> Tensor:
    return forward_op(OpKind.CONCAT_LAST_AXIS, *tensors)


def reshape(x: TensorLike, shape: Sequence[int]) -> Tensor:
    return forward_op(OpKind.RESHAPE, x, shape=tuple(int(s) for s in shape))


def transpose(x: TensorLike, axes: Optional[Sequence[int]] = None) -> Tensor:
    return forward_op(
        OpKind.TRANSPOSE, x, axes=None if axes is None else tuple(axes)
    )


def relu(x: TensorLike) -> Tensor:
    return forward_op(OpKind.RELU, x)


def row_l2_normalize(x: TensorLike, eps: float = ROW_NORM_EPS) -> Tensor:
    return forward_op(OpKind.ROW_L2_NORMALIZE, x, eps=eps)


def softmax(
    x: TensorLike,
    groups: Optional[np.ndarray] = None,
    num_groups: Optional[int] = None,
) -> Tensor:
    """
    Softmax over the last axis, or, when `groups` is given, over the rows
    sharing a group id (separately for every column).
    """
    if groups is None:
        return forward_op(OpKind.SOFTMAX_OVER_GROUP, x)
    groups = np.asarray(groups, dtype=np.int64)
    if num_groups is None:
        num_groups = int(groups.max()) + 1 if groups.size > 0 else 0
    return forward_op(
        OpKind.SOFTMAX_OVER_GROUP, x, groups=groups, num_groups=int(num_groups)
    )


def exp(x: TensorLike) -> Tensor:
    return forward_op(OpKind.EXP, x)


def log(x: TensorLike) -> Tensor:
    return forward_op(OpKind.LOG, x)


def reduce_sum(x: TensorLike, axis: Optional[int] = None) -> Tensor:
    return forward_op(OpKind.SUM, x, axis=axis)


def reduce_mean(x: TensorLike, axis: Optional[int] = None) -> Tensor:
    return forward_op(OpKind.MEAN, x, axis=axis)


def squared_l2_norm(x: TensorLike) -> Tensor:
    return forward_op(OpKind.SQUARED_L2_NORM, x)


def cross_entropy_with_logits(
    logits: TensorLike, labels: Union[int, np.ndarray]
) -> Tensor:
    """Mean cross-entropy over the rows of `logits` (a 1-d input is one row)."""
    return forward_op(
        OpKind.CROSS_ENTROPY_WITH_LOGITS,
        logits,
        labels=np.atleast_1d(np.asarray(labels, dtype=np.int64)),
    )


def dropout(
    x: TensorLike,
    rate: float,
    rng: Optional[np.random.Generator] = None,
    mask: Optional[np.ndarray] = None,
) -> Tensor:
    """
    Inverted dropout. Either pass a fixed `mask` (treated as a constant) or an
    `rng` to draw one.
    """
    x = x if isinstance(x, Tensor) else Tensor(x)
    if rate == 0.0 and mask is None:
        return x
    if mask is None:
        if rng is None:
            raise ValueError("dropout needs either a mask or a random generator.")
        mask = (rng.random(x.shape) >= rate).astype(np.float64)
    return forward_op(
        OpKind.DROPOUT, x, mask=np.asarray(mask, dtype=np.float64), rate=float(rate)
    )


def gather_rows(x: TensorLike, index: np.ndarray) -> Tensor:
    return forward_op(OpKind.GATHER_ROWS, x, index=np.asarray(index, dtype=np.int64))


def scatter_add_rows(x: TensorLike, index: np.ndarray, num_rows: int) -> Tensor:
    return forward_op(
        OpKind.SCATTER_ADD_ROWS,
        x,
        index=np.asarray(index, dtype=np.int64),
        num_rows=int(num_rows),
    )

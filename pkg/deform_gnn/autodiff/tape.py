# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import contextlib
import contextvars
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import (
    Any,
    Callable,
    Dict,
    Iterator,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np


logger = logging.getLogger(__name__)


class ShapeError(ValueError):
    pass


class NonFiniteError(ValueError):
    pass


class OpKind(Enum):
    MATMUL = "matmul"
    ADD = "add"
    SUB = "sub"
    SCALAR_MUL = "scalar-mul"
    ELEMENTWISE_MUL = "elementwise-mul"
    CONCAT_LAST_AXIS = "concat-last-axis"
    RELU = "relu"
    ROW_L2_NORMALIZE = "row-l2-normalize"
    SOFTMAX_OVER_GROUP = "softmax-over-group"
    EXP = "exp"
    LOG = "log"
    SUM = "sum"
    MEAN = "mean"
    DROPOUT = "dropout"
    GATHER_ROWS = "gather-rows"
    SCATTER_ADD_ROWS = "scatter-add-rows"
    CROSS_ENTROPY_WITH_LOGITS = "cross-entropy-with-logits"
    SQUARED_L2_NORM = "squared-l2-norm"
    RESHAPE = "reshape"
    TRANSPOSE = "transpose"


class OpDef(NamedTuple):
    # forward(values, **attrs) -> (output, saved)
    forward: Callable[..., Tuple[np.ndarray, Dict[str, Any]]]
    # backward(grad, values, output, saved, **attrs) -> one gradient (or None) per input
    backward: Callable[..., Sequence[Optional[np.ndarray]]]


_OP_REGISTRY: Dict[OpKind, OpDef] = {}


def register_op(kind: OpKind, forward: Callable, backward: Callable) -> None:
    if kind in _OP_REGISTRY:
        raise ValueError(f"Op {kind.value} is already registered!")
    _OP_REGISTRY[kind] = OpDef(forward=forward, backward=backward)


def get_op(kind: OpKind) -> OpDef:
    if kind not in _OP_REGISTRY:
        raise ValueError(f"Unknown op kind {kind}!")
    return _OP_REGISTRY[kind]


@contextlib.contextmanager
def override_backward(kind: OpKind, backward: Callable) -> Iterator[None]:
    """
    Temporarily replace the adjoint of `kind`. Used by gradient checks to make
    sure a broken adjoint is actually detected.
    """
    original = get_op(kind)
    _OP_REGISTRY[kind] = OpDef(forward=original.forward, backward=backward)
    try:
        yield
    finally:
        _OP_REGISTRY[kind] = original


class Tensor:
    """
    A dense float64 array, optionally tracked by a `Tape` through `node_id`.
    Tensors without a node id are constants.
    """

    __slots__ = ("values", "node_id")

    def __init__(self, values: Any, node_id: Optional[int] = None):
        self.values = np.asarray(values, dtype=np.float64)
        self.node_id = node_id

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def is_tracked(self) -> bool:
        return self.node_id is not None

    def numpy(self) -> np.ndarray:
        return self.values

    def item(self) -> float:
        return float(self.values.reshape(-1)[0])

    def __repr__(self) -> str:
        tag = "const" if self.node_id is None else f"node={self.node_id}"
        return f"Tensor(shape={self.shape}, {tag})"

    def __add__(self, other):
        return forward_op(OpKind.ADD, self, other)

    def __radd__(self, other):
        return forward_op(OpKind.ADD, other, self)

    def __sub__(self, other):
        return forward_op(OpKind.SUB, self, other)

    def __rsub__(self, other):
        return forward_op(OpKind.SUB, other, self)

    def __mul__(self, other):
        if np.isscalar(other):
            return forward_op(OpKind.SCALAR_MUL, self, scalar=float(other))
        return forward_op(OpKind.ELEMENTWISE_MUL, self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return forward_op(OpKind.SCALAR_MUL, self, scalar=-1.0)

    def __matmul__(self, other):
        return forward_op(OpKind.MATMUL, self, other)


TensorLike = Union[Tensor, np.ndarray, float, int, Sequence]


def as_tensor(x: TensorLike) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


@dataclass
class TapeRecord:
    kind: OpKind
    inputs: Tuple[Optional[int], ...]
    output: int
    # forward inputs, kept for the adjoints and for replay of constant inputs
    input_values: Tuple[np.ndarray, ...]
    output_value: np.ndarray
    attrs: Dict[str, Any] = field(default_factory=dict)
    saved: Dict[str, Any] = field(default_factory=dict)


_ACTIVE_TAPE: "contextvars.ContextVar[Optional[Tape]]" = contextvars.ContextVar(
    "deform_gnn_active_tape", default=None
)


def active_tape() -> Optional["Tape"]:
    return _ACTIVE_TAPE.get()


class Tape:
    """
    Records every op applied to tracked tensors while it is the active tape:

        with Tape() as tape:
            x = tape.watch(np.array([3.0, 4.0]))
            loss = F.squared_l2_norm(x)
        grads = backward(tape, loss)
    """

    def __init__(self):
        self.records: List[TapeRecord] = []
        self.leaves: Dict[int, np.ndarray] = {}
        self.leaf_names: Dict[int, str] = {}
        self._next_id = 0
        self._tokens: List[contextvars.Token] = []

    def __enter__(self) -> "Tape":
        self._tokens.append(_ACTIVE_TAPE.set(self))
        return self

    def __exit__(self, exc_type, exc_value, traceback) -> None:
        _ACTIVE_TAPE.reset(self._tokens.pop())

    def __len__(self) -> int:
        return len(self.records)

    def _new_id(self) -> int:
        node_id = self._next_id
        self._next_id += 1
        return node_id

    def watch(self, values: Any, name: Optional[str] = None) -> Tensor:
        """Register `values` as a tracked leaf and return its tensor."""
        values = np.array(values, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise NonFiniteError(f"Leaf {name or ''} has non-finite values.")
        node_id = self._new_id()
        self.leaves[node_id] = values
        if name is not None:
            self.leaf_names[node_id] = name
        return Tensor(values, node_id=node_id)

    def watch_all(self, params: Mapping[str, np.ndarray]) -> Dict[str, Tensor]:
        return {name: self.watch(value, name=name) for name, value in params.items()}

    def record(
        self,
        kind: OpKind,
        inputs: Sequence[Tensor],
        output: np.ndarray,
        attrs: Dict[str, Any],
        saved: Dict[str, Any],
    ) -> Tensor:
        node_id = self._new_id()
        self.records.append(
            TapeRecord(
                kind=kind,
                inputs=tuple(t.node_id for t in inputs),
                output=node_id,
                input_values=tuple(t.values for t in inputs),
                output_value=output,
                attrs=attrs,
                saved=saved,
            )
        )
        return Tensor(output, node_id=node_id)

    def has_node(self, node_id: Optional[int]) -> bool:
        if node_id is None:
            return False
        return node_id in self.leaves or any(r.output == node_id for r in self.records)

    def replay(
        self, leaf_values: Optional[Mapping[int, np.ndarray]] = None
    ) -> Dict[int, np.ndarray]:
        """
        Re-run every recorded op in order. Leaves not given in `leaf_values`
        keep the values they were watched with. Returns all node values.
        """
        values: Dict[int, np.ndarray] = dict(self.leaves)
        for node_id, value in (leaf_values or {}).items():
            if node_id not in self.leaves:
                raise ValueError(f"Node {node_id} is not a leaf of this tape.")
            values[node_id] = np.asarray(value, dtype=np.float64)
        for rec in self.records:
            inputs = tuple(
                values[nid] if nid is not None else val
                for nid, val in zip(rec.inputs, rec.input_values)
            )
            out, _ = get_op(rec.kind).forward(inputs, **rec.attrs)
            values[rec.output] = out
        return values


def forward_op(kind: OpKind, *inputs: TensorLike, **attrs: Any) -> Tensor:
    """
    Evaluate one op. When any input is tracked the op is appended to the
    active tape and the returned tensor is tracked as well.
    """
    op = get_op(kind)
    tensors = tuple(as_tensor(x) for x in inputs)
    out, saved = op.forward(tuple(t.values for t in tensors), **attrs)
    out = np.asarray(out, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"Op {kind.value} produced a non-finite value.")
    if not any(t.is_tracked for t in tensors):
        return Tensor(out)
    tape = active_tape()
    if tape is None:
        raise ValueError(
            f"Op {kind.value} received a tracked tensor but no tape is active."
        )
    return tape.record(kind, tensors, out, attrs, saved)


def backward(tape: Tape, loss: Tensor) -> Dict[int, Tensor]:
    """
    Reverse sweep over `tape` seeded with d loss / d loss = 1.

    Returns:
        grads: {leaf node id: gradient tensor with the leaf's shape}. Leaves
            the loss does not depend on get zero gradients.
    """
    if loss.values.size != 1:
        raise ShapeError(f"Loss must be a scalar, got shape {loss.shape}.")
    if not tape.has_node(loss.node_id):
        raise ValueError("Loss is not recorded on the given tape.")

    grads: Dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.values)}
    for rec in reversed(tape.records):
        grad = grads.pop(rec.output, None)
        if grad is None:
            continue
        input_grads = get_op(rec.kind).backward(
            grad, rec.input_values, rec.output_value, rec.saved, **rec.attrs
        )
        for node_id, input_grad in zip(rec.inputs, input_grads):
            if node_id is None or input_grad is None:
                continue
            if node_id in grads:
                grads[node_id] = grads[node_id] + input_grad
            else:
                grads[node_id] = input_grad

    return {
        node_id: Tensor(grads.get(node_id, np.zeros_like(value)).reshape(value.shape))
        for node_id, value in tape.leaves.items()
    }

# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

from .tape import (  # noqa: F401
    NonFiniteError,
    OpKind,
    ShapeError,
    Tape,
    Tensor,
    backward,
    forward_op,
    override_backward,
)
from . import ops  # noqa: F401  (registers the op table)
from .grad_check import grad_check, grad_check_params, max_relative_error  # noqa: F401

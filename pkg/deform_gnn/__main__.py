# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import sys

from .cli import main


sys.exit(main())

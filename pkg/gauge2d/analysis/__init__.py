# Copyright (c) 2023 Graphcore Ltd. All rights reserved.

from .cartan import *
from .noether import *
from .verify import *

# Copyright (c) 2023 Graphcore Ltd. All rights reserved.

from .algebra import *
from .analysis import *

__version__ = "0.1.0"

# Copyright (c) 2023 Graphcore Ltd. All rights reserved.

from .jetfield import *
from .ore import *
from .orematrix import *

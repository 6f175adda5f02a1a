# Copyright (c) 2023 Graphcore Ltd. All rights reserved.

from .expressions import *
from .system_spec import *
from .report import *
from .run_pipeline import *

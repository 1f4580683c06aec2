# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT

from matrix_consensus.core.matgraph import (  # noqa: F401
    Gauge,
    MatrixWeightedNetwork,
    WeightMatrix,
)
from matrix_consensus.core.sim import SimMode, Simulator  # noqa: F401
from matrix_consensus.scenario import (  # noqa: F401
    Scenario,
    load_scenario,
    parse_scenario,
    run_scenario,
)


__version__ = "0.1.0"

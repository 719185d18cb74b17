import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from zleak.pdn import RlcLadder
from zleak.trace import ComplexTrace, FrequencyGrid, from_db_deg


@pytest.fixture
def grid500():
    return FrequencyGrid(1e9, 2e9, 500)


@pytest.fixture
def flat_baseline(grid500):
    value = from_db_deg(-0.5, 170.0)
    return ComplexTrace(grid500, np.full(grid500.points, value, dtype=np.complex128))


@pytest.fixture
def default_ladder():
    return RlcLadder.default_pdn()

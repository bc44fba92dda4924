from __future__ import annotations
import math

import numpy as np
import pytest

from modexp.channel import make_bsc, make_identity, make_useless
from modexp.exponents import OptimizationSettings
from modexp.utils import binary_entropy
from modexp.vnc import make_vnc, symmetric_vnc_spec

LN2 = math.log(2.0)

# hand-evaluated closed forms for BSC(0.1)
BSC01_E0_1 = math.log(2.0) - math.log(1.6)
BSC01_CAPACITY = LN2 - binary_entropy(0.1)
BSC01_E_EX0 = -0.5 * math.log(0.6)
BSC01_R_MINUS = LN2 - binary_entropy(0.6 / 1.6)
BSC01_R_PLUS = LN2 - binary_entropy(0.25)


@pytest.fixture(scope="session")
def fast_settings() -> OptimizationSettings:
    return OptimizationSettings(rho_grid=tuple(np.geomspace(1e-3, 1e3, 40).tolist()))


@pytest.fixture(scope="session")
def bsc01():
    return make_bsc(0.1)


@pytest.fixture(scope="session")
def identity2():
    return make_identity(2)


@pytest.fixture(scope="session")
def useless():
    return make_useless([0.2, 0.3, 0.5], k=2)


@pytest.fixture(scope="session")
def vnc_spec():
    return symmetric_vnc_spec(0.01)


@pytest.fixture(scope="session")
def vnc_channel(vnc_spec):
    return make_vnc(vnc_spec)

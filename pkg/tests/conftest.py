import math
from dataclasses import replace

import pytest

from amt_lab import REFERENCE_SCENARIO, default_vehicle
from amt_lab.kinematics import FinalClosure, ImpactClosure, InitialClosure

NI_MC = ImpactClosure(InitialClosure.NORMAL_IMPULSE, FinalClosure.MOMENTUM_CONSERVING)
NI_PF = ImpactClosure(InitialClosure.NORMAL_IMPULSE, FinalClosure.PAPER_FAITHFUL)
SP_MC = ImpactClosure(InitialClosure.STICKING_PIVOT, FinalClosure.MOMENTUM_CONSERVING)
SP_PF = ImpactClosure(InitialClosure.STICKING_PIVOT, FinalClosure.PAPER_FAITHFUL)
ALL_CLOSURES = (NI_MC, NI_PF, SP_MC, SP_PF)


@pytest.fixture
def vehicle():
    return default_vehicle()


@pytest.fixture
def long_vehicle():
    """Wheelbase wider than twice the radius of gyration: both wheels stay down at the final impact."""
    return replace(default_vehicle(), wheel_radius=0.12, wheelbase=0.45)


@pytest.fixture
def reference():
    return REFERENCE_SCENARIO


def deg(x):
    return math.radians(x)

import numpy as np
import pytest
from hypothesis import settings

from phaselock.fields import TrigPoly, parse_harmonics

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")

TWO_PI = 2 * np.pi


@pytest.fixture
def sin1():
    return TrigPoly.sin()


@pytest.fixture
def cos1():
    return TrigPoly.cos()


@pytest.fixture
def mixed():
    """sin x + 0.5 cos 2x, the non-special field used throughout."""
    return parse_harmonics(["s1=1", "c2=0.5"])

import numpy as np
import pytest

from rfsquid.params import PAPER_SYSTEM
from rfsquid.coupled import calibrate_effective_delta, loaded_capacitances


@pytest.fixture(scope="session")
def paper():
    return PAPER_SYSTEM


@pytest.fixture(scope="session")
def caps(paper):
    return loaded_capacitances(paper.qubit1.c, paper.qubit2.c, paper.c12)


@pytest.fixture(scope="session")
def op_15(paper):
    """Operating cjj biases with effective single-qubit gaps of 1.5 GHz."""
    return (calibrate_effective_delta(paper, 1, 1.5),
            calibrate_effective_delta(paper, 2, 1.5))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)

import json
import math

import numpy as np
import pytest

from rfsquid.constants import (CONSTANTS, E_CHARGE, GHZ, HBAR, PHI0,
                               energy_to_frequency, frequency_to_energy)
from rfsquid.params import (ParamError, PAPER_SYSTEM, SquidParams,
                            load_system_params, serialize_system_params)

PAPER_DOC = {
    "qubit1": {"ic_uA": 3.22697, "l_pH": 231.633, "lcjj_pH": 17.02, "c_fF": 119.5},
    "qubit2": {"ic_uA": 3.15711, "l_pH": 238.981, "lcjj_pH": 17.17, "c_fF": 116.4},
    "c12_fF": 132.0,
    "coupler": {"msq_over_l_pH": 10.77, "beta": 1.416, "m12_offset_pH": 1.848,
                "m12_max_abs_pH": 8.145},
}


def test_flux_quantum_convention():
    assert CONSTANTS.flux_quantum == pytest.approx(math.pi * HBAR / E_CHARGE, rel=1e-15)
    assert PHI0 == pytest.approx(2.0678338e-15, rel=1e-6)


def test_load_paper_document():
    sp = load_system_params(PAPER_DOC)
    assert sp.qubit1.ic == pytest.approx(3.22697e-6, rel=1e-12)
    assert sp.qubit1.l == pytest.approx(231.633e-12, rel=1e-12)
    assert sp.qubit2.lcjj == pytest.approx(17.17e-12, rel=1e-12)
    assert sp.qubit2.c == pytest.approx(116.4e-15, rel=1e-12)
    assert sp.c12 == pytest.approx(132.0e-15, rel=1e-12)
    assert sp == PAPER_SYSTEM


def test_nonpositive_value_rejected():
    doc = json.loads(json.dumps(PAPER_DOC))
    doc["qubit1"]["c_fF"] = -1.0
    with pytest.raises(ParamError):
        load_system_params(doc)


def test_missing_field_rejected():
    doc = json.loads(json.dumps(PAPER_DOC))
    del doc["qubit2"]["l_pH"]
    with pytest.raises(ParamError, match="l_pH"):
        load_system_params(doc)


def test_unknown_field_rejected():
    doc = json.loads(json.dumps(PAPER_DOC))
    doc["qubit1"]["bogus"] = 1.0
    with pytest.raises(ParamError, match="bogus"):
        load_system_params(doc)


def test_serialize_round_trip_byte_stable():
    sp = load_system_params(PAPER_DOC)
    doc1 = serialize_system_params(sp)
    text1 = json.dumps(doc1, sort_keys=True)
    doc2 = serialize_system_params(load_system_params(doc1))
    assert json.dumps(doc2, sort_keys=True) == text1


def test_cjj_inductance_ratio_warning():
    with pytest.warns(UserWarning, match="lcjj/l"):
        SquidParams.from_units(3.0, 100.0, 30.0, 100.0)


def test_energy_to_frequency_cases():
    assert energy_to_frequency(0.0) == 0.0
    assert energy_to_frequency(GHZ) == pytest.approx(1.0, rel=1e-14)
    assert energy_to_frequency(1.5 * 6.62607015e-34 * 1e9) == pytest.approx(1.5, rel=1e-12)
    assert frequency_to_energy(energy_to_frequency(1.7e-24)) == pytest.approx(1.7e-24)


@pytest.mark.parametrize("a", [0.0, 1e-3, 1.0, 17.5, -2.0])
def test_energy_to_frequency_linear(a):
    e = 3.3e-24
    assert energy_to_frequency(a * e) == pytest.approx(a * energy_to_frequency(e), abs=1e-18)

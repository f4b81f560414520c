"""Circuit parameter containers and config I/O.

All containers are frozen dataclasses holding SI values; constructors and
the JSON config format use the conventional units (uA, pH, fF).  Flux
biases everywhere in the package are fractions of the flux quantum.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

from .constants import PH, FF, UA


class ParamError(ValueError):
    """Invalid or missing circuit parameter."""


def _require_positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0:
        raise ParamError(f"{name} must be strictly positive, got {value!r}")
    return value


@dataclass(frozen=True)
class SquidParams:
    """One rf-SQUID: critical current, body and cjj-loop inductances, capacitance (SI)."""

    ic: float       # A
    l: float        # H
    lcjj: float     # H
    c: float        # F

    def __post_init__(self):
        for name in ("ic", "l", "lcjj", "c"):
            _require_positive(name, getattr(self, name))
        if self.lcjj / self.l > 0.2:
            warnings.warn(
                f"lcjj/l = {self.lcjj / self.l:.3f} > 0.2; adiabatic cjj "
                "elimination may be inaccurate", stacklevel=2)

    @classmethod
    def from_units(cls, ic_uA: float, l_pH: float, lcjj_pH: float, c_fF: float) -> "SquidParams":
        return cls(ic=ic_uA * UA, l=l_pH * PH, lcjj=lcjj_pH * PH, c=c_fF * FF)

    def to_units(self) -> dict:
        return {"ic_uA": self.ic / UA, "l_pH": self.l / PH,
                "lcjj_pH": self.lcjj / PH, "c_fF": self.c / FF}


@dataclass(frozen=True)
class CouplerParams:
    """Tunable-coupler calibration constants (SI inductances)."""

    msq_over_l: float    # H,  M_co,q^2 / L_co
    beta: float          # dimensionless 2 pi L_co I_c,co / Phi0
    m12_offset: float    # H, stray mutual at cos = 0
    m12_max_abs: float   # H, valid operating range |M12|

    def __post_init__(self):
        _require_positive("beta", self.beta)
        _require_positive("m12_max_abs", self.m12_max_abs)

    @classmethod
    def from_units(cls, msq_over_l_pH: float, beta: float, m12_offset_pH: float,
                   m12_max_abs_pH: float) -> "CouplerParams":
        return cls(msq_over_l=msq_over_l_pH * PH, beta=beta,
                   m12_offset=m12_offset_pH * PH, m12_max_abs=m12_max_abs_pH * PH)

    def to_units(self) -> dict:
        return {"msq_over_l_pH": self.msq_over_l / PH, "beta": self.beta,
                "m12_offset_pH": self.m12_offset / PH,
                "m12_max_abs_pH": self.m12_max_abs / PH}


@dataclass(frozen=True)
class SystemParams:
    """Two coupled rf-SQUIDs: both qubits, the fixed C12, and the coupler."""

    qubit1: SquidParams
    qubit2: SquidParams
    c12: float           # F, >= 0 (0 switches the capacitive coupling off)
    coupler: CouplerParams

    def __post_init__(self):
        if self.c12 < 0:
            raise ParamError(f"c12 must be non-negative, got {self.c12!r}")


# The fitted device of record: App-style parameter table plus the coupler
# calibration constants.  Used as the default config and in tests.
PAPER_COUPLER = CouplerParams.from_units(10.77, 1.416, 1.848, 8.145)

PAPER_SYSTEM = SystemParams(
    qubit1=SquidParams.from_units(3.22697, 231.633, 17.02, 119.5),
    qubit2=SquidParams.from_units(3.15711, 238.981, 17.17, 116.4),
    c12=132.0 * FF,
    coupler=PAPER_COUPLER,
)

_QUBIT_FIELDS = ("ic_uA", "l_pH", "lcjj_pH", "c_fF")
_COUPLER_FIELDS = ("msq_over_l_pH", "beta", "m12_offset_pH", "m12_max_abs_pH")


def _load_section(doc: dict, key: str, fields) -> dict:
    if key not in doc:
        raise ParamError(f"missing config section {key!r}")
    section = doc[key]
    out = {}
    for f in fields:
        if f not in section:
            raise ParamError(f"missing field {key}.{f}")
        try:
            out[f] = float(section[f])
        except (TypeError, ValueError):
            raise ParamError(f"field {key}.{f} is not a number: {section[f]!r}")
    unknown = set(section) - set(fields)
    if unknown:
        raise ParamError(f"unknown fields in {key}: {sorted(unknown)}")
    return out


def load_system_params(doc: dict) -> SystemParams:
    """Validate a config document (parsed JSON) into SystemParams."""
    if "c12_fF" not in doc:
        raise ParamError("missing field c12_fF")
    c12 = float(doc["c12_fF"])
    if c12 < 0:
        raise ParamError(f"c12_fF must be non-negative, got {c12}")
    q1 = SquidParams.from_units(**_load_section(doc, "qubit1", _QUBIT_FIELDS))
    q2 = SquidParams.from_units(**_load_section(doc, "qubit2", _QUBIT_FIELDS))
    co = CouplerParams.from_units(**_load_section(doc, "coupler", _COUPLER_FIELDS))
    return SystemParams(qubit1=q1, qubit2=q2, c12=c12 * FF, coupler=co)


def serialize_system_params(sys_params: SystemParams) -> dict:
    """Inverse of load_system_params (paper units, canonical key order)."""
    return {
        "qubit1": sys_params.qubit1.to_units(),
        "qubit2": sys_params.qubit2.to_units(),
        "c12_fF": sys_params.c12 / FF,
        "coupler": sys_params.coupler.to_units(),
    }


def load_system_params_file(path) -> SystemParams:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParamError(f"config is not valid JSON: {exc}") from exc
    return load_system_params(doc)


def dump_system_params_file(sys_params: SystemParams, path) -> None:
    with open(path, "w") as fh:
        json.dump(serialize_system_params(sys_params), fh, indent=2, sort_keys=True)
        fh.write("\n")

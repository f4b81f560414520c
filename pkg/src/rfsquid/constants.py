"""Physical constants and unit conversions.

Internal computations are SI throughout (J, Wb, F, H, A, s).  External
interfaces use GHz, pH, fF, uA and flux-quantum fractions; the helpers
here convert at the boundary.
"""

from dataclasses import dataclass

# CODATA 2018 (h and e are exact in the SI)
E_CHARGE = 1.602176634e-19      # C
H_PLANCK = 6.62607015e-34       # J s
HBAR = 1.05457181765e-34        # J s, h / 2 pi to 12 significant digits

import math

PHI0 = math.pi * HBAR / E_CHARGE   # flux quantum, Wb (h / 2e)

GHZ = 1e9 * H_PLANCK    # J per GHz of transition frequency
PH = 1e-12              # H per pH
FF = 1e-15              # F per fF
UA = 1e-6               # A per uA
NS = 1e-9               # s per ns


@dataclass(frozen=True)
class PhysicalConstants:
    """Flux quantum and Planck constants used by the whole package."""

    flux_quantum: float = PHI0
    planck_h: float = H_PLANCK
    hbar: float = HBAR

    def __post_init__(self):
        if not (self.flux_quantum > 0 and self.planck_h > 0 and self.hbar > 0):
            raise ValueError("physical constants must be strictly positive")


CONSTANTS = PhysicalConstants()


def energy_to_frequency(energy_j: float) -> float:
    """Convert an energy in joules to a transition frequency in GHz (E/h)."""
    return energy_j / GHZ


def frequency_to_energy(f_ghz: float) -> float:
    """Convert a frequency in GHz to an energy in joules (h*f)."""
    return f_ghz * GHZ

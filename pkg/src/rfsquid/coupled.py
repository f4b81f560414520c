"""Two-SQUID Hamiltonian in the truncated product eigenbasis.

Each SQUID is solved with its loaded capacitance; the coupled matrix adds
the inductive term M12 dPhi1 dPhi2 / L1 L2 and the capacitive term
C12 Q1 Q2 / (C1 C2 + (C1+C2) C12).  With real single-SQUID eigenvectors
the charge matrices are purely imaginary, so Q1 x Q2 is real and the
assembled matrix is real symmetric.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .constants import GHZ
from .grid import EigenSystem, EigenSolverError
from .params import SystemParams
from .squid import (solve_squid, matrix_elements, charge_matrix_imag,
                    TargetOutOfRangeError)
from scipy.optimize import brentq

DEFAULT_LEVELS = 10     # single-SQUID eigenstates kept per qubit


@dataclass(frozen=True)
class LoadedCapacitances:
    """Capacitances renormalized by the coupling capacitor, farads."""

    c1_tilde: float
    c2_tilde: float


def loaded_capacitances(c1: float, c2: float, c12: float) -> LoadedCapacitances:
    if c1 <= 0 or c2 <= 0:
        raise ValueError("bare capacitances must be positive")
    if c12 < 0:
        raise ValueError("coupling capacitance must be non-negative")
    return LoadedCapacitances(
        c1_tilde=c1 + c12 * c2 / (c2 + c12) if c12 else c1,
        c2_tilde=c2 + c12 * c1 / (c1 + c12) if c12 else c2,
    )


def charge_coupling_coefficient(c1: float, c2: float, c12: float) -> float:
    """Coefficient of Q1 Q2 in the two-SQUID Hamiltonian, 1/F."""
    return c12 / (c1 * c2 + (c1 + c2) * c12)


@dataclass(frozen=True)
class Controls:
    """One operating point: flux biases (Phi0 units) and mutual inductance (H)."""

    phiq1_x: float = 0.0
    phiq2_x: float = 0.0
    phicjj1_x: float = 0.5
    phicjj2_x: float = 0.5
    m12: float = 0.0


@dataclass(frozen=True)
class CoupledSpectrum:
    """Eigen-decomposition of the coupled system in the product basis."""

    energies: np.ndarray = field(repr=False)     # (k,) joules, ascending
    amplitudes: np.ndarray = field(repr=False)   # (k, N1, N2) product-basis overlaps
    n1: int = 0
    n2: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n1", self.amplitudes.shape[1])
        object.__setattr__(self, "n2", self.amplitudes.shape[2])
        self.energies.setflags(write=False)
        self.amplitudes.setflags(write=False)

    def energies_ghz(self) -> np.ndarray:
        return self.energies / GHZ


def build_coupled_hamiltonian(eig1: EigenSystem, eig2: EigenSystem,
                              flux1: np.ndarray, flux2: np.ndarray,
                              charge1: np.ndarray, charge2: np.ndarray,
                              m12: float, sys_params: SystemParams) -> np.ndarray:
    """Assemble the N1*N2 real symmetric coupled matrix (joules).

    flux_i are the real symmetric (Phi - Phi_x) matrices; charge_i may be
    the imaginary Q matrices or their real antisymmetric parts W = iQ.
    """
    n1, n2 = eig1.k, eig2.k
    if flux1.shape != (n1, n1) or flux2.shape != (n2, n2):
        raise ValueError("flux matrix shape does not match basis size")
    if charge1.shape != (n1, n1) or charge2.shape != (n2, n2):
        raise ValueError("charge matrix shape does not match basis size")
    w1 = charge1.imag if np.iscomplexobj(charge1) else charge1
    w2 = charge2.imag if np.iscomplexobj(charge2) else charge2
    h = np.kron(np.diag(eig1.energies), np.eye(n2))
    h += np.kron(np.eye(n1), np.diag(eig2.energies))
    p = sys_params
    h += (m12 / (p.qubit1.l * p.qubit2.l)) * np.kron(flux1, flux2)
    lam = charge_coupling_coefficient(p.qubit1.c, p.qubit2.c, p.c12)
    # Q1 Q2 = (-i W1)(-i W2) = -W1 W2 elementwise in the product basis
    h += -lam * np.kron(w1, w2)
    return 0.5 * (h + h.T)


def coupled_spectrum(h: np.ndarray, k: int, n1: int | None = None,
                     n2: int | None = None) -> CoupledSpectrum:
    """Lowest k eigenpairs of the coupled matrix with product-basis amplitudes.

    n1, n2 give the per-qubit basis sizes; a square split is assumed when
    omitted.
    """
    n = h.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}]")
    if n1 is None:
        n1 = int(round(np.sqrt(n)))
    if n2 is None:
        n2 = n // n1
    if n1 * n2 != n:
        raise ValueError(f"basis sizes {n1}x{n2} do not match matrix size {n}")
    try:
        w, v = scipy.linalg.eigh(h, subset_by_index=(0, k - 1))
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise EigenSolverError(f"coupled eigensolver failed: {exc}") from exc
    # fix eigenvector signs deterministically
    for j in range(v.shape[1]):
        i = int(np.argmax(np.abs(v[:, j])))
        if v[i, j] < 0:
            v[:, j] = -v[:, j]
    amps = np.ascontiguousarray(v.T.reshape(k, n1, n2))
    return CoupledSpectrum(energies=w, amplitudes=amps)


@functools.lru_cache(maxsize=4096)
def solve_coupled(sys_params: SystemParams, controls: Controls,
                  n_levels: int = DEFAULT_LEVELS, k: int = 6):
    """Full pipeline at one operating point: two SQUID solves + coupled solve.

    Returns (eig1, eig2, spectrum).  Memoized; sweeps hitting the same
    single-SQUID biases reuse those solves through solve_squid's cache.
    """
    p = sys_params
    caps = loaded_capacitances(p.qubit1.c, p.qubit2.c, p.c12)
    eig1 = solve_squid(p.qubit1, caps.c1_tilde, controls.phicjj1_x, controls.phiq1_x,
                       k=n_levels)
    eig2 = solve_squid(p.qubit2, caps.c2_tilde, controls.phicjj2_x, controls.phiq2_x,
                       k=n_levels)
    x1 = matrix_elements("flux", eig1, controls.phiq1_x)
    x2 = matrix_elements("flux", eig2, controls.phiq2_x)
    w1 = charge_matrix_imag(eig1)
    w2 = charge_matrix_imag(eig2)
    h = build_coupled_hamiltonian(eig1, eig2, x1, x2, w1, w2, controls.m12, p)
    return eig1, eig2, coupled_spectrum(h, k, n1=eig1.k, n2=eig2.k)


def transition_lines(spectrum: CoupledSpectrum, source: str = "ground") -> np.ndarray:
    """Transition frequencies eps_a - eps_source in GHz, a = 2..k.

    source 'ground' gives the solid spectroscopy lines, 'first-excited'
    the dashed ones (same list shifted down by the 1-2 splitting).
    """
    e = spectrum.energies_ghz()
    if len(e) < 2:
        raise ValueError("need at least two levels for transition lines")
    if source == "ground":
        return e[1:] - e[0]
    if source == "first-excited":
        return e[1:] - e[1]
    raise ValueError(f"unknown source {source!r}")


class AnticrossingError(RuntimeError):
    """Sweep does not bracket an interior gap minimum."""


@dataclass(frozen=True)
class Anticrossing:
    """Minimum gap over a sweep and the control value where it occurs."""

    gap_ghz: float
    location: float


def anticrossing(control: np.ndarray, gap: np.ndarray) -> Anticrossing:
    """Parabolic-refined minimum of a swept gap.

    control and gap are matched 1D arrays (gap in GHz); the minimum must
    be interior to the sweep.
    """
    control = np.asarray(control, dtype=float)
    gap = np.asarray(gap, dtype=float)
    if len(control) < 3 or len(control) != len(gap):
        raise AnticrossingError("need >= 3 matched sweep points")
    i = int(np.argmin(gap))
    if i == 0 or i == len(gap) - 1:
        raise AnticrossingError("gap minimum at sweep edge; widen the sweep")
    x0, x1, x2 = control[i - 1:i + 2]
    y0, y1, y2 = gap[i - 1:i + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    if a <= 0:
        return Anticrossing(gap_ghz=float(y1), location=float(x1))
    xv = -b / (2.0 * a)
    xv = float(np.clip(xv, x0, x2))
    c = y1 - a * x1**2 - b * x1
    yv = a * xv**2 + b * xv + c
    return Anticrossing(gap_ghz=float(max(yv, 0.0)), location=xv)


# --- effective single-qubit calibration ------------------------------------
#
# The measured single-qubit tunneling amplitude is the 1-2 transition of
# the coupled system with the partner SQUID monostable (phicjj = 0.5) and
# M12 = 0: capacitive loading and exchange are always present and shift
# the splitting well below the isolated value.

def effective_gap_ghz(sys_params: SystemParams, qubit: int, phicjj_x: float,
                      n_levels: int = DEFAULT_LEVELS) -> float:
    if qubit not in (1, 2):
        raise ValueError("qubit must be 1 or 2")
    controls = Controls(
        phicjj1_x=phicjj_x if qubit == 1 else 0.5,
        phicjj2_x=phicjj_x if qubit == 2 else 0.5,
    )
    _, _, spec = solve_coupled(sys_params, controls, n_levels=n_levels, k=2)
    e = spec.energies_ghz()
    return float(e[1] - e[0])


@functools.lru_cache(maxsize=512)
def calibrate_effective_delta(sys_params: SystemParams, qubit: int,
                              target_ghz: float,
                              n_levels: int = DEFAULT_LEVELS) -> float:
    """cjj bias at which the effective single-qubit gap equals target (GHz)."""
    lo, hi = 0.5 + 1e-9, 0.98
    g = lambda f: effective_gap_ghz(sys_params, qubit, f, n_levels) - target_ghz
    if g(lo) < 0:
        raise TargetOutOfRangeError(
            f"target {target_ghz} GHz above the effective-gap maximum")
    upper, prev = None, lo
    for f in np.linspace(0.55, hi, 24):
        if g(f) < 0:
            upper = f
            break
        prev = f
    if upper is None:
        raise TargetOutOfRangeError(
            f"target {target_ghz} GHz below the effective-gap minimum")
    return float(brentq(g, prev, upper, xtol=1e-10))

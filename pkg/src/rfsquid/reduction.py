"""Reduction of the lowest four coupled levels to a two-qubit Pauli model.

Route: per-qubit mixing angles localize the lowest doublet into left/right
well states, the four coupled eigenvectors are truncated onto the 2x2
product block and Gram-Schmidt orthonormalized in ascending energy order,
and the diagonal 4-level Hamiltonian is rotated into the computational
basis {dd, du, ud, uu} where the Pauli coefficients are read off.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import GHZ, PHI0
from .coupled import (Controls, CoupledSpectrum, DEFAULT_LEVELS,
                      loaded_capacitances, solve_coupled)
from .grid import EigenSystem
from .params import SquidParams, SystemParams
from .squid import (MonostablePotentialError, effective_potential,
                    potential_minima)

# Pauli matrices in the (down, up) basis ordering used throughout:
# sigma_z |down> = -|down>, sigma_z |up> = +|up>.
SIGMA_I = np.eye(2)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA_Y = np.array([[0.0, 1.0j], [-1.0j, 0.0]])
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]])
PAULI_1Q = (SIGMA_I, SIGMA_X, SIGMA_Y, SIGMA_Z)
PAULI_LABELS = "ixyz"

NA_SOFT_FLOOR = 0.95    # below this the reduction is flagged unreliable
NA_HARD_FLOOR = 0.80    # below this it is refused


class ReductionInvalidError(RuntimeError):
    """Truncated-state norm below the hard floor; two-state reduction invalid."""


@dataclass(frozen=True)
class MixingAngle:
    """Doublet rotation angle maximizing the left-well population of |down>."""

    theta: float
    left_population: float

    def __post_init__(self):
        if not -np.pi / 2 <= self.theta <= np.pi / 2:
            raise ValueError(f"theta out of range: {self.theta}")
        if not 0.5 - 1e-9 <= self.left_population <= 1.0 + 1e-9:
            raise ValueError(f"left population out of range: {self.left_population}")

    def rotation(self) -> np.ndarray:
        """Columns are |down>, |up> in (chi1, chi2) coordinates."""
        c, s = np.cos(self.theta), np.sin(self.theta)
        return np.array([[c, -s], [s, c]])


def find_barrier(p: SquidParams, phicjj_x: float, phiq_x: float) -> float:
    """Location (Phi0 units) of the U_eff maximum between the two wells."""
    mins = potential_minima(p, phicjj_x, phiq_x)
    if len(mins) < 2:
        raise MonostablePotentialError(
            "no barrier: potential is monostable at this bias")
    lo, hi = min(mins), max(mins)
    res = minimize_scalar(lambda x: -effective_potential(p, phicjj_x, phiq_x, x),
                          bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x)


def mixing_angle(eig: EigenSystem, barrier_location: float) -> MixingAngle:
    """Angle theta maximizing the left-well population of cos(t) chi1 + sin(t) chi2.

    barrier_location is the left/right divider in Phi0 units.  The grid
    cell containing the divider contributes half weight to each side so a
    symmetric doublet gives exactly theta = +-pi/4.
    """
    if eig.k < 2:
        raise ValueError("mixing angle needs the two lowest states")
    pts = eig.grid.points() / PHI0
    d = eig.grid.spacing / PHI0
    w = np.where(pts < barrier_location - d / 2, 1.0,
                 np.where(pts > barrier_location + d / 2, 0.0, 0.5))
    c1 = eig.states[:, 0]
    c2 = eig.states[:, 1]
    a = float(np.sum(w * c1 * c1))
    b = float(np.sum(w * c2 * c2))
    c = float(np.sum(w * c1 * c2))
    theta = 0.5 * np.arctan2(2.0 * c, a - b)
    if theta > np.pi / 2:
        theta -= np.pi
    pop = 0.5 * (a + b) + 0.5 * np.hypot(a - b, 2.0 * c)
    return MixingAngle(theta=float(theta), left_population=float(min(pop, 1.0)))


def pauli_decompose(h4: np.ndarray) -> np.ndarray:
    """Coefficients c[a, b] with H = sum c[a,b] sigma_a x sigma_b, a,b in {1,x,y,z}.

    Returns the complex 4x4 coefficient array; for a Hermitian input all
    coefficients are real up to rounding and the expansion reconstructs H
    exactly (Pauli products are trace-orthogonal).
    """
    h4 = np.asarray(h4)
    if h4.shape != (4, 4):
        raise ValueError("expected a 4x4 matrix")
    if np.linalg.norm(h4 - h4.conj().T) > 1e-9 * max(np.linalg.norm(h4), 1e-30):
        raise ValueError("matrix is not Hermitian")
    out = np.empty((4, 4), dtype=complex)
    for i, pa in enumerate(PAULI_1Q):
        for j, pb in enumerate(PAULI_1Q):
            out[i, j] = np.trace(h4 @ np.kron(pa, pb)) / 4.0
    return out


def pauli_compose(coef: np.ndarray) -> np.ndarray:
    """Inverse of pauli_decompose."""
    h = np.zeros((4, 4), dtype=complex)
    for i, pa in enumerate(PAULI_1Q):
        for j, pb in enumerate(PAULI_1Q):
            h += coef[i, j] * np.kron(pa, pb)
    return h


@dataclass(frozen=True)
class ReducedTwoQubitHamiltonian:
    """Effective two-qubit model, all coefficients in GHz.

    j is the 3x3 coupling tensor over (x, y, z); offset is the identity
    component (mean of the four retained energies).  na_min is the
    smallest truncated-state norm; below NA_SOFT_FLOOR the two-state
    picture is unreliable.
    """

    delta1: float
    delta2: float
    h1: float
    h2: float
    j: np.ndarray = field(repr=False)
    na_min: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.j.shape != (3, 3):
            raise ValueError("coupling tensor must be 3x3")
        self.j.setflags(write=False)

    @property
    def jxx(self) -> float:
        return float(self.j[0, 0])

    @property
    def jyy(self) -> float:
        return float(self.j[1, 1])

    @property
    def jzz(self) -> float:
        return float(self.j[2, 2])

    @property
    def jxz(self) -> float:
        return float(self.j[0, 2])

    @property
    def jzx(self) -> float:
        return float(self.j[2, 0])

    @property
    def reliable(self) -> bool:
        return self.na_min >= NA_SOFT_FLOOR

    def coefficient_array(self, include_offset: bool = True) -> np.ndarray:
        coef = np.zeros((4, 4))
        coef[0, 0] = self.offset if include_offset else 0.0
        coef[1, 0] = -self.delta1 / 2.0
        coef[0, 1] = -self.delta2 / 2.0
        coef[3, 0] = self.h1
        coef[0, 3] = self.h2
        coef[1:, 1:] = self.j
        return coef

    def to_matrix(self, include_offset: bool = False) -> np.ndarray:
        """4x4 matrix in the computational basis (dd, du, ud, uu), GHz.

        Requires the y-mixing couplings (xy, yx, yz, zy) to be negligible;
        those would make the matrix complex.
        """
        h = pauli_compose(self.coefficient_array(include_offset).astype(complex))
        if np.max(np.abs(h.imag)) > 1e-9 * max(1.0, np.max(np.abs(h.real))):
            raise ValueError("coupling tensor has y-mixing terms; matrix not real")
        return h.real


def reduce_to_qubits(spectrum: CoupledSpectrum, angle1: MixingAngle,
                     angle2: MixingAngle, indices=(0, 1, 2, 3)) -> ReducedTwoQubitHamiltonian:
    """Truncate, orthonormalize, rotate, and extract Pauli coefficients.

    indices selects which four coupled eigenstates form the computational
    manifold (default: the lowest four).
    """
    indices = tuple(indices)
    if len(indices) != 4 or len(spectrum.energies) <= max(indices):
        raise ValueError("reduction needs four available coupled levels")
    if spectrum.n1 < 2 or spectrum.n2 < 2:
        raise ValueError("amplitude tensor must cover two states per qubit")
    vecs = spectrum.amplitudes[list(indices), :2, :2].reshape(4, 4).T   # columns = eta_a
    na = np.linalg.norm(vecs, axis=0)
    na_min = float(na.min())
    if na_min < NA_HARD_FLOOR:
        raise ReductionInvalidError(
            f"truncated-state norm {na_min:.3f} below hard floor {NA_HARD_FLOOR}")
    # Gram-Schmidt in ascending energy order (QR with positive projections)
    q, r = np.linalg.qr(vecs / na)
    q = q * np.where(np.diag(r) >= 0, 1.0, -1.0)
    eps = spectrum.energies[list(indices)] / GHZ
    h_chi = (q * eps) @ q.T
    r2 = np.kron(angle1.rotation(), angle2.rotation())
    h_comp = r2.T @ h_chi @ r2
    coef = pauli_decompose(h_comp)
    imag = np.max(np.abs(coef.imag))
    if imag > 1e-10:
        raise ReductionInvalidError(f"complex Pauli coefficients ({imag:.2e} GHz)")
    c = coef.real
    return ReducedTwoQubitHamiltonian(
        delta1=-2.0 * c[1, 0], delta2=-2.0 * c[0, 1],
        h1=c[3, 0], h2=c[0, 3],
        j=c[1:, 1:].copy(), na_min=na_min, offset=c[0, 0])


def extract_by_matrix_matching(h_comp: np.ndarray) -> dict:
    """Independent parameter extraction from designated matrix entries.

    Cross-check for the Pauli projection: reads Delta, h and J directly
    off the computational-basis matrix pattern.
    """
    h = np.asarray(h_comp, dtype=float)
    d = np.diag(h)
    return {
        "offset": float(d.sum() / 4.0),
        "h1": float((-d[0] - d[1] + d[2] + d[3]) / 4.0),
        "h2": float((-d[0] + d[1] - d[2] + d[3]) / 4.0),
        "jzz": float((d[0] - d[1] - d[2] + d[3]) / 4.0),
        "delta1": float(-(h[0, 2] + h[1, 3])),
        "delta2": float(-(h[0, 1] + h[2, 3])),
        "jxx": float((h[1, 2] + h[0, 3]) / 2.0),
        "jyy": float((h[1, 2] - h[0, 3]) / 2.0),
        "jxz": float((h[1, 3] - h[0, 2]) / 2.0),
        "jzx": float((h[2, 3] - h[0, 1]) / 2.0),
    }


def block_eigenvalues_check(delta1: float, delta2: float, jyy: float) -> np.ndarray:
    """Analytic spectrum for Jxx = Jzz = h1 = h2 = 0, ascending (GHz).

    In the Hadamard frame the Hamiltonian is block diagonal and the
    eigenvalues are +-sqrt(Jyy^2 + ((Delta1 +- Delta2)/2)^2).
    """
    plus = np.hypot(jyy, (delta1 + delta2) / 2.0)
    minus = np.hypot(jyy, (delta1 - delta2) / 2.0)
    return np.sort([-plus, -minus, minus, plus])


@functools.lru_cache(maxsize=4096)
def reduced_at(sys_params: SystemParams, controls: Controls,
               n_levels: int = DEFAULT_LEVELS,
               k_search: int = 4) -> ReducedTwoQubitHamiltonian:
    """Full pipeline snapshot: circuit -> coupled spectrum -> Pauli model.

    With k_search > 4, the computational manifold is the four states with
    the largest qubit-block weight among the lowest k_search: spectator
    states (intra-well excitations pulled down by strong inductive
    coupling) can otherwise slip below the anti-aligned qubit pair at
    high barriers.
    """
    eig1, eig2, spec = solve_coupled(sys_params, controls, n_levels=n_levels,
                                     k=max(4, k_search))
    b1 = find_barrier(sys_params.qubit1, controls.phicjj1_x, controls.phiq1_x)
    b2 = find_barrier(sys_params.qubit2, controls.phicjj2_x, controls.phiq2_x)
    indices = (0, 1, 2, 3)
    if k_search > 4:
        na = np.linalg.norm(
            spec.amplitudes[:k_search, :2, :2].reshape(k_search, 4), axis=1)
        indices = tuple(sorted(np.argsort(-na, kind="stable")[:4].tolist()))
    return reduce_to_qubits(spec, mixing_angle(eig1, b1), mixing_angle(eig2, b2),
                            indices=indices)


def zero_out_coupling(red: ReducedTwoQubitHamiltonian, element: str) -> ReducedTwoQubitHamiltonian:
    """Copy with one coupling-tensor element forced to zero ('xx', 'yy', ...)."""
    axes = {"x": 0, "y": 1, "z": 2}
    i, jdx = axes[element[0]], axes[element[1]]
    j = np.array(red.j)
    j[i, jdx] = 0.0
    return replace(red, j=j)

import numpy as np
import pytest

from rfsquid.constants import GHZ, HBAR, PHI0
from rfsquid.grid import (BoundaryLeakError, FluxGrid, FluxGridOperator,
                          GridError, diagonalize)
from rfsquid.params import SquidParams
from rfsquid.squid import (MonostablePotentialError, TargetOutOfRangeError,
                           approx_effective_potential, assemble_hamiltonian,
                           build_single_hamiltonian, charge_matrix_imag,
                           effective_potential, find_cjj_for_delta, gap_ghz,
                           josephson_energy, make_grid, matrix_elements,
                           persistent_current, potential_minima, solve_squid,
                           two_loop_potential)

Q1 = SquidParams.from_units(3.22697, 231.633, 17.02, 119.5)
CT1 = 181.355e-15     # qubit-1 loaded capacitance with the paper C12


# --- grid types ---------------------------------------------------------------

def test_flux_grid_validation():
    FluxGrid(center=0.0, halfwidth=0.3, n=257)
    with pytest.raises(GridError):
        FluxGrid(center=0.0, halfwidth=0.3, n=256)     # even
    with pytest.raises(GridError):
        FluxGrid(center=0.0, halfwidth=0.3, n=63)      # too small
    with pytest.raises(GridError):
        FluxGrid(center=0.0, halfwidth=0.0, n=257)


def test_operator_hermiticity_enforced():
    g = FluxGrid(center=0.0, halfwidth=0.1, n=65)
    m = np.zeros((65, 65))
    m[0, 1] = 1.0
    with pytest.raises(GridError, match="Hermitian"):
        FluxGridOperator(grid=g, matrix=m)


# --- effective potential ------------------------------------------------------

def test_small_lcjj_limit_approaches_frozen_cjj_potential():
    p = SquidParams.from_units(3.22697, 231.633, 0.01, 119.5)
    phiq = np.linspace(-0.4, 0.4, 41)
    full = effective_potential(p, 0.72, 0.0, phiq)
    rough = approx_effective_potential(p, 0.72, 0.0, phiq)
    scale = np.max(np.abs(rough))
    assert np.max(np.abs(full - rough)) < 2e-4 * scale


def test_monostable_at_half_flux_quantum():
    mins = potential_minima(Q1, 0.5, 0.0)
    assert len(mins) == 1
    assert abs(mins[0]) < 1e-6


def test_symmetry_at_zero_tilt():
    phiq = np.linspace(-0.45, 0.45, 91)
    u = effective_potential(Q1, 0.72, 0.0, phiq)
    scale = np.max(u) - np.min(u)
    assert np.max(np.abs(u - u[::-1])) < 1e-10 * scale


def test_minimization_against_dense_scan_oracle():
    # brute-force minimum over a dense cjj grid at each phi_q
    phicjj_x, phiq_x = 0.70, 0.0002
    phiq = np.linspace(-0.45, 0.45, 17)
    cjj = phicjj_x + np.linspace(-0.25, 0.25, 20001)
    oracle = np.array([
        np.min(two_loop_potential(Q1, pq, cjj, phiq_x, phicjj_x)) for pq in phiq])
    u = effective_potential(Q1, phicjj_x, phiq_x, phiq)
    # the exact minimum may undercut the scan only by its discretization error
    scan_err = (0.5 / Q1.lcjj) * (2 * 0.25 / 20000 * PHI0) ** 2
    assert np.all(u <= oracle + 1e-30)
    assert np.all(oracle - u <= scan_err)


def test_bistable_depth_and_well_location_golden():
    # frozen from a 400k-point dense scan over phi_cjj (minimization oracle)
    mins = potential_minima(Q1, 0.70, 0.0)
    assert max(mins) == pytest.approx(0.19837201, abs=2e-6)
    u0 = effective_potential(Q1, 0.70, 0.0, 0.0)
    umin = effective_potential(Q1, 0.70, 0.0, max(mins))
    assert (u0 - umin) / GHZ == pytest.approx(73.478018, rel=1e-6)


# --- Hamiltonian build and diagonalization ------------------------------------

def test_harmonic_limit_gap_is_lc_frequency():
    grid = FluxGrid(center=0.0, halfwidth=0.12, n=601)
    u = (grid.points()) ** 2 / (2.0 * Q1.l)
    op = assemble_hamiltonian(u, CT1, grid)
    eig = diagonalize(op, 3)
    f_lc = 1.0 / (2.0 * np.pi * np.sqrt(Q1.l * CT1)) / 1e9
    gap = (eig.energies[1] - eig.energies[0]) / GHZ
    assert gap == pytest.approx(f_lc, rel=1e-3)


def test_grid_refinement_oracle_at_2ghz():
    f = find_cjj_for_delta(Q1, CT1, 2.0)
    g1 = gap_ghz(Q1, CT1, f)
    grid = make_grid(Q1, CT1, f, 0.0)
    fine = FluxGrid(center=grid.center, halfwidth=grid.halfwidth, n=2 * grid.n - 1)
    g2 = gap_ghz(Q1, CT1, f, 0.0, grid=fine)
    assert g2 == pytest.approx(g1, rel=5e-3)


def test_parity_alternation_at_zero_tilt():
    # moderate barrier: doublet well split, parity numerically clean
    eig = solve_squid(Q1, CT1, 0.66, 0.0, k=4)
    v = eig.states
    flip = v[::-1, :]
    assert np.linalg.norm(flip[:, 0] - v[:, 0]) < 1e-8      # ground even
    assert np.linalg.norm(flip[:, 1] + v[:, 1]) < 1e-8      # first odd


def test_boundary_leak_error_on_narrow_grid():
    grid = FluxGrid(center=0.0, halfwidth=0.33, n=257)   # wells at +-0.32
    with pytest.raises(BoundaryLeakError):
        build_single_hamiltonian(Q1, CT1, 0.72, 0.0, grid)


def test_diagonalize_trivial_diag():
    g = FluxGrid(center=0.0, halfwidth=0.1, n=65)
    m = np.diag(np.linspace(1.0, 65.0, 65))
    eig = diagonalize(FluxGridOperator(grid=g, matrix=m), 2)
    assert eig.energies == pytest.approx([1.0, 2.0])


def test_harmonic_ladder_spacing():
    grid = FluxGrid(center=0.0, halfwidth=0.14, n=801)
    u = (grid.points()) ** 2 / (2.0 * Q1.l)
    eig = diagonalize(assemble_hamiltonian(u, CT1, grid), 5)
    gaps = np.diff(eig.energies)
    assert np.max(np.abs(gaps / gaps[0] - 1.0)) < 1e-3


def test_two_level_regime_in_bistable_well():
    eig = solve_squid(Q1, CT1, 0.685, 0.0, k=6)
    e = eig.energies / GHZ
    assert (e[1] - e[0]) < 0.1 * (e[2] - e[1])


def test_orthonormality_and_ordering():
    eig = solve_squid(Q1, CT1, 0.68, 0.0001, k=8)
    overlap = eig.states.T @ eig.states
    assert np.max(np.abs(overlap - np.eye(8))) < 1e-10
    assert np.all(np.diff(eig.energies) >= 0)


# --- matrix elements -----------------------------------------------------------

def test_flux_diagonal_vanishes_by_parity():
    eig = solve_squid(Q1, CT1, 0.66, 0.0, k=4)
    x = matrix_elements("flux", eig, 0.0)
    assert abs(x[0, 0]) < 1e-10 * abs(x[0, 1])
    assert abs(x[1, 1]) < 1e-10 * abs(x[0, 1])
    assert x[0, 1] > 0     # doublet phase convention


def test_charge_diagonal_zero_for_real_states():
    eig = solve_squid(Q1, CT1, 0.68, 0.0003, k=4)
    q = matrix_elements("charge", eig, 0.0003)
    assert np.max(np.abs(np.diag(q))) < 1e-12 * np.max(np.abs(q))
    assert np.max(np.abs(q.real)) < 1e-12 * np.max(np.abs(q.imag))
    assert np.max(np.abs(q + q.T)) < 1e-12 * np.max(np.abs(q))


def test_commutator_recovers_ihbar_on_truncated_basis():
    eig = solve_squid(Q1, CT1, 0.67, 0.0, k=14)
    x = matrix_elements("flux", eig, 0.0)
    q = matrix_elements("charge", eig, 0.0)
    comm = x @ q - q @ x
    assert comm[0, 0] == pytest.approx(1j * HBAR, rel=0.01)


# --- persistent current ---------------------------------------------------------

def test_persistent_current_monostable_error():
    with pytest.raises(MonostablePotentialError):
        persistent_current(Q1, 0.5, 0.0)


def test_persistent_current_stationarity_consistency():
    phicjj = 1.0    # deepest barrier: cos(pi phicjj) = -1
    mins = potential_minima(Q1, phicjj, 0.0)
    star = max(mins)
    ip = persistent_current(Q1, phicjj, 0.0)
    formula = abs(Q1.ic * np.cos(np.pi * phicjj) * np.sin(2 * np.pi * star))
    assert ip == pytest.approx(formula, rel=0.01)


def test_persistent_current_monotone_toward_monostable():
    fs = np.linspace(0.68, 0.95, 12)
    ips = [persistent_current(Q1, f, 0.0) for f in fs]
    assert np.all(np.diff(ips) > 0)     # grows with barrier, away from 0.5


# --- gap calibration -------------------------------------------------------------

@pytest.mark.parametrize("target", [1.5, 2.0, 3.0])
def test_find_cjj_round_trip(target):
    f = find_cjj_for_delta(Q1, CT1, target)
    assert gap_ghz(Q1, CT1, f) == pytest.approx(target, abs=1e-3)


def test_find_cjj_out_of_range():
    with pytest.raises(TargetOutOfRangeError):
        find_cjj_for_delta(Q1, CT1, 300.0)
    with pytest.raises(TargetOutOfRangeError):
        find_cjj_for_delta(Q1, CT1, -1.0)


def test_gap_monotone_on_branch():
    fs = np.linspace(0.55, 0.69, 10)
    gaps = [gap_ghz(Q1, CT1, f) for f in fs]
    assert np.all(np.diff(gaps) < 0)


# --- module-level invariants ------------------------------------------------------

def test_hamiltonian_hermitian_and_leak_bounded():
    grid = make_grid(Q1, CT1, 0.67, 0.0002)
    op = build_single_hamiltonian(Q1, CT1, 0.67, 0.0002, grid)
    m = op.matrix
    assert np.max(np.abs(m - m.T)) <= 1e-12 * np.linalg.norm(m)
    ground = diagonalize(op, 1).states[:, 0]
    assert max(abs(ground[0]), abs(ground[-1])) < 1e-6 * np.max(np.abs(ground))


def test_grid_convergence_doubling():
    f = 0.665
    grid = make_grid(Q1, CT1, f, 0.0)
    e1 = solve_squid(Q1, CT1, f, 0.0, k=4, grid=grid).energies
    fine = FluxGrid(center=grid.center, halfwidth=grid.halfwidth, n=2 * grid.n - 1)
    e2 = solve_squid(Q1, CT1, f, 0.0, k=4, grid=fine).energies
    assert np.max(np.abs(e2 - e1) / np.abs(e1)) < 1e-3
    # one-sided convergence: refinement error shrinks by ~4x per doubling
    finer = FluxGrid(center=grid.center, halfwidth=grid.halfwidth, n=4 * grid.n - 3)
    e3 = solve_squid(Q1, CT1, f, 0.0, k=4, grid=finer).energies
    assert np.all(np.abs(e3 - e2) <= np.abs(e2 - e1))

import numpy as np
import pytest

from rfsquid.constants import PH, PHI0
from rfsquid.coupled import Controls, CoupledSpectrum, solve_coupled
from rfsquid.params import SystemParams
from rfsquid.reduction import (MixingAngle, ReducedTwoQubitHamiltonian,
                               ReductionInvalidError, block_eigenvalues_check,
                               extract_by_matrix_matching, find_barrier,
                               mixing_angle, pauli_compose, pauli_decompose,
                               reduce_to_qubits, reduced_at, zero_out_coupling,
                               SIGMA_X, SIGMA_Y, SIGMA_Z)
from rfsquid.squid import solve_squid


# --- mixing angle ----------------------------------------------------------------

def test_mixing_angle_symmetric_well(paper, caps):
    eig = solve_squid(paper.qubit1, caps.c1_tilde, 0.664, 0.0, k=2)
    ma = mixing_angle(eig, 0.0)
    assert abs(ma.theta) == pytest.approx(np.pi / 4, abs=1e-6)
    assert 0.5 < ma.left_population <= 1.0


def test_mixing_angle_strong_tilt_localizes(paper, caps):
    # deep tilt: ground state fully in the left well
    eig = solve_squid(paper.qubit1, caps.c1_tilde, 0.70, -3e-3, k=2)
    barrier = find_barrier(paper.qubit1, 0.70, -3e-3)
    ma = mixing_angle(eig, barrier)
    assert abs(ma.theta) < 0.02
    assert ma.left_population > 0.999


def test_mixing_angle_matches_dense_scan(paper, caps):
    eig = solve_squid(paper.qubit1, caps.c1_tilde, 0.664, 2e-4, k=2)
    barrier = find_barrier(paper.qubit1, 0.664, 2e-4)
    ma = mixing_angle(eig, barrier)
    pts = eig.grid.points() / PHI0
    d = eig.grid.spacing / PHI0
    w = np.where(pts < barrier - d / 2, 1.0,
                 np.where(pts > barrier + d / 2, 0.0, 0.5))
    thetas = np.linspace(-np.pi / 2, np.pi / 2, 31417)
    c1, c2 = eig.states[:, 0], eig.states[:, 1]
    pops = [np.sum(w * (np.cos(t) * c1 + np.sin(t) * c2) ** 2) for t in thetas]
    t_best = thetas[int(np.argmax(pops))]
    assert ma.theta == pytest.approx(t_best, abs=1e-4)
    assert ma.left_population == pytest.approx(np.max(pops), abs=1e-8)


def test_mixing_angle_requires_barrier(paper):
    from rfsquid.squid import MonostablePotentialError
    with pytest.raises(MonostablePotentialError):
        find_barrier(paper.qubit1, 0.5, 0.0)


# --- Pauli decomposition ------------------------------------------------------------

def test_pauli_decompose_zz():
    coef = pauli_decompose(np.kron(SIGMA_Z, SIGMA_Z))
    assert coef[3, 3] == pytest.approx(1.0)
    coef[3, 3] = 0.0
    assert np.max(np.abs(coef)) < 1e-14


def test_pauli_round_trip_known_model():
    j = np.zeros((3, 3))
    j[0, 0], j[1, 1], j[2, 2], j[0, 2] = -0.21, 0.45, 0.31, 0.04
    red = ReducedTwoQubitHamiltonian(delta1=1.41, delta2=1.39, h1=-0.17,
                                     h2=-0.16, j=j, offset=3.0)
    coef = pauli_decompose(red.to_matrix(include_offset=True))
    assert coef[0, 0].real == pytest.approx(3.0)
    assert -2 * coef[1, 0].real == pytest.approx(1.41)
    assert -2 * coef[0, 1].real == pytest.approx(1.39)
    assert coef[3, 0].real == pytest.approx(-0.17)
    assert coef[1:, 1:].real == pytest.approx(j)


def test_pauli_reconstruction_random_hermitian(rng):
    h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = h + h.conj().T
    coef = pauli_decompose(h)
    assert np.max(np.abs(pauli_compose(coef) - h)) < 1e-12


# --- block eigenvalue formula --------------------------------------------------------

def test_block_eigenvalues_example():
    e = block_eigenvalues_check(1.5, 1.5, 0.5)
    assert e == pytest.approx([-1.5811388, -0.5, 0.5, 1.5811388], abs=1e-6)


def test_block_eigenvalues_uncoupled_limit():
    e = block_eigenvalues_check(2.0, 1.2, 0.0)
    assert e == pytest.approx([-1.6, -0.4, 0.4, 1.6])


def test_block_eigenvalues_match_dense_diag(rng):
    for _ in range(10):
        d1, d2 = rng.uniform(0.2, 3.0, size=2)
        jyy = rng.uniform(-1.0, 1.0)
        j = np.zeros((3, 3))
        j[1, 1] = jyy
        h4 = ReducedTwoQubitHamiltonian(delta1=d1, delta2=d2, h1=0.0, h2=0.0,
                                        j=j).to_matrix()
        numeric = np.linalg.eigvalsh(h4)
        assert block_eigenvalues_check(d1, d2, jyy) == pytest.approx(numeric, abs=1e-12)


# --- full reduction -------------------------------------------------------------------

def test_uncoupled_reduction_recovers_single_gaps(paper):
    sp = SystemParams(qubit1=paper.qubit1, qubit2=paper.qubit2, c12=0.0,
                      coupler=paper.coupler)
    from rfsquid.coupled import calibrate_effective_delta
    f1 = calibrate_effective_delta(sp, 1, 2.0)
    f2 = calibrate_effective_delta(sp, 2, 1.5)
    red = reduced_at(sp, Controls(phicjj1_x=f1, phicjj2_x=f2, m12=0.0))
    assert abs(red.delta1) == pytest.approx(2.0, abs=1e-3)
    assert abs(red.delta2) == pytest.approx(1.5, abs=1e-3)
    assert abs(red.h1) < 1e-6 and abs(red.h2) < 1e-6
    assert np.max(np.abs(red.j)) < 1e-6


def test_reduction_preserves_spectrum(paper, op_15):
    f1, f2 = op_15
    c = Controls(phiq1_x=1e-4, phiq2_x=1e-4, phicjj1_x=f1, phicjj2_x=f2,
                 m12=0.55 * PH)
    red = reduced_at(paper, c)
    _, _, spec = solve_coupled(paper, c, k=4)
    ev = np.linalg.eigvalsh(red.to_matrix(include_offset=True))
    target = spec.energies_ghz()[:4]
    assert np.max(np.abs(ev - target) / np.abs(target)) < 1e-9


def test_extraction_paths_agree(paper, op_15):
    f1, f2 = op_15
    c = Controls(phiq1_x=1e-4, phiq2_x=1e-4, phicjj1_x=f1, phicjj2_x=f2,
                 m12=-1.0 * PH)
    red = reduced_at(paper, c)
    match = extract_by_matrix_matching(red.to_matrix(include_offset=True))
    assert match["delta1"] == pytest.approx(red.delta1, abs=1e-9)
    assert match["delta2"] == pytest.approx(red.delta2, abs=1e-9)
    assert match["h1"] == pytest.approx(red.h1, abs=1e-9)
    assert match["h2"] == pytest.approx(red.h2, abs=1e-9)
    assert match["jxx"] == pytest.approx(red.jxx, abs=1e-9)
    assert match["jyy"] == pytest.approx(red.jyy, abs=1e-9)
    assert match["jzz"] == pytest.approx(red.jzz, abs=1e-9)
    assert match["jxz"] == pytest.approx(red.jxz, abs=1e-9)


def test_forbidden_couplings_vanish(paper, op_15):
    f1, f2 = op_15
    for m12 in (-1.5, 0.0, 0.9):
        red = reduced_at(paper, Controls(phiq1_x=1e-4, phiq2_x=1e-4,
                                         phicjj1_x=f1, phicjj2_x=f2,
                                         m12=m12 * PH))
        forbidden = [red.j[0, 1], red.j[1, 0], red.j[1, 2], red.j[2, 1]]
        assert np.max(np.abs(forbidden)) < 1e-6


def test_zero_bias_forces_zero_h_and_xz(paper, op_15):
    f1, f2 = op_15
    red = reduced_at(paper, Controls(phicjj1_x=f1, phicjj2_x=f2, m12=0.55 * PH))
    assert abs(red.h1) < 1e-9 and abs(red.h2) < 1e-9
    assert abs(red.jxz) < 1e-9 and abs(red.jzx) < 1e-9


def test_jyy_nearly_constant_over_m12(paper, op_15):
    f1, f2 = op_15
    jyy, jxx, jzz = [], [], []
    for m in np.linspace(-2, 2, 9):
        red = reduced_at(paper, Controls(phiq1_x=1e-4, phiq2_x=1e-4,
                                         phicjj1_x=f1, phicjj2_x=f2, m12=m * PH))
        jyy.append(red.jyy)
        jxx.append(red.jxx)
        jzz.append(red.jzz)
    jyy, jxx, jzz = map(np.asarray, (jyy, jxx, jzz))
    assert (jyy.max() - jyy.min()) < 0.35 * np.abs(jyy).mean()
    assert (jxx.max() - jxx.min()) > 2.0 * (jyy.max() - jyy.min())
    assert jzz.max() - jzz.min() > 1.5    # Jzz tracks M12 strongly


def test_na_floor_raises():
    energies = np.arange(4.0)
    amps = np.zeros((4, 3, 3))
    amps[:, 2, 2] = 1.0    # all weight outside the 2x2 block
    spec = CoupledSpectrum(energies=energies, amplitudes=amps)
    ma = MixingAngle(theta=-np.pi / 4, left_population=0.9)
    with pytest.raises(ReductionInvalidError):
        reduce_to_qubits(spec, ma, ma)


def test_no_jxx_no_crossing_of_top_levels(paper, op_15):
    # without sigma_x sigma_x the two highest reduced levels cannot touch
    # while both tunneling amplitudes are nonzero
    f1, f2 = op_15
    min_gap_with, min_gap_without = np.inf, np.inf
    for m in np.linspace(0.3, 0.9, 13):
        red = reduced_at(paper, Controls(phicjj1_x=f1, phicjj2_x=f2, m12=m * PH))
        e_with = np.linalg.eigvalsh(red.to_matrix())
        e_without = np.linalg.eigvalsh(zero_out_coupling(red, "xx").to_matrix())
        min_gap_with = min(min_gap_with, e_with[3] - e_with[2])
        min_gap_without = min(min_gap_without, e_without[3] - e_without[2])
    assert min_gap_with < 0.02          # levels cross with Jxx present
    assert min_gap_without > 0.1        # and cannot without it


def test_proportionality_jyy_delta_over_cjj(paper):
    ratios = []
    for f in np.linspace(0.655, 0.672, 7):
        red = reduced_at(paper, Controls(phicjj1_x=f, phicjj2_x=f, m12=0.0))
        ratios.append(red.jyy / np.sqrt(abs(red.delta1 * red.delta2)))
    ratios = np.asarray(ratios)
    assert (ratios.max() - ratios.min()) / np.abs(ratios).mean() < 0.2

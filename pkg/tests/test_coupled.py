import numpy as np
import pytest

from rfsquid.constants import GHZ, PH
from rfsquid.coupled import (Anticrossing, AnticrossingError, Controls,
                             anticrossing, build_coupled_hamiltonian,
                             calibrate_effective_delta, coupled_spectrum,
                             effective_gap_ghz, loaded_capacitances,
                             solve_coupled, transition_lines)
from rfsquid.params import PAPER_SYSTEM, SquidParams, SystemParams
from rfsquid.squid import charge_matrix_imag, matrix_elements, solve_squid


def _uncapacitive(sys_params):
    return SystemParams(qubit1=sys_params.qubit1, qubit2=sys_params.qubit2,
                        c12=0.0, coupler=sys_params.coupler)


# --- loaded capacitances -------------------------------------------------------

def test_loaded_capacitances_identity_without_c12():
    caps = loaded_capacitances(119.5e-15, 116.4e-15, 0.0)
    assert caps.c1_tilde == 119.5e-15
    assert caps.c2_tilde == 116.4e-15


def test_loaded_capacitances_paper_values():
    caps = loaded_capacitances(119.5e-15, 116.4e-15, 132.0e-15)
    # direct evaluation of the loading formula
    assert caps.c1_tilde == pytest.approx(
        119.5e-15 + 132e-15 * 116.4e-15 / (116.4e-15 + 132e-15), rel=1e-14)
    assert caps.c1_tilde / 1e-15 == pytest.approx(181.355, abs=2e-3)
    assert caps.c2_tilde / 1e-15 == pytest.approx(179.120, abs=2e-3)


def test_loaded_capacitances_swap_symmetry():
    a = loaded_capacitances(100e-15, 150e-15, 70e-15)
    b = loaded_capacitances(150e-15, 100e-15, 70e-15)
    assert a.c1_tilde == b.c2_tilde
    assert a.c2_tilde == b.c1_tilde


def test_loaded_capacitances_exceed_bare():
    caps = loaded_capacitances(119.5e-15, 116.4e-15, 132.0e-15)
    assert caps.c1_tilde > 119.5e-15 and caps.c2_tilde > 116.4e-15


# --- coupled Hamiltonian assembly ------------------------------------------------

def test_uncoupled_spectrum_is_sum_of_singles(paper):
    sp = _uncapacitive(paper)
    c = Controls(phicjj1_x=0.661, phicjj2_x=0.664, m12=0.0)
    eig1, eig2, spec = solve_coupled(sp, c, n_levels=6, k=8)
    sums = np.sort((eig1.energies[:, None] + eig2.energies[None, :]).ravel())[:8]
    assert spec.energies == pytest.approx(sums, rel=1e-12)


def test_uncoupled_amplitudes_are_one_hot(paper):
    sp = _uncapacitive(paper)
    c = Controls(phicjj1_x=0.661, phicjj2_x=0.664, m12=0.0)
    _, _, spec = solve_coupled(sp, c, n_levels=6, k=4)
    for a in range(4):
        mags = np.sort(np.abs(spec.amplitudes[a]).ravel())
        assert mags[-1] == pytest.approx(1.0, abs=1e-9)
        assert mags[-2] < 1e-9


def test_hamiltonian_real_symmetric(paper, caps, op_15):
    f1, f2 = op_15
    eig1 = solve_squid(paper.qubit1, caps.c1_tilde, f1, 1e-4, k=8)
    eig2 = solve_squid(paper.qubit2, caps.c2_tilde, f2, 1e-4, k=8)
    x1 = matrix_elements("flux", eig1, 1e-4)
    x2 = matrix_elements("flux", eig2, 1e-4)
    w1 = charge_matrix_imag(eig1)
    w2 = charge_matrix_imag(eig2)
    h = build_coupled_hamiltonian(eig1, eig2, x1, x2, w1, w2, 1.0 * PH, paper)
    assert not np.iscomplexobj(h)
    assert np.max(np.abs(h - h.T)) <= 1e-12 * np.linalg.norm(h)


def test_shape_mismatch_rejected(paper, caps, op_15):
    f1, f2 = op_15
    eig1 = solve_squid(paper.qubit1, caps.c1_tilde, f1, 0.0, k=6)
    eig2 = solve_squid(paper.qubit2, caps.c2_tilde, f2, 0.0, k=6)
    x1 = matrix_elements("flux", eig1, 0.0)
    x2 = matrix_elements("flux", eig2, 0.0)
    w1 = charge_matrix_imag(eig1)
    with pytest.raises(ValueError, match="shape"):
        build_coupled_hamiltonian(eig1, eig2, x1, x2[:4, :4], w1, w1, 0.0, paper)


def test_basis_enlargement_convergence(paper, op_15):
    f1, f2 = op_15
    c = Controls(phiq1_x=1e-4, phiq2_x=1e-4, phicjj1_x=f1, phicjj2_x=f2,
                 m12=0.55 * PH)
    _, _, s8 = solve_coupled(paper, c, n_levels=8, k=4)
    _, _, s12 = solve_coupled(paper, c, n_levels=12, k=4)
    gap8 = s8.energies_ghz() - s8.energies_ghz()[0]
    gap12 = s12.energies_ghz() - s12.energies_ghz()[0]
    assert np.max(np.abs(gap8 - gap12)) < 0.01


def test_gap_asymmetry_iff_capacitive(paper, op_15):
    f1, f2 = op_15
    def gaps(sp, m12_ph):
        c = Controls(phicjj1_x=f1, phicjj2_x=f2, m12=m12_ph * PH)
        _, _, spec = solve_coupled(sp, c, k=4)
        e = spec.energies_ghz()
        return e[1:] - e[0]
    plus, minus = gaps(paper, 2.0), gaps(paper, -2.0)
    assert np.max(np.abs(plus - minus)) > 0.05      # capacitive asymmetry
    sp0 = _uncapacitive(paper)
    plus0, minus0 = gaps(sp0, 2.0), gaps(sp0, -2.0)
    assert np.max(np.abs(plus0 - minus0)) < 1e-9    # symmetric without C12


def test_exchange_symmetry(paper):
    swapped = SystemParams(qubit1=paper.qubit2, qubit2=paper.qubit1,
                           c12=paper.c12, coupler=paper.coupler)
    c = Controls(phiq1_x=2e-4, phiq2_x=-1e-4, phicjj1_x=0.664, phicjj2_x=0.661,
                 m12=0.8 * PH)
    cswap = Controls(phiq1_x=-1e-4, phiq2_x=2e-4, phicjj1_x=0.661,
                     phicjj2_x=0.664, m12=0.8 * PH)
    _, _, s1 = solve_coupled(paper, c, k=5)
    _, _, s2 = solve_coupled(swapped, cswap, k=5)
    assert s1.energies == pytest.approx(s2.energies, rel=1e-10)


def test_amplitude_completeness(paper, op_15):
    f1, f2 = op_15
    c = Controls(phicjj1_x=f1, phicjj2_x=f2, m12=1.0 * PH)
    _, _, spec = solve_coupled(paper, c, k=6)
    norms = np.sum(np.abs(spec.amplitudes) ** 2, axis=(1, 2))
    assert norms == pytest.approx(np.ones(6), abs=1e-10)


# --- transition lines -------------------------------------------------------------

def test_transition_lines_uncoupled_product(paper):
    sp = _uncapacitive(paper)
    f1 = calibrate_effective_delta(sp, 1, 2.5)
    f2 = calibrate_effective_delta(sp, 2, 1.5)
    c = Controls(phicjj1_x=f1, phicjj2_x=f2, m12=0.0)
    _, _, spec = solve_coupled(sp, c, k=4)
    lines = transition_lines(spec, "ground")
    assert lines[0] == pytest.approx(1.5, abs=1e-3)
    assert lines[1] == pytest.approx(2.5, abs=1e-3)
    assert lines[2] == pytest.approx(4.0, abs=2e-3)


def test_transition_lines_shift_relation(paper, op_15):
    f1, f2 = op_15
    c = Controls(phicjj1_x=f1, phicjj2_x=f2, m12=0.7 * PH)
    _, _, spec = solve_coupled(paper, c, k=5)
    solid = transition_lines(spec, "ground")
    dashed = transition_lines(spec, "first-excited")
    shift = spec.energies_ghz()[1] - spec.energies_ghz()[0]
    assert dashed == pytest.approx(solid - shift, abs=1e-12)


# --- anticrossing extraction --------------------------------------------------------

def test_anticrossing_parabola_exact():
    x = np.linspace(-1, 1, 21)
    gap = 0.3 + 2.0 * (x - 0.123) ** 2
    ac = anticrossing(x, gap)
    assert ac.location == pytest.approx(0.123, abs=1e-12)
    assert ac.gap_ghz == pytest.approx(0.3, abs=1e-12)


def test_anticrossing_edge_minimum_rejected():
    x = np.linspace(0, 1, 11)
    with pytest.raises(AnticrossingError):
        anticrossing(x, 1.0 + x)


def test_effective_gap_below_isolated(paper, caps):
    from rfsquid.squid import gap_ghz
    f = 0.664
    iso = gap_ghz(paper.qubit2, caps.c2_tilde, f)
    eff = effective_gap_ghz(paper, 2, f)
    assert eff < iso    # capacitive exchange with the monostable partner

"""Coupled rf-SQUID flux-qubit simulator and analysis toolkit."""

from .constants import CONSTANTS, PHI0, energy_to_frequency, frequency_to_energy
from .params import (CouplerParams, PAPER_COUPLER, PAPER_SYSTEM, ParamError,
                     SquidParams, SystemParams, load_system_params,
                     serialize_system_params)
from .grid import (BoundaryLeakError, EigenSystem, FluxGrid, FluxGridOperator,
                   diagonalize)
from .squid import (build_single_hamiltonian, effective_potential,
                    find_cjj_for_delta, gap_ghz, matrix_elements,
                    persistent_current, MonostablePotentialError,
                    TargetOutOfRangeError)
from .coupled import (Anticrossing, Controls, CoupledSpectrum,
                      LoadedCapacitances, anticrossing,
                      build_coupled_hamiltonian, calibrate_effective_delta,
                      coupled_spectrum, loaded_capacitances, solve_coupled,
                      transition_lines)
from .reduction import (MixingAngle, ReducedTwoQubitHamiltonian,
                        ReductionInvalidError, block_eigenvalues_check,
                        mixing_angle, pauli_decompose, reduce_to_qubits,
                        reduced_at)
from .stoquastic import (LocalTransform, StoquasticityVerdict, apply_transform,
                         decide_stoquastic, is_stoquastic_in_basis,
                         nonstoq_region_map)
from .dynamics import (DistortionModel, OscillationResult, PulseSchedule,
                       Trajectory, compensate_distortion, estimate_frequency,
                       evolve, oscillation_map, run_oscillation_protocol,
                       snapshot_reduced_hamiltonian)
from .fitting import (FitResult, SpectroscopySweep, bias_for_m12, coupler_m12,
                      fit_coupler, fit_persistent_current, fit_spectroscopy,
                      nelder_mead)

__version__ = "0.1.0"

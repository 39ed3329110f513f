"""Effective spin models for trapped ions coupled by pushing forces."""

from .errors import (AccuracyError, CapacityError, ConfigError,
                     ConvergenceError, DegenerateModeError, GeometryError,
                     InstabilityError, SimulationError, TruncationWarning)
from .crystal import (Geometry, IonCrystal, TrapConfig, hex_ion_count,
                      hex_shells_for_count, make_hex_lattice,
                      make_microtrap_chain, potential_gradient,
                      solve_paul_chain_equilibrium)
from .modes import (AXES, BetaParam, ElasticityMatrix, ModeData, beta,
                    elasticity_matrix, normal_modes, radial_freq_for_beta,
                    stiffness_sign)
from .couplings import (CouplingModel, EtaMatrix, ForceSpec,
                        build_coupling_model, combine_models,
                        coupling_from_inverse_k, coupling_from_modes,
                        effective_field, eta_for_force, eta_matrix,
                        force_for_eta, stiff_limit_dipolar)
from .spinsim import (GroundState, Observables, SpinHamiltonian,
                      SweepResult, SweepSchedule, build_spin_hamiltonian,
                      cosine_ramp, ground_state, linear_ramp, observables,
                      pauli_pair, pauli_site, spin_hamiltonian_from_terms,
                      structure_factor, tfim_sweep, time_evolve,
                      time_evolve_schedule)
from .fullsim import (FidelityReport, FullHamiltonian, ThermalSpec,
                      average_fidelity, build_full_hamiltonian, canonical_S,
                      closed_form_spin_operator, cross_axis_operator,
                      error_estimate, fidelity, matched_radial_forces,
                      reference_transformed_operator,
                      transformed_hamiltonian, xy_gate_experiment)

__version__ = "0.1.0"

"""adiaprod: evolution operators of time-dependent finite-dimensional
Hamiltonians (possibly non-Hermitian, possibly degenerate) via adiabatic
product expansions, with closed-form fast paths for the exactly solvable
two-level, oscillator and Stark families and a brute-force reference
propagator as arbiter."""

from .errors import (ChartSingularity, ConditionViolated, ConfigError,
                     ConsistencyError, DefectiveMatrix, DegeneracyChange,
                     GridMismatch, LevelCrossing, NonConvergence,
                     NonpositiveFrequency, SingularK, SingularTransform,
                     SolverError, VanishingOffDiagonal, ZeroField)
from .expansion import (AdiabaticStep, ExpansionStatus, LevelTrack,
                        ProductExpansion, adiabatic_propagator,
                        adiabatic_step, assemble, canonical_transform,
                        coupling_matrices, dynamical_factor, expand,
                        track_levels)
from .linops import (BiorthoEigensystem, EigenLevel, bi_eigensystem,
                     fro_norm, matrix_exp)
from .oracle import Comparison, OracleConfig, compare, convergence_order, propagate
from .oscillator import OscillatorScenario, dyson_propagator, eta_hamiltonian
from .oscillator import solve_trajectory, to_twolevel
from .signals import HamiltonianSignal, PropagatorTable, uniform_grid
from .stark import StarkScenario, build_hamiltonian, exact_solve
from .twolevel import (ClassTag, TwoLevelCoeffs, classify, class3_step,
                       detrace, dynamical_data, eigendata, modified_expansion,
                       offdiag_couplings, pauli_conjugate, reduce_to_class3,
                       rephase_to_class3, transformed_coeffs,
                       two_factor_expansion)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

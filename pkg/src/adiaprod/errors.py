"""Failure types raised by the solver pipelines.

Class names double as the machine-readable failure names the CLI prints
on exit code 2.
"""


class SolverError(Exception):
    """Base class for numerical failures of the solver pipelines."""


class DefectiveMatrix(SolverError):
    """Geometric multiplicity below grouped algebraic multiplicity."""


class NonConvergence(SolverError):
    """The underlying eigensolver failed to converge."""


class LevelCrossing(SolverError):
    """Eigenvalue gap fell below the degeneracy threshold along the grid."""


class DegeneracyChange(SolverError):
    """Degeneracy structure changed along the grid."""


class ChartSingularity(SolverError):
    """The two-level eigenvector chart degenerates (a + E ~ 0)."""


class SingularK(SolverError):
    """A per-level dynamical factor is not invertible at working precision."""


class SingularTransform(SolverError):
    """Transformation matrix not invertible on the grid."""


class VanishingOffDiagonal(SolverError):
    """b(t) or c(t) vanishes where the Class-3 machinery needs them."""


class ConditionViolated(SolverError):
    """The exact-solvability proportionality condition does not hold."""


class ZeroField(SolverError):
    """Field magnitude r(t) is not strictly positive."""


class NonpositiveFrequency(SolverError):
    """Oscillator frequency is not strictly positive on the grid."""


class GridMismatch(SolverError):
    """Two tables do not share a common time grid."""


class ConsistencyError(SolverError):
    """Two independent computation routes disagree beyond tolerance."""


class ConfigError(Exception):
    """Invalid run configuration (CLI exit code 1)."""

"""Independent brute-force propagator and error metrics.

Fixed-step classical RK4 on i dU/dt = H(t) U at sub-grid resolution; this is
the arbiter every closed form and expansion is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch
from .quadrature import fro_norms
from .signals import HamiltonianSignal, PropagatorTable


@dataclass(frozen=True)
class OracleConfig:
    substeps_per_grid_step: int = 4

    def __post_init__(self):
        if self.substeps_per_grid_step < 1:
            raise ValueError("substeps must be >= 1")


def propagate(H: HamiltonianSignal,
              cfg: OracleConfig = OracleConfig()) -> PropagatorTable:
    """Integrate i dU/dt = H(t) U with U(0) = 1, recorded on H's grid."""
    sub = cfg.substeps_per_grid_step
    steps = (len(H.grid) - 1) * sub
    ts = np.linspace(0.0, H.tau, 2 * steps + 1)
    A = -1j * H.value(ts)
    h = H.tau / steps
    d = H.dim
    A0, Am, A1 = A[0:-1:2], A[1::2], A[2::2]
    I = np.eye(d, dtype=complex)
    K1 = A0
    K2 = Am + (h / 2.0) * np.einsum("kij,kjl->kil", Am, K1)
    K3 = Am + (h / 2.0) * np.einsum("kij,kjl->kil", Am, K2)
    K4 = A1 + h * np.einsum("kij,kjl->kil", A1, K3)
    M = I + (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4)

    out = np.empty((len(H.grid), d, d), dtype=complex)
    out[0] = I
    cur = I.copy()
    rec = 1
    for k in range(steps):
        cur = M[k] @ cur
        if (k + 1) % sub == 0:
            out[rec] = cur
            rec += 1
    return PropagatorTable(H.grid, out)


@dataclass
class Comparison:
    sup_fro: float
    final_fro: float
    per_t: np.ndarray


def compare(Ua: PropagatorTable, Ub: PropagatorTable) -> Comparison:
    """Frobenius distance per grid point, its sup, and the value at tau."""
    if Ua.grid.shape != Ub.grid.shape or not np.allclose(
            Ua.grid, Ub.grid, rtol=1e-12, atol=1e-12):
        raise GridMismatch("propagator tables are on different grids")
    per_t = fro_norms(Ua.values - Ub.values)
    return Comparison(float(np.max(per_t)), float(per_t[-1]), per_t)


def convergence_order(H: HamiltonianSignal,
                      cfg: OracleConfig = OracleConfig()) -> float:
    """Observed order from step halving (self-Richardson).

    Returns log2 of the error ratio between consecutive resolutions; a
    degenerate test (both differences at rounding level) reports inf,
    meaning the integrator is exact for this input.
    """
    sub = cfg.substeps_per_grid_step
    U1 = propagate(H, OracleConfig(sub))
    U2 = propagate(H, OracleConfig(2 * sub))
    U4 = propagate(H, OracleConfig(4 * sub))
    e12 = float(np.max(fro_norms(U1.values - U2.values)))
    e24 = float(np.max(fro_norms(U2.values - U4.values)))
    scale = float(np.max(fro_norms(U4.values)))
    floor = 1e-14 * max(1.0, scale)
    if e24 < floor:
        return float("inf")
    return float(np.log2(e12 / e24))

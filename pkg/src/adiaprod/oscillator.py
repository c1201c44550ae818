"""Classical oscillator front-end: xddot + omega(t)^2 x = 0.

The state vector (x, v) obeys a Schroedinger-form equation with the Class-3
two-level coefficients a = 0, b = i, c = -i omega^2, so every Class-3 tool
applies; this module adds the frequency-reparameterized Hamiltonian and its
time-ordered (Dyson) series.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import oracle as oracle_mod
from .errors import NonpositiveFrequency
from .quadrature import (central_difference, continuous_sqrt,
                         cumulative_integral, cumulative_quadratic)
from .signals import HamiltonianSignal, PropagatorTable, uniform_grid
from .twolevel import (TwoLevelCoeffs, class3_adiabatic_factor,
                       modified_expansion)


@dataclass
class OscillatorScenario:
    omega: Callable[[np.ndarray], np.ndarray]
    x0: float
    v0: float
    tau: float
    domega: Callable[[np.ndarray], np.ndarray] | None = None

    def frequency(self, ts: np.ndarray) -> np.ndarray:
        w = np.asarray(self.omega(ts), dtype=float) * np.ones(np.shape(ts))
        if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
            raise NonpositiveFrequency("omega(t) must be positive and finite")
        return w

    def frequency_rate(self, ts: np.ndarray, dt_hint: float) -> np.ndarray:
        if self.domega is not None:
            return np.asarray(self.domega(ts), dtype=float) * np.ones(np.shape(ts))
        h = dt_hint / 2.0
        return (self.frequency(np.asarray(ts) + h)
                - self.frequency(np.asarray(ts) - h)) / (2.0 * h)


def to_twolevel(s: OscillatorScenario, steps: int) -> TwoLevelCoeffs:
    """a = 0, b = i, c = -i omega^2; E(t) = omega(t), f(t) = omega(t)."""
    grid = uniform_grid(s.tau, steps)
    w = s.frequency(grid)
    n = len(grid)
    zero = np.zeros(n, dtype=complex)
    b = np.full(n, 1j)
    c = -1j * w**2
    wd = s.frequency_rate(grid, grid[1] - grid[0])
    dc = -2j * w * wd
    coeffs = TwoLevelCoeffs(grid, zero, b, c, da=zero, db=zero, dc=dc)
    # smoothness guard: second differences of omega must stay finite
    if not np.all(np.isfinite(central_difference(wd, grid[1] - grid[0]))):
        raise NonpositiveFrequency("omega(t) is not smooth on the grid")
    return coeffs


def hamiltonian_signal(s: OscillatorScenario, steps: int) -> HamiltonianSignal:
    def value(ts):
        w = s.frequency(ts)
        out = np.zeros((len(ts), 2, 2), dtype=complex)
        out[:, 0, 1] = 1j
        out[:, 1, 0] = -1j * w**2
        return out

    return HamiltonianSignal.from_function(2, s.tau, steps, value)


@dataclass
class EtaHamiltonian:
    """Frequency-reparameterized transformed Hamiltonian.

    eta(t) = 2 int omega is strictly increasing; in the eta variable (and
    with the state rescaled so omega(0) = 1) the first iterate reads
    Htilde(eta) = Etilde (sin(eta) sigma_1 + cos(eta) sigma_3),
    Etilde = i omega' / (2 omega) with omega' = d omega / d eta.
    """

    eta: np.ndarray           # (K+1,), image of the time grid
    values: np.ndarray        # (K+1, 2, 2)
    rate: np.ndarray          # Etilde on the grid
    grid: np.ndarray          # the underlying time grid


def eta_hamiltonian(s: OscillatorScenario, steps: int) -> EtaHamiltonian:
    grid = uniform_grid(s.tau, steps)
    dt = grid[1] - grid[0]
    w = s.frequency(grid)
    wd = s.frequency_rate(grid, dt)
    eta = 2.0 * cumulative_integral(w, dt)
    rate = 1j * wd / (4.0 * w**2)      # i (domega/deta) / (2 omega)
    vals = np.zeros((len(grid), 2, 2), dtype=complex)
    vals[:, 0, 0] = rate * np.cos(eta)
    vals[:, 0, 1] = rate * np.sin(eta)
    vals[:, 1, 0] = rate * np.sin(eta)
    vals[:, 1, 1] = -rate * np.cos(eta)
    return EtaHamiltonian(eta, vals, rate, grid)


def dyson_tables(eh: EtaHamiltonian, n: int) -> np.ndarray:
    """Partial sums of the time-ordered series, tabulated along eta.

    Term k is the ordered k-fold cumulative integral
    G_k(eta) = -i int_0^eta Htilde(s) G_{k-1}(s) ds (no 1/k! in this form).
    """
    if n < 0:
        raise ValueError("term count must be >= 0")
    npts = len(eh.eta)
    total = np.tile(np.eye(2, dtype=complex), (npts, 1, 1))
    G = total.copy()
    for _ in range(n):
        integrand = -1j * np.einsum("kij,kjl->kil", eh.values, G)
        G = cumulative_quadratic(eh.eta, integrand)
        total = total + G
    return total


def dyson_propagator(eh: EtaHamiltonian, eta_end: float | None = None,
                     n: int = 2) -> np.ndarray:
    """n-term time-ordered series of Htilde, evaluated at eta_end."""
    tables = dyson_tables(eh, n)
    if eta_end is None:
        return tables[-1]
    k = int(np.searchsorted(eh.eta, eta_end))
    k = min(max(k, 0), len(eh.eta) - 1)
    if abs(eh.eta[k] - eta_end) > 1e-9 * max(1.0, abs(eta_end)):
        raise ValueError("eta_end is not a tabulated eta value")
    return tables[k]


def adiabatic_factor_table(s: OscillatorScenario, steps: int) -> PropagatorTable:
    """Closed-form U0 of the oscillator (f = omega, regular form)."""
    grid = uniform_grid(s.tau, steps)
    dt = grid[1] - grid[0]
    w = s.frequency(grid).astype(complex)
    eta = 2.0 * cumulative_integral(w, dt)
    u = continuous_sqrt(w / w[0])
    u0, _ = class3_adiabatic_factor(eta, u, u * w[0], grid)
    return u0


def propagator(s: OscillatorScenario, method: str, steps: int,
               order: int = 2,
               oracle_cfg: oracle_mod.OracleConfig | None = None
               ) -> PropagatorTable:
    """Evolution operator of the (x, v) system by the selected method.

    method: "oracle", "product" (modified expansion, ``order`` factors), or
    "dyson" (U0 times the ``order``-term ordered series of the first iterate).
    """
    if method == "oracle":
        cfg = oracle_cfg or oracle_mod.OracleConfig()
        return oracle_mod.propagate(hamiltonian_signal(s, steps), cfg)
    if method == "product":
        coeffs = to_twolevel(s, steps)
        return modified_expansion(coeffs, max(1, order)).assemble()
    if method == "dyson":
        eh = eta_hamiltonian(s, steps)
        u0 = adiabatic_factor_table(s, steps)
        series = dyson_tables(eh, order)
        w0 = float(s.frequency(np.zeros(1))[0])
        # undo the internal omega(0) = 1 state rescaling: S = diag(1, 1/w0)
        S = np.diag([1.0, 1.0 / w0]).astype(complex)
        Sinv = np.diag([1.0, w0]).astype(complex)
        dressed = np.einsum("ij,kjl,lm->kim", Sinv, series, S)
        vals = np.einsum("kij,kjl->kil", u0.values, dressed)
        vals[0] = np.eye(2)
        return PropagatorTable(u0.grid, vals)
    raise ValueError(f"unknown oscillator method {method!r}")


def solve_trajectory(s: OscillatorScenario, method: str, steps: int,
                     order: int = 2) -> np.ndarray:
    """Table of (t, x, v), from the selected propagator applied to (x0, v0)."""
    table = propagator(s, method, steps, order)
    psi0 = np.array([s.x0, s.v0], dtype=complex)
    traj = np.einsum("kij,j->ki", table.values, psi0)
    out = np.empty((len(table.grid), 3))
    out[:, 0] = table.grid
    out[:, 1] = traj[:, 0].real
    out[:, 2] = traj[:, 1].real
    return out


def wronskian(traj_a: np.ndarray, traj_b: np.ndarray) -> np.ndarray:
    """x_a v_b - x_b v_a along the grid (constant for exact dynamics)."""
    return traj_a[:, 1] * traj_b[:, 2] - traj_b[:, 1] * traj_a[:, 2]

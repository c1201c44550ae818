"""Spin-1 quadrupole Stark system in the planar-field case.

H(t) = (lambda r^2 / 2) [[1, 0, e^{-2 i theta}], [0, 2, 0], [e^{2 i theta}, 0, 1]]
has the doubly degenerate level lambda r^2 above the nondegenerate 0; the
adiabatic canonical transformation maps it onto a nondegenerate spin-1/2-like
triple, and theta-dot proportional to r^2 makes the problem exactly solvable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConditionViolated, ZeroField
from .linops import BiorthoEigensystem, EigenLevel
from .quadrature import central_difference, cumulative_integral
from .signals import HamiltonianSignal, PropagatorTable, uniform_grid

SIGMA3_BLOCK = np.diag([1.0, 0.0, -1.0]).astype(complex)


def block_sigma(index: int, theta0: float = 0.0) -> np.ndarray:
    """Pauli matrices in the spin-1 corner block, dressed by the initial angle.

    The t = 0 eigenbasis carries e^{+-2 i theta0} phases on the corner
    entries; at theta0 = 0 these are the plain corner-block Pauli matrices.
    """
    p = np.exp(-2j * theta0)
    if index == 1:
        out = np.zeros((3, 3), dtype=complex)
        out[0, 2] = p
        out[2, 0] = p.conjugate()
        return out
    if index == 2:
        out = np.zeros((3, 3), dtype=complex)
        out[0, 2] = -1j * p
        out[2, 0] = 1j * p.conjugate()
        return out
    if index == 3:
        return SIGMA3_BLOCK.copy()
    raise ValueError("index must be 1, 2 or 3")


def block_exp_sigma1(phi: np.ndarray, theta0: float = 0.0) -> np.ndarray:
    """exp(i phi Sigma_1) for scalar or array phi; Sigma_1^2 is a projector."""
    phi = np.atleast_1d(np.asarray(phi, dtype=complex))
    s1 = block_sigma(1, theta0)
    proj = s1 @ s1
    I = np.eye(3, dtype=complex)
    out = (I[None] + (np.cos(phi) - 1.0)[:, None, None] * proj
           + 1j * np.sin(phi)[:, None, None] * s1)
    return out if out.shape[0] > 1 else out[0]


@dataclass
class StarkScenario:
    lam: float
    r: Callable[[np.ndarray], np.ndarray]
    theta: Callable[[np.ndarray], np.ndarray]
    tau: float
    dtheta: Callable[[np.ndarray], np.ndarray] | None = None

    def field(self, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ts = np.atleast_1d(ts)
        r = np.asarray(self.r(ts), dtype=float) * np.ones(len(ts))
        th = np.asarray(self.theta(ts), dtype=float) * np.ones(len(ts))
        if np.any(r <= 0.0) or not np.all(np.isfinite(r)):
            raise ZeroField("field magnitude r(t) must stay positive")
        return r, th

    def angle_rate(self, ts: np.ndarray, dt_hint: float) -> np.ndarray:
        ts = np.atleast_1d(ts)
        if self.dtheta is not None:
            return np.asarray(self.dtheta(ts), dtype=float) * np.ones(len(ts))
        h = dt_hint / 2.0
        return (np.asarray(self.theta(ts + h)) - np.asarray(self.theta(ts - h))) / (2 * h)

    @classmethod
    def from_components(cls, lam: float, e1, e2, tau: float) -> "StarkScenario":
        """Build from in-plane field components (continuous angle unwrap
        happens on the evaluation grid, so prefer (r, theta) input)."""
        def r(ts):
            return np.hypot(np.asarray(e1(ts)), np.asarray(e2(ts)))

        def theta(ts):
            return np.unwrap(np.arctan2(np.asarray(e2(ts)), np.asarray(e1(ts))))

        return cls(lam, r, theta, tau)


def build_hamiltonian(s: StarkScenario, ts: np.ndarray) -> np.ndarray:
    """Hamiltonian matrices at the given times; (3, 3) for scalar input."""
    scalar = np.isscalar(ts)
    r, th = s.field(np.atleast_1d(ts))
    pref = s.lam * r**2 / 2.0
    out = np.zeros((len(r), 3, 3), dtype=complex)
    out[:, 0, 0] = pref
    out[:, 1, 1] = 2.0 * pref
    out[:, 2, 2] = pref
    out[:, 0, 2] = pref * np.exp(-2j * th)
    out[:, 2, 0] = pref * np.exp(2j * th)
    return out[0] if scalar else out


def hamiltonian_signal(s: StarkScenario, steps: int) -> HamiltonianSignal:
    return HamiltonianSignal.from_function(3, s.tau, steps,
                                           lambda ts: build_hamiltonian(s, ts))


def eigensystem(s: StarkScenario, t: float) -> BiorthoEigensystem:
    """Closed-form orthonormal eigenvectors; left = right (Hermitian case)."""
    r, th = s.field(np.atleast_1d(t))
    r0, th0 = float(r[0]), float(th[0])
    e = np.exp(2j * th0)
    psi1 = np.array([[-1.0], [0.0], [e]], dtype=complex) / np.sqrt(2.0)
    psi2 = np.array([[1.0, 0.0], [0.0, 1.0], [e, 0.0]], dtype=complex)
    psi2[:, 0] /= np.sqrt(2.0)
    return BiorthoEigensystem(3, [
        EigenLevel(0.0 + 0j, psi1, psi1.copy()),
        EigenLevel(complex(s.lam * r0**2), psi2, psi2.copy()),
    ])


@dataclass
class StarkAdiabatic:
    u0: PropagatorTable
    rho: np.ndarray       # lambda int r^2
    theta: np.ndarray     # unwrapped angle on the grid
    k1: np.ndarray        # scalar dynamical factor of the 0 level
    k2: np.ndarray        # (K+1, 2, 2) factor of the degenerate level


def adiabatic_propagator(s: StarkScenario, steps: int) -> StarkAdiabatic:
    """Closed-form U0.

    Connections are A^1 = -dtheta and A^2 = diag(-dtheta, 0), so
    K1 = e^{-i (theta - theta0)} and K2 = e^{-i rho} diag(e^{-i(theta-theta0)}, 1)
    with rho = lambda int r^2. Assembled entrywise, U0 is unitary and equal
    to the identity at t = 0.
    """
    grid = uniform_grid(s.tau, steps)
    dt = grid[1] - grid[0]
    r, th = s.field(grid)
    th0 = th[0]
    rho = s.lam * cumulative_integral(r**2, dt)
    thm = th - th0
    thp = th + th0
    ero = np.exp(-1j * rho)
    n = len(grid)
    u0 = np.zeros((n, 3, 3), dtype=complex)
    u0[:, 0, 0] = (1.0 + ero) * np.exp(-1j * thm) / 2.0
    u0[:, 0, 2] = (-1.0 + ero) * np.exp(-1j * thp) / 2.0
    u0[:, 1, 1] = ero
    u0[:, 2, 0] = (-1.0 + ero) * np.exp(1j * thp) / 2.0
    u0[:, 2, 2] = (1.0 + ero) * np.exp(1j * thm) / 2.0
    u0[0] = np.eye(3)

    k1 = np.exp(-1j * thm)
    k2 = np.zeros((n, 2, 2), dtype=complex)
    k2[:, 0, 0] = ero * np.exp(-1j * thm)
    k2[:, 1, 1] = ero
    return StarkAdiabatic(PropagatorTable(grid, u0), rho, th, k1, k2)


def h1(s: StarkScenario, steps: int) -> HamiltonianSignal:
    """Transformed Hamiltonian:
    H1 = -thetadot [sin(rho) Sigma_2 + cos(rho) Sigma_3] (Sigma dressed by
    theta0), with the nondegenerate eigenvalues {-thetadot, 0, +thetadot}.
    """
    grid = uniform_grid(s.tau, steps)
    dt = grid[1] - grid[0]
    r, th = s.field(grid)
    rho = s.lam * cumulative_integral(r**2, dt)
    thd = s.angle_rate(grid, dt)
    s2 = block_sigma(2, th[0])
    s3 = block_sigma(3, th[0])
    vals = (-thd[:, None, None]
            * (np.sin(rho)[:, None, None] * s2 + np.cos(rho)[:, None, None] * s3))
    return HamiltonianSignal.from_table(grid, vals)


@dataclass
class RotatingFrame:
    signal: HamiltonianSignal        # H1' = (lambda r^2/2) Sigma_1 - thetadot Sigma_3
    gauge: np.ndarray                # g(t) = exp(-i rho Sigma_1 / 2)
    rho: np.ndarray

    def reassemble(self, u_prime: PropagatorTable) -> PropagatorTable:
        """Propagator of H1 from the rotating-frame one: U1 = g^-1 U1'."""
        vals = np.einsum("kij,kjl->kil", np.linalg.inv(self.gauge), u_prime.values)
        return PropagatorTable(u_prime.grid, vals)


def rotating_frame(s: StarkScenario, steps: int) -> RotatingFrame:
    """Gauge away the rho-precession of the transformed Hamiltonian.

    With the coupling kept explicit the Sigma_1 coefficient is lambda r^2/2
    (the rho integrand over 2), reducing to r^2/2 at lambda = 1.
    """
    grid = uniform_grid(s.tau, steps)
    dt = grid[1] - grid[0]
    r, th = s.field(grid)
    rho = s.lam * cumulative_integral(r**2, dt)
    thd = s.angle_rate(grid, dt)
    s1 = block_sigma(1, th[0])
    s3 = block_sigma(3, th[0])
    vals = ((s.lam * r**2 / 2.0)[:, None, None] * s1
            - thd[:, None, None] * s3)
    gauge = block_exp_sigma1(-rho / 2.0, th[0])
    return RotatingFrame(HamiltonianSignal.from_table(grid, vals), gauge, rho)


def exact_solve(s: StarkScenario, c: float, steps: int,
                eps_exact: float = 1e-10) -> PropagatorTable:
    """Exact propagator for the family thetadot = c r^2.

    U(t) = U0(t) e^{i rho Sigma_1/2} exp(-i [(lambda/2) Sigma_1 - c Sigma_3] R),
    R = int_0^t r^2. Raises ConditionViolated when the proportionality test
    fails beyond eps_exact (relative to sup r^2).
    """
    grid = uniform_grid(s.tau, steps)
    dt = grid[1] - grid[0]
    r, th = s.field(grid)
    thd = s.angle_rate(grid, dt)
    sup_r2 = float(np.max(r**2))
    tol = eps_exact * sup_r2
    if s.dtheta is None:
        tol = max(tol, 100.0 * dt**2 * sup_r2 * max(1.0, abs(c)))
    defect = float(np.max(np.abs(thd - c * r**2)))
    if defect > tol:
        raise ConditionViolated(
            f"thetadot deviates from c r^2 by {defect:.3e} (> {tol:.3e})")

    adiab = adiabatic_propagator(s, steps)
    th0 = th[0]
    R = cumulative_integral(r**2, dt)
    M = (s.lam / 2.0) * block_sigma(1, th0) - c * block_sigma(3, th0)
    w, V = np.linalg.eig(M)
    Vinv = np.linalg.inv(V)
    phases = np.exp(-1j * np.outer(R, w))          # (K+1, 3)
    expM = np.einsum("ij,kj,jl->kil", V, phases, Vinv)
    rot = block_exp_sigma1(adiab.rho / 2.0, th0)
    vals = np.einsum("kij,kjl,klm->kim", adiab.u0.values, rot, expM)
    vals[0] = np.eye(3)
    return PropagatorTable(grid, vals)

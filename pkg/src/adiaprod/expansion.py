"""Generic product-expansion engine.

Tracks a smooth biorthonormal eigensystem along the time grid, builds the
per-level dynamical factors and the adiabatic factor U0, transforms the
Hamiltonian into the next iterate, and repeats until the expansion
terminates, cycles, or hits the factor cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import (ConsistencyError, DegeneracyChange, LevelCrossing,
                     SingularK, SingularTransform)
from .linops import (EPS_DEG, BiorthoEigensystem, EigenLevel,
                     cluster_eigenvalues, pair_eigensystem)
from .quadrature import (central_difference, cumulative_integral, expm2,
                         fro_norms)
from .signals import HamiltonianSignal, PropagatorTable


@dataclass
class LevelTrack:
    """Eigensystem tables with level order and in-level gauge continuous in t."""

    grid: np.ndarray
    dim: int
    eigenvalues: list[np.ndarray]      # per level: (K+1,)
    right: list[np.ndarray]            # per level: (K+1, dim, N)
    left: list[np.ndarray]

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def n_levels(self) -> int:
        return len(self.eigenvalues)

    @property
    def degeneracies(self) -> list[int]:
        return [r.shape[2] for r in self.right]

    def system_at(self, k: int) -> BiorthoEigensystem:
        levels = [EigenLevel(complex(self.eigenvalues[n][k]),
                             self.right[n][k], self.left[n][k])
                  for n in range(self.n_levels)]
        return BiorthoEigensystem(self.dim, levels)

    def right_derivatives(self) -> list[np.ndarray]:
        return [central_difference(r, self.dt) for r in self.right]


def track_levels(H: HamiltonianSignal, eps_deg: float = EPS_DEG,
                 initial: BiorthoEigensystem | None = None) -> LevelTrack:
    """Eigendecompose H on its grid and glue the levels continuously.

    Level matching between adjacent grid points maximizes left/right subspace
    overlaps; the in-level basis is fixed by the unitary polar factor of the
    overlap block. ``initial`` anchors the t=0 gauge (default: solver output).
    """
    Hs = H.sample()
    npts = len(H.grid)
    w_all, V_all = np.linalg.eig(Hs)
    wl_all, W_all = np.linalg.eig(np.conj(np.swapaxes(Hs, 1, 2)))

    if initial is None:
        sys0 = pair_eigensystem(w_all[0], V_all[0], wl_all[0], W_all[0], eps_deg)
    else:
        sys0 = initial
        if sys0.dim != H.dim:
            raise ValueError("initial eigensystem has wrong dimension")

    degs = sys0.degeneracies
    n_levels = len(degs)
    evals = [np.empty(npts, dtype=complex) for _ in range(n_levels)]
    rights = [np.empty((npts, H.dim, N), dtype=complex) for N in degs]
    lefts = [np.empty((npts, H.dim, N), dtype=complex) for N in degs]
    for n, lv in enumerate(sys0.levels):
        evals[n][0] = lv.eigenvalue
        rights[n][0] = lv.right
        lefts[n][0] = lv.left

    for k in range(1, npts):
        groups = cluster_eigenvalues(w_all[k], eps_deg)
        if len(groups) < n_levels:
            raise LevelCrossing(
                f"eigenvalue gap fell below threshold at t={H.grid[k]:.6g}")
        if sorted(len(g) for g in groups) != sorted(degs):
            raise DegeneracyChange(
                f"degeneracy structure changed at t={H.grid[k]:.6g}")
        raw = pair_eigensystem(w_all[k], V_all[k], wl_all[k], W_all[k],
                               eps_deg, groups=groups)

        used = [False] * n_levels
        for n in range(n_levels):
            prev_left = lefts[n][k - 1]
            # subspace overlap mass against every candidate group
            mass = np.array([
                np.sum(np.abs(prev_left.conj().T @ lv.right) ** 2)
                for lv in raw.levels])
            order = np.argsort(mass)[::-1]
            m = next((int(j) for j in order if not used[j]), None)
            lv = raw.levels[m]
            if lv.degeneracy != degs[n]:
                raise DegeneracyChange(
                    f"level matched across a degeneracy change at t={H.grid[k]:.6g}")
            used[m] = True
            O = prev_left.conj().T @ lv.right
            u_svd, s, vh = np.linalg.svd(O)
            if s[-1] < 0.1:
                raise LevelCrossing(
                    f"level identification ambiguous at t={H.grid[k]:.6g}")
            T = (u_svd @ vh).conj().T
            evals[n][k] = lv.eigenvalue
            rights[n][k] = lv.right @ T
            lefts[n][k] = lv.left @ T

    return LevelTrack(H.grid, H.dim, evals, rights, lefts)


@dataclass
class CouplingTables:
    """A^{nm}_{cd}(t) = i <phi_n,c; t| d/dt |psi_m,d; t> for all level pairs."""

    grid: np.ndarray
    blocks: list[list[np.ndarray]]     # blocks[n][m]: (K+1, Nn, Nm)
    cross_defect: float | None = None  # sup distance to the dH/dt route

    def block(self, n: int, m: int) -> np.ndarray:
        return self.blocks[n][m]


def coupling_matrices(track: LevelTrack, H: HamiltonianSignal | None = None,
                      check: bool = True) -> CouplingTables:
    """All coupling blocks on the grid, eigenvector derivatives by central
    differences of the gauge-aligned track.

    When ``H`` is supplied the off-diagonal blocks are cross-checked against
    i <phi|dH/dt|psi> / (E_m - E_n); a gross mismatch (sign conventions,
    misaligned gauge) raises ConsistencyError.
    """
    dpsi = track.right_derivatives()
    nL = track.n_levels
    blocks = [[1j * np.einsum("kdc,kde->kce", track.left[n].conj(), dpsi[m])
               for m in range(nL)] for n in range(nL)]
    defect = None
    if H is not None:
        dH = H.derivative()
        worst = 0.0
        scale = 0.0
        for n in range(nL):
            for m in range(nL):
                if m == n:
                    continue
                num = 1j * np.einsum("kdc,kde,kef->kcf",
                                     track.left[n].conj(), dH, track.right[m])
                gap = (track.eigenvalues[m] - track.eigenvalues[n])[:, None, None]
                alt = num / gap
                worst = max(worst, float(np.max(np.abs(alt - blocks[n][m]))))
                scale = max(scale, float(np.max(np.abs(blocks[n][m]))))
        defect = worst
        if check:
            tol = max(1e-3, 1e3 * track.dt**2) * (1.0 + scale)
            if worst > tol:
                raise ConsistencyError(
                    f"finite-difference and dH/dt couplings disagree "
                    f"({worst:.3e} > {tol:.3e})")
    return CouplingTables(track.grid, blocks, defect)


def dynamical_factor(track: LevelTrack, n: int,
                     couplings: CouplingTables | None = None) -> np.ndarray:
    """K^n(t): dynamical phase times the path-ordered connection exponential.

    Shape (K+1, N, N). The ordered product is accumulated stepwise with
    midpoint-sampled exponentials, later times to the left; for N = 1 it
    collapses to the exponential of an ordinary integral.
    """
    if couplings is None:
        dpsi = central_difference(track.right[n], track.dt)
        conn = 1j * np.einsum("kdc,kde->kce", track.left[n].conj(), dpsi)
    else:
        conn = couplings.block(n, n)
    dt = track.dt
    npts = len(track.grid)
    N = conn.shape[1]
    phase = np.exp(-1j * cumulative_integral(track.eigenvalues[n], dt))

    if N == 1:
        mids = (conn[:-1, 0, 0] + conn[1:, 0, 0]) / 2.0
        ordered = np.ones(npts, dtype=complex)
        ordered[1:] = np.exp(1j * dt * np.cumsum(mids))
        K = (phase * ordered)[:, None, None]
    else:
        mids = (conn[:-1] + conn[1:]) / 2.0
        if N == 2:
            steps = expm2(1j * dt * mids)
        else:
            steps = np.stack([scipy.linalg.expm(1j * dt * m) for m in mids])
        K = np.empty((npts, N, N), dtype=complex)
        K[0] = np.eye(N)
        cur = np.eye(N, dtype=complex)
        for k in range(npts - 1):
            cur = steps[k] @ cur
            K[k + 1] = cur
        K = phase[:, None, None] * K

    dets = np.linalg.det(K)
    if np.any(np.abs(dets) < 1e-300) or not np.all(np.isfinite(K.view(float))):
        raise SingularK(f"dynamical factor for level {n} lost invertibility")
    return K


def adiabatic_propagator(track: LevelTrack,
                         factors: list[np.ndarray] | None = None,
                         couplings: CouplingTables | None = None,
                         ) -> tuple[PropagatorTable, PropagatorTable]:
    """U0(t) = sum_n psi_n(t) K^n(t) phi_n(0)^H and its closed-form inverse."""
    if factors is None:
        factors = [dynamical_factor(track, n, couplings)
                   for n in range(track.n_levels)]
    npts = len(track.grid)
    u0 = np.zeros((npts, track.dim, track.dim), dtype=complex)
    u0inv = np.zeros_like(u0)
    for n in range(track.n_levels):
        bra0 = track.left[n][0].conj().T
        bras = np.conj(np.swapaxes(track.left[n], 1, 2))
        try:
            Kinv = np.linalg.inv(factors[n])
        except np.linalg.LinAlgError:
            raise SingularK(f"dynamical factor for level {n} is singular") from None
        u0 += np.einsum("kdc,kce,ef->kdf", track.right[n], factors[n], bra0)
        u0inv += np.einsum("dc,kce,kef->kdf", track.right[n][0], Kinv, bras)
    u0[0] = np.eye(track.dim)
    u0inv[0] = np.eye(track.dim)
    return (PropagatorTable(track.grid, u0), PropagatorTable(track.grid, u0inv))


def canonical_transform(H: HamiltonianSignal,
                        g: PropagatorTable | np.ndarray) -> HamiltonianSignal:
    """H'(t) = g H g^-1 - i g d/dt(g^-1) for an invertible frame change g(t)."""
    gv = g.values if isinstance(g, PropagatorTable) else np.asarray(g, dtype=complex)
    if gv.shape[0] != len(H.grid):
        raise SingularTransform("transformation table does not match the grid")
    try:
        ginv = np.linalg.inv(gv)
    except np.linalg.LinAlgError:
        raise SingularTransform("transformation not invertible on the grid") from None
    if not np.all(np.isfinite(ginv.view(float))):
        raise SingularTransform("transformation inverse overflowed")
    dginv = central_difference(ginv, H.dt)
    Hs = H.sample()
    vals = (np.einsum("kij,kjl,klm->kim", gv, Hs, ginv)
            - 1j * np.einsum("kij,kjl->kil", gv, dginv))
    return HamiltonianSignal.from_table(H.grid, vals)


@dataclass
class AdiabaticStep:
    u0: PropagatorTable
    u0_inv: PropagatorTable
    h1: HamiltonianSignal
    track: LevelTrack
    factors: list[np.ndarray]
    route_defect: float


def adiabatic_step(H: HamiltonianSignal, eps_deg: float = EPS_DEG,
                   initial: BiorthoEigensystem | None = None,
                   check: bool = True) -> AdiabaticStep:
    """One adiabatic canonical transformation: (U0, H1).

    H1 is assembled from the level-sum formula; the same quantity computed as
    the canonical transform of H by U0^-1 serves as a built-in sanity check
    on the gauge and sign conventions.
    """
    track = track_levels(H, eps_deg, initial=initial)
    coup = coupling_matrices(track, H, check=check)
    factors = [dynamical_factor(track, n, coup) for n in range(track.n_levels)]
    u0, u0inv = adiabatic_propagator(track, factors)

    npts = len(H.grid)
    h1 = np.zeros((npts, H.dim, H.dim), dtype=complex)
    kinvs = [np.linalg.inv(Kn) for Kn in factors]
    for n in range(track.n_levels):
        for m in range(track.n_levels):
            if m == n:
                continue
            core = -np.einsum("kab,kbc,kcd->kad",
                              kinvs[n], coup.block(n, m), factors[m])
            h1 += np.einsum("da,kab,eb->kde",
                            track.right[n][0], core, track.left[m][0].conj())

    # second route: H1 = g H g^-1 - i g d/dt(g^-1) with g = U0^-1
    du0 = central_difference(u0.values, H.dt)
    Hs = H.sample()
    h1_ct = (np.einsum("kij,kjl,klm->kim", u0inv.values, Hs, u0.values)
             - 1j * np.einsum("kij,kjl->kil", u0inv.values, du0))
    defect = float(np.max(fro_norms(h1 - h1_ct)))
    if check:
        cond = float(np.max(fro_norms(u0.values)) * np.max(fro_norms(u0inv.values)))
        # the O(dt^2) constant of both routes grows with the eigenvector
        # rotation rate, which is exactly the coupling magnitude
        rate = 1.0
        for n in range(track.n_levels):
            for m in range(track.n_levels):
                rate = max(rate, float(np.max(np.abs(coup.block(n, m)))))
        scale = (1.0 + float(np.max(fro_norms(Hs)))) * (1.0 + cond) * (1.0 + rate) ** 3
        tol = max(1e-8, 10.0 * H.dt**2 * scale)
        if defect > tol:
            raise ConsistencyError(
                f"adiabatic_step routes disagree: {defect:.3e} > {tol:.3e}")

    h1_signal = HamiltonianSignal.from_table(H.grid, h1)
    return AdiabaticStep(u0, u0inv, h1_signal, track, factors, defect)


# ---------------------------------------------------------------------------
# product expansion driver
# ---------------------------------------------------------------------------

class StatusKind(Enum):
    TERMINATED = "Terminated"
    TRUNCATED = "Truncated"
    CYCLIC = "Cyclic"


@dataclass(frozen=True)
class ExpansionStatus:
    kind: StatusKind
    value: int  # last factor index / cap / cycle period

    def __str__(self) -> str:
        return f"{self.kind.value}({self.value})"

    @classmethod
    def terminated(cls, n: int) -> "ExpansionStatus":
        return cls(StatusKind.TERMINATED, n)

    @classmethod
    def truncated(cls, cap: int) -> "ExpansionStatus":
        return cls(StatusKind.TRUNCATED, cap)

    @classmethod
    def cyclic(cls, period: int) -> "ExpansionStatus":
        return cls(StatusKind.CYCLIC, period)


@dataclass
class ProductExpansion:
    """Ordered factors U^(0) ... U^(L) with residual diagnostics."""

    grid: np.ndarray
    factors: list[PropagatorTable]
    residual_norms: list[float] = field(default_factory=list)
    status: ExpansionStatus = None

    def assemble(self) -> PropagatorTable:
        out = self.factors[0]
        for f in self.factors[1:]:
            out = out.compose(f)
        return out

    def at(self, t: float) -> np.ndarray:
        return self.assemble().at(t)


def assemble(expansion: ProductExpansion, t: float | None = None):
    """Left-to-right product of the expansion factors (table, or matrix at t)."""
    table = expansion.assemble()
    return table if t is None else table.at(t)


def _direction_fit(values: np.ndarray):
    norms = fro_norms(values)
    k0 = int(np.argmax(norms))
    if norms[k0] == 0.0:
        return None
    M = values[k0] / norms[k0]
    h = np.einsum("ij,kij->k", M.conj(), values)
    resid = values - h[:, None, None] * M
    return M, h, resid, float(np.max(fro_norms(resid)))


def _direction_factor(grid: np.ndarray, M: np.ndarray, h: np.ndarray,
                      resid: np.ndarray) -> tuple[PropagatorTable, np.ndarray]:
    """Exact propagator of h(t) M and the conjugated residual Hamiltonian.

    A constant-direction Hamiltonian commutes with itself at different times,
    so its evolution operator is a plain exponential; the transformed
    Hamiltonian is the frame-conjugated fit residual.
    """
    dt = grid[1] - grid[0]
    S = cumulative_integral(h, dt)
    if M.shape[0] == 2:
        W = expm2(-1j * S[:, None, None] * M[None])
    else:
        W = np.stack([scipy.linalg.expm(-1j * s * M) for s in S])
    Winv = np.linalg.inv(W)
    Hnext = np.einsum("kij,kjl,klm->kim", Winv, resid, W)
    W[0] = np.eye(M.shape[0])
    return PropagatorTable(grid, W), Hnext


def expand(H: HamiltonianSignal, eps_trunc: float | None = None,
           L_max: int = 8, eps_cycle: float | None = None,
           eps_deg: float = EPS_DEG,
           direction_rtol: float | None = None) -> ProductExpansion:
    """Iterate adiabatic canonical transformations until the expansion
    terminates (residual below eps_trunc), cycles (H^(l) recurs within
    eps_cycle, periods up to 4), or reaches the factor cap.

    Iterates whose direction is constant in time get their exact exponential
    propagator as the factor instead of the eigen-tracked one; this is what
    terminates Class-1/2 style inputs whose first iterate is nilpotent.
    """
    sup0 = float(np.max(fro_norms(H.sample())))
    if eps_trunc is None:
        eps_trunc = 1e-9 * (1.0 + sup0)
    if eps_cycle is None:
        eps_cycle = 1e-7 * (1.0 + sup0)
    if direction_rtol is None:
        direction_rtol = max(1e-9, 25.0 * H.dt**2)

    history = [H.sample()]
    cur = H
    factors: list[PropagatorTable] = []
    residuals: list[float] = []
    status = None

    for ell in range(L_max + 1):
        tables = cur.sample()
        fit = _direction_fit(tables)
        scale_cur = float(np.max(fro_norms(tables)))
        if fit is not None and fit[3] <= direction_rtol * max(scale_cur, 1e-300):
            M, h, resid, _ = fit
            factor, next_tables = _direction_factor(H.grid, M, h, resid)
        else:
            step = adiabatic_step(cur, eps_deg)
            factor = step.u0
            next_tables = step.h1.sample()
        factors.append(factor)
        resid_sup = float(np.max(fro_norms(next_tables)))
        residuals.append(resid_sup)

        if resid_sup < eps_trunc:
            status = ExpansionStatus.terminated(ell)
            break
        cycle = None
        for p in range(1, min(4, len(history)) + 1):
            if float(np.max(fro_norms(next_tables - history[-p]))) < eps_cycle:
                cycle = p
                break
        if cycle is not None:
            status = ExpansionStatus.cyclic(cycle)
            break
        history.append(next_tables)
        cur = HamiltonianSignal.from_table(H.grid, next_tables)
    if status is None:
        status = ExpansionStatus.truncated(L_max)

    return ProductExpansion(H.grid, factors, residuals, status)

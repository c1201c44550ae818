"""Closed-form machinery for traceless two-level systems.

Coefficient convention: H = [[a, b], [c, -a]] with complex smooth a(t),
b(t), c(t) and level pair -E, +E where E = sqrt(a^2 + b c) on a
continuity-fixed branch (principal value at t = 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ChartSingularity, LevelCrossing, VanishingOffDiagonal
from .quadrature import (central_difference, continuous_sqrt,
                         cumulative_integral, expm2, fro_norms)
from .signals import HamiltonianSignal, PropagatorTable

EPS_CHART = 1e-8
EPS_CLASS = 1e-8

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA2 = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_PAULI = (SIGMA1, SIGMA2, SIGMA3)
_EPSILON_LC = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _EPSILON_LC[_i, _j, _k] = 1.0
    _EPSILON_LC[_j, _i, _k] = -1.0


@dataclass
class TwoLevelCoeffs:
    """Traceless two-level coefficient signals on a uniform grid."""

    grid: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    da: np.ndarray | None = None
    db: np.ndarray | None = None
    dc: np.ndarray | None = None
    E: np.ndarray = field(init=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        for name in ("a", "b", "c"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=complex))
        self.E = continuous_sqrt(self.a**2 + self.b * self.c)

    @property
    def dt(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def tau(self) -> float:
        return float(self.grid[-1])

    def scale(self) -> float:
        return float(max(np.max(np.abs(self.a)), np.max(np.abs(self.b)),
                         np.max(np.abs(self.c))))

    def require_nondegenerate(self, eps_deg: float = 1e-8) -> None:
        floor = eps_deg * max(1.0, self.scale())
        if np.min(np.abs(self.E)) <= floor:
            raise LevelCrossing("two-level eigenvalue E(t) reaches zero on the grid")

    def derivatives(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        da = self.da if self.da is not None else central_difference(self.a, self.dt)
        db = self.db if self.db is not None else central_difference(self.b, self.dt)
        dc = self.dc if self.dc is not None else central_difference(self.c, self.dt)
        return da, db, dc

    def dE(self) -> np.ndarray:
        da, db, dc = self.derivatives()
        return (2.0 * self.a * da + db * self.c + self.b * dc) / (2.0 * self.E)

    def matrices(self) -> np.ndarray:
        out = np.empty((len(self.grid), 2, 2), dtype=complex)
        out[:, 0, 0] = self.a
        out[:, 0, 1] = self.b
        out[:, 1, 0] = self.c
        out[:, 1, 1] = -self.a
        return out

    def to_signal(self) -> HamiltonianSignal:
        da, db, dc = self.derivatives()
        dvals = np.empty((len(self.grid), 2, 2), dtype=complex)
        dvals[:, 0, 0] = da
        dvals[:, 0, 1] = db
        dvals[:, 1, 0] = dc
        dvals[:, 1, 1] = -da
        return HamiltonianSignal.from_table(self.grid, self.matrices(), dvals)

    @classmethod
    def from_functions(cls, tau: float, steps: int, a, b, c,
                       da=None, db=None, dc=None) -> "TwoLevelCoeffs":
        """Build from vectorized callables t -> complex (or constants)."""
        grid = np.linspace(0.0, float(tau), steps + 1)

        def ev(f):
            if f is None:
                return None
            if callable(f):
                return np.asarray(f(grid), dtype=complex) * np.ones(len(grid))
            return np.full(len(grid), f, dtype=complex)

        return cls(grid, ev(a), ev(b), ev(c), ev(da), ev(db), ev(dc))


def detrace(H: HamiltonianSignal) -> tuple[TwoLevelCoeffs, np.ndarray]:
    """Split a 2x2 signal into traceless coefficients and the trace gauge.

    Returns the coefficient triple of H - (tr H/2) and the scalar factor
    g(t) = exp(i int_0^t tr H / 2); the original propagator is recovered as
    U_orig(t) = U_traceless(t) / g(t).
    """
    if H.dim != 2:
        raise ValueError("detrace expects a 2x2 signal")
    vals = H.sample()
    tr = vals[:, 0, 0] + vals[:, 1, 1]
    a = (vals[:, 0, 0] - vals[:, 1, 1]) / 2.0
    b = vals[:, 0, 1]
    c = vals[:, 1, 0]
    if H.derivative_func is not None:
        dv = H.derivative()
        da = (dv[:, 0, 0] - dv[:, 1, 1]) / 2.0
        db, dc = dv[:, 0, 1], dv[:, 1, 0]
    else:
        da = db = dc = None
    phase = np.exp(1j * cumulative_integral(tr, H.dt) / 2.0)
    return TwoLevelCoeffs(H.grid, a, b, c, da, db, dc), phase


# ---------------------------------------------------------------------------
# eigendata and dynamical data in the (a + E)-chart
# ---------------------------------------------------------------------------

@dataclass
class TwoLevelEigendata:
    """psi_1 = (-b, a+E), psi_2 = (a+E, c) and their biorthonormal duals."""

    psi1: np.ndarray   # (K+1, 2)
    psi2: np.ndarray
    phi1: np.ndarray   # dual kets; bras are their conjugate transposes
    phi2: np.ndarray
    norm: np.ndarray   # N = 2E(a+E)


def _require_chart(coeffs: TwoLevelCoeffs, eps_chart: float) -> None:
    coeffs.require_nondegenerate()
    if np.min(np.abs(coeffs.a + coeffs.E)) <= eps_chart * np.max(np.abs(coeffs.E)):
        raise ChartSingularity("a + E vanishes; eigenvector chart is invalid here")


def eigendata(coeffs: TwoLevelCoeffs,
              eps_chart: float = EPS_CHART) -> TwoLevelEigendata:
    _require_chart(coeffs, eps_chart)
    a, b, c, E = coeffs.a, coeffs.b, coeffs.c, coeffs.E
    N = 2.0 * E * (a + E)
    psi1 = np.stack([-b, a + E], axis=1)
    psi2 = np.stack([a + E, c], axis=1)
    phi1 = np.stack([-c.conj(), (a + E).conj()], axis=1) / N.conj()[:, None]
    phi2 = np.stack([(a + E).conj(), b.conj()], axis=1) / N.conj()[:, None]
    return TwoLevelEigendata(psi1, psi2, phi1, phi2, N)


@dataclass
class DynamicalData:
    eta: np.ndarray     # 2 int_0^t E
    alpha: np.ndarray   # eta/2 + (i/4) int (c db - b dc) / (E(E+a))
    K1: np.ndarray      # dynamical factor of the -E level
    K2: np.ndarray      # dynamical factor of the +E level


def dynamical_data(coeffs: TwoLevelCoeffs,
                   eps_chart: float = EPS_CHART) -> DynamicalData:
    """Line-integral data pulled back to the time grid (composite Simpson)."""
    _require_chart(coeffs, eps_chart)
    a, b, c, E = coeffs.a, coeffs.b, coeffs.c, coeffs.E
    da, db, dc = coeffs.derivatives()
    dE = coeffs.dE()
    dt = coeffs.dt
    eta = 2.0 * cumulative_integral(E, dt)
    alpha = eta / 2.0 + (1j / 4.0) * cumulative_integral(
        (c * db - b * dc) / (E * (E + a)), dt)
    K1 = np.exp(1j * eta / 2.0 - cumulative_integral(
        (da + dE + c * db / (a + E)) / (2.0 * E), dt))
    K2 = np.exp(-1j * eta / 2.0 - cumulative_integral(
        (da + dE + b * dc / (a + E)) / (2.0 * E), dt))
    return DynamicalData(eta, alpha, K1, K2)


def offdiag_couplings(coeffs: TwoLevelCoeffs,
                      dyn: DynamicalData | None = None,
                      eps_chart: float = EPS_CHART
                      ) -> tuple[np.ndarray, np.ndarray]:
    """The two off-diagonal couplings (xi, zeta) driving the next iterate.

    xi  = (-i e^{-2 i alpha} / 2)(1 + a/E) d/dt [c / (a + E)]
    zeta = (+i e^{+2 i alpha} / 2)(1 + a/E) d/dt [b / (a + E)]

    The time derivative is taken by central differences of the analytic
    ratio, so a ratio that is constant by construction gives exactly zero.
    """
    _require_chart(coeffs, eps_chart)
    if dyn is None:
        dyn = dynamical_data(coeffs, eps_chart)
    a, b, c, E = coeffs.a, coeffs.b, coeffs.c, coeffs.E
    dt = coeffs.dt
    pref = 1.0 + a / E
    xi = (-1j * np.exp(-2j * dyn.alpha) / 2.0) * pref * central_difference(
        c / (a + E), dt)
    zeta = (+1j * np.exp(+2j * dyn.alpha) / 2.0) * pref * central_difference(
        b / (a + E), dt)
    return xi, zeta


def transformed_coeffs(coeffs: TwoLevelCoeffs, xi: np.ndarray,
                       zeta: np.ndarray) -> TwoLevelCoeffs:
    """Coefficients of the transformed Hamiltonian (traceless by construction)."""
    a0, b0, c0, E0 = coeffs.a[0], coeffs.b[0], coeffs.c[0], coeffs.E[0]
    if abs(a0 + E0) <= EPS_CHART * abs(E0):
        raise ChartSingularity("chart invalid at t = 0")
    a1 = -(b0 * xi + c0 * zeta) / (2.0 * E0)
    b1 = -(b0**2 * xi - (a0 + E0) ** 2 * zeta) / (2.0 * E0 * (E0 + a0))
    c1 = -(-((a0 + E0) ** 2) * xi + c0**2 * zeta) / (2.0 * E0 * (E0 + a0))
    return TwoLevelCoeffs(coeffs.grid, a1, b1, c1)


def adiabatic_factor(coeffs: TwoLevelCoeffs,
                     ed: TwoLevelEigendata | None = None,
                     dyn: DynamicalData | None = None,
                     eps_chart: float = EPS_CHART
                     ) -> tuple[PropagatorTable, PropagatorTable]:
    """Closed-form adiabatic factor U0 (and inverse) in the (a+E)-chart."""
    if ed is None:
        ed = eigendata(coeffs, eps_chart)
    if dyn is None:
        dyn = dynamical_data(coeffs, eps_chart)
    bra1 = ed.phi1.conj()
    bra2 = ed.phi2.conj()
    u0 = (dyn.K1[:, None, None] * np.einsum("ki,j->kij", ed.psi1, bra1[0])
          + dyn.K2[:, None, None] * np.einsum("ki,j->kij", ed.psi2, bra2[0]))
    u0inv = (np.einsum("i,kj->kij", ed.psi1[0], bra1) / dyn.K1[:, None, None]
             + np.einsum("i,kj->kij", ed.psi2[0], bra2) / dyn.K2[:, None, None])
    u0[0] = np.eye(2)
    u0inv[0] = np.eye(2)
    return (PropagatorTable(coeffs.grid, u0), PropagatorTable(coeffs.grid, u0inv))


@dataclass
class TwoLevelStep:
    u0: PropagatorTable
    u0_inv: PropagatorTable
    h1: TwoLevelCoeffs
    xi: np.ndarray
    zeta: np.ndarray
    dyn: DynamicalData


def apply_step(coeffs: TwoLevelCoeffs,
               eps_chart: float = EPS_CHART) -> TwoLevelStep:
    """One adiabatic canonical transformation in closed form."""
    ed = eigendata(coeffs, eps_chart)
    dyn = dynamical_data(coeffs, eps_chart)
    xi, zeta = offdiag_couplings(coeffs, dyn, eps_chart)
    u0, u0inv = adiabatic_factor(coeffs, ed, dyn, eps_chart)
    return TwoLevelStep(u0, u0inv, transformed_coeffs(coeffs, xi, zeta),
                        xi, zeta, dyn)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassTag:
    kind: str                      # "class1" | "class2" | "class3" | "generic"
    parameter: complex | None = None

    def __str__(self) -> str:
        if self.kind == "class1":
            return f"Class1(mu={_fmt(self.parameter)})"
        if self.kind == "class2":
            return f"Class2(nu={_fmt(self.parameter)})"
        return {"class3": "Class3", "generic": "Generic"}[self.kind]


def _fmt(z: complex) -> str:
    if z is None:
        return "?"
    if abs(z.imag) < 1e-14:
        return f"{z.real:g}"
    return f"{z.real:g}{z.imag:+g}j"


def _relative_variation(r: np.ndarray) -> float:
    return float(np.max(np.abs(r - r[0])) / max(1.0, np.max(np.abs(r))))


def classify(coeffs: TwoLevelCoeffs, eps_class: float = EPS_CLASS) -> ClassTag:
    """Detect the exactly solvable families.

    Precedence Class3 > Class1 > Class2: the Class-3 pipeline (modified
    expansion) subsumes overlap cases.
    """
    scale = max(coeffs.scale(), 1e-300)
    if np.max(np.abs(coeffs.a)) < eps_class * scale:
        return ClassTag("class3")
    coeffs.require_nondegenerate()
    denom = coeffs.a + coeffs.E
    if np.min(np.abs(denom)) <= EPS_CHART * np.max(np.abs(coeffs.E)):
        return ClassTag("generic")
    rc = coeffs.c / denom
    if _relative_variation(rc) < eps_class:
        return ClassTag("class1", complex(rc[0]))
    rb = coeffs.b / denom
    if _relative_variation(rb) < eps_class:
        return ClassTag("class2", complex(rb[0]))
    return ClassTag("generic")


def class1_coeffs(tau: float, steps: int, a, b, mu: complex,
                  da=None, db=None) -> TwoLevelCoeffs:
    """c(t) solving c/(a+E) = mu, i.e. c = mu (2a + mu b) and E = a + mu b."""
    grid = np.linspace(0.0, tau, steps + 1)

    def ev(f):
        return (None if f is None
                else np.asarray(f(grid), dtype=complex) * np.ones(len(grid)))

    av, bv, dav, dbv = ev(a), ev(b), ev(da), ev(db)
    dcv = None if dav is None or dbv is None else mu * (2.0 * dav + mu * dbv)
    return TwoLevelCoeffs(grid, av, bv, mu * (2.0 * av + mu * bv),
                          dav, dbv, dcv)


def class2_coeffs(tau: float, steps: int, a, c, nu: complex,
                  da=None, dc=None) -> TwoLevelCoeffs:
    """b(t) solving b/(a+E) = nu, i.e. b = nu (2a + nu c) and E = a + nu c."""
    grid = np.linspace(0.0, tau, steps + 1)

    def ev(f):
        return (None if f is None
                else np.asarray(f(grid), dtype=complex) * np.ones(len(grid)))

    av, cv, dav, dcv = ev(a), ev(c), ev(da), ev(dc)
    dbv = None if dav is None or dcv is None else nu * (2.0 * dav + nu * dcv)
    return TwoLevelCoeffs(grid, av, nu * (2.0 * av + nu * cv), cv,
                          dav, dbv, dcv)


# ---------------------------------------------------------------------------
# two-factor product for the exactly solvable classes
# ---------------------------------------------------------------------------

@dataclass
class TwoFactorExpansion:
    u0: PropagatorTable
    u1: PropagatorTable
    h1_sup: float
    h2_sup: float
    tag: ClassTag

    def assemble(self) -> PropagatorTable:
        return self.u0.compose(self.u1)


def two_factor_expansion(coeffs: TwoLevelCoeffs,
                         direction_rtol: float = 1e-6) -> TwoFactorExpansion:
    """U = U0 U1 for Class-1/2 inputs.

    The first iterate of these classes is h(t) times a constant (nilpotent)
    matrix, so its exact propagator is a plain exponential and the second
    iterate vanishes identically.
    """
    tag = classify(coeffs)
    step = apply_step(coeffs)
    H1 = step.h1.matrices()
    norms = fro_norms(H1)
    k0 = int(np.argmax(norms))
    if norms[k0] == 0.0:
        # adiabatically exact: U1 = identity
        u1 = PropagatorTable.identity(coeffs.grid, 2)
        return TwoFactorExpansion(step.u0, u1, 0.0, 0.0, tag)
    M = H1[k0] / norms[k0]
    h = np.einsum("ij,kij->k", M.conj(), H1)
    resid = H1 - h[:, None, None] * M
    if float(np.max(fro_norms(resid))) > direction_rtol * norms[k0]:
        raise VanishingOffDiagonal(
            "first iterate is not constant-direction; input is not Class 1/2")
    S = cumulative_integral(h, coeffs.dt)
    W = expm2(-1j * S[:, None, None] * M[None])
    Winv = np.linalg.inv(W)
    H2 = np.einsum("kij,kjl,klm->kim", Winv, resid, W)
    W[0] = np.eye(2)
    return TwoFactorExpansion(step.u0, PropagatorTable(coeffs.grid, W),
                              float(np.max(norms)),
                              float(np.max(fro_norms(H2))), tag)


# ---------------------------------------------------------------------------
# Class 3: closed forms, rephasing, and the modified product expansion
# ---------------------------------------------------------------------------

def _class3_f(coeffs: TwoLevelCoeffs) -> np.ndarray:
    """f = i sqrt(c/b) on the branch tied to the E-branch: f = i c / E."""
    return 1j * coeffs.c / coeffs.E


def _class3_rate(coeffs: TwoLevelCoeffs) -> np.ndarray:
    """E1 = i fdot / (2 f) = (i/2)(cdot/c - Edot/E)."""
    if coeffs.dc is not None:
        return 0.5j * (coeffs.dc / coeffs.c - coeffs.dE() / coeffs.E)
    f = _class3_f(coeffs)
    return 0.5j * central_difference(f, coeffs.dt) / f


@dataclass
class Class3Step:
    h1: TwoLevelCoeffs
    f0: complex
    eta: np.ndarray
    rate: np.ndarray          # E1(t) = i fdot/(2 f)
    pauli_form: bool          # b0 = c0, i.e. f0 = i


def class3_step(coeffs: TwoLevelCoeffs, tol: float = 1e-10) -> Class3Step:
    """Transformed Hamiltonian of an a = 0 input, in closed form.

    a1 = E1 cos(eta), b1 = E1 sin(eta)/f0, c1 = f0 E1 sin(eta).
    """
    scale = max(coeffs.scale(), 1e-300)
    if np.max(np.abs(coeffs.a)) > tol * scale:
        raise ValueError("class3_step requires a identically zero")
    if (np.min(np.abs(coeffs.b)) <= tol * scale
            or np.min(np.abs(coeffs.c)) <= tol * scale):
        raise VanishingOffDiagonal("b(t) and c(t) must not vanish on the grid")
    coeffs.require_nondegenerate()
    f = _class3_f(coeffs)
    f0 = complex(f[0])
    eta = 2.0 * cumulative_integral(coeffs.E, coeffs.dt)
    rate = _class3_rate(coeffs)
    a1 = rate * np.cos(eta)
    b1 = rate * np.sin(eta) / f0
    c1 = f0 * rate * np.sin(eta)
    pauli_form = abs(coeffs.b[0] - coeffs.c[0]) <= 1e-9 * scale
    return Class3Step(TwoLevelCoeffs(coeffs.grid, a1, b1, c1), f0, eta,
                      rate, pauli_form)


@dataclass
class Rephased:
    coeffs: TwoLevelCoeffs    # zero diagonal
    gamma: np.ndarray         # 2 int a^(1)
    gauge: PropagatorTable    # exp(i int a^(1) sigma_3)


def rephase_to_class3(h1: TwoLevelCoeffs) -> Rephased:
    """Remove the diagonal of a traceless iterate by a sigma_3 gauge.

    b -> b e^{i gamma}, c -> c e^{-i gamma}, gamma = 2 int_0^t a^(1);
    the returned gauge enters the propagator reassembly as g(t)^-1.
    """
    gamma = 2.0 * cumulative_integral(h1.a, h1.dt)
    b_new = h1.b * np.exp(1j * gamma)
    c_new = h1.c * np.exp(-1j * gamma)
    gv = np.zeros((len(h1.grid), 2, 2), dtype=complex)
    gv[:, 0, 0] = np.exp(1j * gamma / 2.0)
    gv[:, 1, 1] = np.exp(-1j * gamma / 2.0)
    zero = np.zeros_like(h1.a)
    return Rephased(TwoLevelCoeffs(h1.grid, zero, b_new, c_new), gamma,
                    PropagatorTable(h1.grid, gv))


def class3_adiabatic_factor(eta: np.ndarray, u: np.ndarray, w: np.ndarray,
                            grid: np.ndarray
                            ) -> tuple[PropagatorTable, PropagatorTable]:
    """Chart-free adiabatic factor of an a = 0 system.

    With u = sqrt(f/f0) and w = sqrt(f f0) the factor reads
    [[cos(eta/2)/u, sin(eta/2)/w], [-w sin(eta/2), u cos(eta/2)]];
    it stays regular through zeros of E(t), where the eigenvector chart
    degenerates. Determinant is identically 1.
    """
    c2, s2 = np.cos(eta / 2.0), np.sin(eta / 2.0)
    npts = len(grid)
    U = np.empty((npts, 2, 2), dtype=complex)
    U[:, 0, 0] = c2 / u
    U[:, 0, 1] = s2 / w
    U[:, 1, 0] = -w * s2
    U[:, 1, 1] = u * c2
    Uinv = np.empty_like(U)
    Uinv[:, 0, 0] = u * c2
    Uinv[:, 0, 1] = -s2 / w
    Uinv[:, 1, 0] = w * s2
    Uinv[:, 1, 1] = c2 / u
    U[0] = np.eye(2)
    Uinv[0] = np.eye(2)
    return PropagatorTable(grid, U), PropagatorTable(grid, Uinv)


@dataclass
class ModifiedExpansion:
    """Product expansion of a Class-3 input with per-stage rephasing.

    factors[l] = U0_[l] g_{l+1}^-1; the L-stage approximant is their ordered
    product (the propagator of the L-th iterate is approximated by 1).
    """

    grid: np.ndarray
    factors: list[PropagatorTable]
    eta_tables: list[np.ndarray]      # eta_0 .. eta_{L-1}
    h_tables: list[np.ndarray]        # h_1 .. h_L (validity gauges)
    gamma_tables: list[np.ndarray]

    @property
    def h_sups(self) -> list[float]:
        return [float(np.max(np.abs(h))) for h in self.h_tables]

    def assemble(self, L: int | None = None) -> PropagatorTable:
        L = len(self.factors) if L is None else L
        out = self.factors[0]
        for f in self.factors[1:L]:
            out = out.compose(f)
        return out


def modified_expansion(coeffs: TwoLevelCoeffs, L: int) -> ModifiedExpansion:
    """Alternate adiabatic transformations with diagonal rephasings, L times.

    Stage iterates are carried in the regular (eta, f) parameterization: the
    rephased iterates vanish at isolated times, where the eigenvector chart
    blows up but the assembled factors stay finite.
    """
    if L < 1:
        raise ValueError("need at least one stage")
    if classify(coeffs).kind != "class3":
        raise ValueError("modified expansion requires a Class-3 input")
    coeffs.require_nondegenerate()
    dt = coeffs.dt
    grid = coeffs.grid

    f = _class3_f(coeffs)
    f_cur0 = complex(f[0])
    rate = _class3_rate(coeffs)          # h-product seed E^(1)
    eta_cur = 2.0 * cumulative_integral(coeffs.E, dt)
    u_cur = continuous_sqrt(f / f_cur0)
    w_cur = u_cur * f_cur0

    factors: list[PropagatorTable] = []
    eta_tables: list[np.ndarray] = []
    h_tables: list[np.ndarray] = []
    gamma_tables: list[np.ndarray] = []
    P = rate.copy()
    for _ in range(L):
        u0, _ = class3_adiabatic_factor(eta_cur, u_cur, w_cur, grid)
        diag_rate = P * np.cos(eta_cur)          # a^(1) of this stage
        gamma = 2.0 * cumulative_integral(diag_rate, dt)
        factor = u0.values.copy()
        factor[:, :, 0] *= np.exp(-1j * gamma / 2.0)[:, None]
        factor[:, :, 1] *= np.exp(+1j * gamma / 2.0)[:, None]
        factors.append(PropagatorTable(grid, factor))
        eta_tables.append(eta_cur)
        h_tables.append(diag_rate)               # h_{l+1} = E^(1) prod cos(eta_j)
        gamma_tables.append(gamma)

        # next iterate: E_next = P sin(eta), f_next = i f_cur0 e^{-i gamma}
        eta_next = 2.0 * cumulative_integral(P * np.sin(eta_cur), dt)
        P = P * np.cos(eta_cur)
        f_cur0 = 1j * f_cur0
        u_cur = np.exp(-1j * gamma / 2.0)
        w_cur = f_cur0 * u_cur
        eta_cur = eta_next

    return ModifiedExpansion(grid, factors, eta_tables, h_tables, gamma_tables)


# ---------------------------------------------------------------------------
# reduction of an arbitrary 2x2 system to Class-3 form
# ---------------------------------------------------------------------------

@dataclass
class Class3Reduction:
    coeffs: TwoLevelCoeffs        # a = 0, b = alpha' e^{i eta'}, c = alpha' e^{-i eta'}
    mix_gauge: np.ndarray         # exp(i int alpha_2 sigma_2), (K+1, 2, 2)
    diag_gauge: np.ndarray        # exp(i int a' sigma_3)
    trace_phase: np.ndarray       # exp(i int tr/2)
    alpha_prime: np.ndarray
    a_prime: np.ndarray

    def reassemble(self, u_class3: PropagatorTable) -> PropagatorTable:
        """Propagator of the original system from the Class-3 one."""
        vals = np.einsum("kij,kjl,klm->kim", np.linalg.inv(self.mix_gauge),
                         np.linalg.inv(self.diag_gauge), u_class3.values)
        vals = vals / self.trace_phase[:, None, None]
        return PropagatorTable(u_class3.grid, vals)


def reduce_to_class3(H: HamiltonianSignal) -> Class3Reduction:
    """Two canonical transformations mapping any 2x2 system to Class-3 form
    with equal off-diagonal entries at t = 0.

    First gauge exp(i int alpha_2 sigma_2) rotates the sigma_2 component
    away (mixing angle 2 int alpha_2); second gauge exp(i int a' sigma_3)
    moves the remaining diagonal into the off-diagonal phase e^{+-i eta'},
    eta' = 2 int a'.
    """
    coeffs, trace_phase = detrace(H)
    a, b, c = coeffs.a, coeffs.b, coeffs.c
    dt = coeffs.dt
    alpha1 = (b + c) / 2.0
    alpha2 = 1j * (b - c) / 2.0
    half_mix = cumulative_integral(alpha2, dt)      # int alpha_2
    mix = 2.0 * half_mix
    alpha_p = alpha1 * np.cos(mix) - a * np.sin(mix)
    a_p = alpha1 * np.sin(mix) + a * np.cos(mix)
    eta_p = 2.0 * cumulative_integral(a_p, dt)

    npts = len(coeffs.grid)
    I = np.eye(2, dtype=complex)
    mix_gauge = (np.cos(half_mix)[:, None, None] * I
                 + 1j * np.sin(half_mix)[:, None, None] * SIGMA2)
    diag_gauge = np.zeros((npts, 2, 2), dtype=complex)
    diag_gauge[:, 0, 0] = np.exp(+1j * eta_p / 2.0)
    diag_gauge[:, 1, 1] = np.exp(-1j * eta_p / 2.0)

    zero = np.zeros(npts, dtype=complex)
    reduced = TwoLevelCoeffs(coeffs.grid, zero,
                             alpha_p * np.exp(+1j * eta_p),
                             alpha_p * np.exp(-1j * eta_p))
    return Class3Reduction(reduced, mix_gauge, diag_gauge, trace_phase,
                           alpha_p, a_p)


def pauli_conjugate(i: int, j: int, phi: complex) -> np.ndarray:
    """exp(-i phi sigma_i) sigma_j exp(i phi sigma_i) for i != j, phi complex.

    Equals cos(2 phi) sigma_j + sin(2 phi) sum_k eps_{ijk} sigma_k.
    """
    if i == j or i not in (1, 2, 3) or j not in (1, 2, 3):
        raise ValueError("indices must be distinct and in {1, 2, 3}")
    out = np.cos(2 * phi) * _PAULI[j - 1]
    for k in range(3):
        eps = _EPSILON_LC[i - 1, j - 1, k]
        if eps:
            out = out + np.sin(2 * phi) * eps * _PAULI[k]
    return out


# ---------------------------------------------------------------------------
# randomized smooth scenarios (seeded; used by tests and the CLI)
# ---------------------------------------------------------------------------

def random_smooth_coeffs(seed: int, tau: float = 1.0, steps: int = 2000,
                         nondegenerate: bool = True) -> TwoLevelCoeffs:
    """Random low-order trigonometric coefficient triple, deterministic in seed.

    With ``nondegenerate`` the draw is retried (deterministically) until
    E(t) stays away from zero and the eigenvector chart is valid.
    """
    grid = np.linspace(0.0, tau, steps + 1)
    for attempt in range(64):
        rng = np.random.default_rng(seed + 7919 * attempt)

        def draw():
            base = rng.uniform(-1.0, 1.0) + 1j * rng.uniform(-1.0, 1.0)
            out = np.full(len(grid), base, dtype=complex)
            for harm in range(1, 3):
                amp = 0.3 * (rng.uniform(-1, 1) + 1j * rng.uniform(-1, 1))
                phase = rng.uniform(0, 2 * np.pi)
                out += amp * np.cos(harm * grid / tau + phase)
            return out

        coeffs = TwoLevelCoeffs(grid, draw(), draw(), draw())
        if not nondegenerate:
            return coeffs
        E = coeffs.E
        if (np.min(np.abs(E)) > 0.3
                and np.min(np.abs(coeffs.a + E)) > 0.3 * np.max(np.abs(E))):
            return coeffs
    raise RuntimeError("could not draw a nondegenerate scenario")

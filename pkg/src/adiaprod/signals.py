"""Time-parameterized matrix signals and propagator tables.

A :class:`HamiltonianSignal` is a complex square-matrix-valued function of
time together with a uniform evaluation grid t_0 = 0 ... t_K = tau and
derivative access. Signals are either analytic (backed by a vectorized
callable) or tabulated (grid samples, cubic interpolation off-grid).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import GridMismatch
from .quadrature import central_difference, fro_norms

MatrixFunc = Callable[[np.ndarray], np.ndarray]


def _check_grid(grid: np.ndarray) -> float:
    if grid.ndim != 1 or grid.shape[0] < 3:
        raise ValueError("grid needs at least 3 points")
    if abs(grid[0]) > 1e-15:
        raise ValueError("grid must start at t = 0")
    steps = np.diff(grid)
    dt = grid[-1] / (grid.shape[0] - 1)
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-9, atol=1e-15):
        raise ValueError("nonuniform grids are rejected")
    return dt


def uniform_grid(tau: float, steps: int) -> np.ndarray:
    if steps < 2:
        raise ValueError("need at least 2 steps")
    return np.linspace(0.0, float(tau), steps + 1)


@dataclass
class HamiltonianSignal:
    grid: np.ndarray
    dim: int
    value_func: MatrixFunc
    derivative_func: MatrixFunc | None = None
    _grid_values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.dt = _check_grid(self.grid)
        vals = self.sample()
        if not np.all(np.isfinite(vals.view(float))):
            raise ValueError("signal has non-finite entries on the grid")
        if self.derivative_func is not None:
            self._check_derivative(vals)

    def _check_derivative(self, vals: np.ndarray) -> None:
        resid = central_difference(vals, self.dt)[1:-1] - self.derivative(self.grid[1:-1])
        scale = 1.0 + float(np.max(fro_norms(vals)))
        tol = max(1e-6, 100.0 * self.dt**2 * scale)
        worst = float(np.max(np.abs(resid)))
        if worst > tol:
            raise ValueError(
                f"supplied derivative inconsistent with values "
                f"(residual {worst:.3e} > {tol:.3e})")

    @property
    def tau(self) -> float:
        return float(self.grid[-1])

    def sample(self) -> np.ndarray:
        """Values on the grid, shape (K+1, dim, dim). Cached."""
        if self._grid_values is None:
            self._grid_values = np.ascontiguousarray(
                self.value_func(self.grid).astype(complex))
            if self._grid_values.shape != (self.grid.shape[0], self.dim, self.dim):
                raise ValueError("value function returned wrong shape")
        return self._grid_values

    def value(self, ts: np.ndarray | float) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        return self.value_func(ts).astype(complex)

    def derivative(self, ts: np.ndarray | float | None = None) -> np.ndarray:
        """dH/dt; on-grid central differences when no derivative was supplied."""
        if ts is None:
            ts = self.grid
            if self.derivative_func is None:
                return central_difference(self.sample(), self.dt)
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if self.derivative_func is not None:
            return self.derivative_func(ts).astype(complex)
        table = central_difference(self.sample(), self.dt)
        return _interp_table(self.grid, table, ts)

    # ---- constructors -------------------------------------------------

    @classmethod
    def from_function(cls, dim: int, tau: float, steps: int, value: MatrixFunc,
                      derivative: MatrixFunc | None = None,
                      vectorized: bool = True) -> "HamiltonianSignal":
        if not vectorized:
            value = _vectorize(value, dim)
            derivative = _vectorize(derivative, dim) if derivative is not None else None
        return cls(uniform_grid(tau, steps), dim, value, derivative)

    @classmethod
    def from_table(cls, grid: np.ndarray, values: np.ndarray,
                   derivative_values: np.ndarray | None = None) -> "HamiltonianSignal":
        """Tabulated signal; off-grid queries use 4-point (cubic) interpolation."""
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=complex)
        dim = values.shape[-1]

        def value(ts):
            return _interp_table(grid, values, ts)

        if derivative_values is not None:
            dtab = np.asarray(derivative_values, dtype=complex)
        else:
            dtab = central_difference(values, _check_grid(grid))

        def derivative(ts):
            return _interp_table(grid, dtab, ts)

        sig = cls(grid, dim, value, derivative)
        sig._grid_values = values
        return sig

    @classmethod
    def constant(cls, matrix: np.ndarray, tau: float, steps: int) -> "HamiltonianSignal":
        matrix = np.asarray(matrix, dtype=complex)
        dim = matrix.shape[0]

        def value(ts):
            return np.broadcast_to(matrix, (len(ts), dim, dim)).copy()

        def derivative(ts):
            return np.zeros((len(ts), dim, dim), dtype=complex)

        return cls(uniform_grid(tau, steps), dim, value, derivative)


def _vectorize(f: Callable[[float], np.ndarray], dim: int) -> MatrixFunc:
    def wrapped(ts: np.ndarray) -> np.ndarray:
        ts = np.atleast_1d(ts)
        out = np.empty((len(ts), dim, dim), dtype=complex)
        for i, t in enumerate(ts):
            out[i] = f(float(t))
        return out
    return wrapped


def _interp_table(grid: np.ndarray, table: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """4-point Lagrange interpolation of a uniformly tabulated matrix signal."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    n = grid.shape[0]
    dt = grid[-1] / (n - 1)
    s = np.clip(ts / dt, 0.0, n - 1.0)
    k = np.clip(np.floor(s).astype(int), 1, n - 3)  # stencil k-1 .. k+2
    x = s - k  # in [-1, 2] near the ends, [0, 1] inside
    w0 = -x * (x - 1.0) * (x - 2.0) / 6.0
    w1 = (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0
    w2 = -(x + 1.0) * x * (x - 2.0) / 2.0
    w3 = (x + 1.0) * x * (x - 1.0) / 6.0
    extra = (1,) * (table.ndim - 1)
    out = (w0.reshape(-1, *extra) * table[k - 1]
           + w1.reshape(-1, *extra) * table[k]
           + w2.reshape(-1, *extra) * table[k + 1]
           + w3.reshape(-1, *extra) * table[k + 2])
    return out


@dataclass
class PropagatorTable:
    """Time-indexed table of one evolution-operator factor, U(t_0) = 1."""

    grid: np.ndarray
    values: np.ndarray  # (K+1, d, d)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape[0] != self.grid.shape[0]:
            raise ValueError("table length does not match grid")

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    def at(self, t: float) -> np.ndarray:
        k = self.index_of(t)
        return self.values[k]

    def index_of(self, t: float) -> int:
        dt = self.grid[1] - self.grid[0]
        k = int(round(t / dt))
        if k < 0 or k >= len(self.grid) or abs(self.grid[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise GridMismatch(f"t={t} is not on the grid")
        return k

    def compose(self, other: "PropagatorTable") -> "PropagatorTable":
        """Pointwise product self(t) @ other(t)."""
        self._require_same_grid(other)
        return PropagatorTable(self.grid, np.einsum("kij,kjl->kil",
                                                    self.values, other.values))

    def inverse(self) -> "PropagatorTable":
        return PropagatorTable(self.grid, np.linalg.inv(self.values))

    def _require_same_grid(self, other: "PropagatorTable") -> None:
        if self.grid.shape != other.grid.shape or not np.allclose(
                self.grid, other.grid, rtol=1e-12, atol=1e-12):
            raise GridMismatch("tables are on different grids")

    @classmethod
    def identity(cls, grid: np.ndarray, dim: int) -> "PropagatorTable":
        vals = np.tile(np.eye(dim, dtype=complex), (len(grid), 1, 1))
        return cls(grid, vals)

"""CSV schemas: propagator tables, comparison tables, tabulated Hamiltonians.

Propagator files carry t followed by Re/Im of U_ij in row-major order, 17
significant digits (lossless double round-trip). The same layout with H_ij
is accepted as tabulated Hamiltonian input.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .signals import HamiltonianSignal, PropagatorTable


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def table_header(dim: int, prefix: str = "u") -> list[str]:
    cols = ["t"]
    for i in range(1, dim + 1):
        for j in range(1, dim + 1):
            cols += [f"re_{prefix}{i}{j}", f"im_{prefix}{i}{j}"]
    return cols


def write_propagator(path: Path, table: PropagatorTable,
                     extra: dict[str, np.ndarray] | None = None) -> None:
    dim = table.dim
    header = table_header(dim)
    extra = extra or {}
    header += list(extra.keys())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        flat = table.values.reshape(len(table.grid), dim * dim)
        for k, t in enumerate(table.grid):
            row = [_fmt(t)]
            for z in flat[k]:
                row += [_fmt(z.real), _fmt(z.imag)]
            row += [_fmt(extra[key][k]) for key in extra]
            writer.writerow(row)


def read_propagator(path: Path) -> PropagatorTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [list(map(float, row)) for row in reader if row]
    ncols = len(header)
    # ignore trailing extra columns (trajectory, errors)
    body = ncols - 1
    dim = int(np.floor(np.sqrt(body / 2)))
    if dim < 1 or 2 * dim * dim > body:
        raise ConfigError(f"{path}: not a propagator table")
    data = np.asarray(rows)
    grid = data[:, 0]
    re = data[:, 1:1 + 2 * dim * dim:2]
    im = data[:, 2:2 + 2 * dim * dim:2]
    values = (re + 1j * im).reshape(len(grid), dim, dim)
    return PropagatorTable(grid, values)


def read_hamiltonian_table(path: Path) -> HamiltonianSignal:
    table = read_propagator(path)
    return HamiltonianSignal.from_table(table.grid, table.values)


def write_comparison(path: Path, grid: np.ndarray, per_t: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "fro_error"])
        for t, e in zip(grid, per_t):
            writer.writerow([_fmt(t), _fmt(e)])

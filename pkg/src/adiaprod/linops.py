"""Small dense complex matrix arithmetic and biorthonormal eigensystems.

The eigensolver pairs right eigenvectors of M with left eigenvectors
(eigenvectors of M^H with conjugated eigenvalues) and rescales the pairs so
that <phi_m,b | psi_n,a> = delta_mn delta_ab holds at working precision,
including inside degenerate groups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DefectiveMatrix, NonConvergence

EPS_DEG = 1e-8   # relative threshold grouping eigenvalues into one level
EPS_BI = 1e-9    # tolerance on biorthonormality / completeness


def fro_norm(M: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(M), "fro"))


def matrix_exp(M: np.ndarray) -> np.ndarray:
    """exp(M) via scipy's scaling-and-squaring Pade kernel."""
    M = np.asarray(M, dtype=complex)
    if not np.all(np.isfinite(M.view(float))):
        raise ValueError("matrix_exp requires finite entries")
    return scipy.linalg.expm(M)


@dataclass
class EigenLevel:
    """One eigenvalue with its degeneracy subspace and paired left vectors."""

    eigenvalue: complex
    right: np.ndarray  # (dim, N) columns psi_{n,a}
    left: np.ndarray   # (dim, N) columns phi_{n,a}

    @property
    def degeneracy(self) -> int:
        return self.right.shape[1]


@dataclass
class BiorthoEigensystem:
    dim: int
    levels: list[EigenLevel]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([lv.eigenvalue for lv in self.levels])

    @property
    def degeneracies(self) -> list[int]:
        return [lv.degeneracy for lv in self.levels]

    def completeness_defect(self) -> float:
        acc = np.zeros((self.dim, self.dim), dtype=complex)
        for lv in self.levels:
            acc += lv.right @ lv.left.conj().T
        return fro_norm(acc - np.eye(self.dim))

    def biortho_defect(self) -> float:
        worst = 0.0
        for m, lm in enumerate(self.levels):
            for n, ln in enumerate(self.levels):
                ov = lm.left.conj().T @ ln.right
                ref = np.eye(lm.degeneracy) if m == n else 0.0
                worst = max(worst, float(np.max(np.abs(ov - ref))))
        return worst

    def reconstruct(self) -> np.ndarray:
        acc = np.zeros((self.dim, self.dim), dtype=complex)
        for lv in self.levels:
            acc += lv.eigenvalue * (lv.right @ lv.left.conj().T)
        return acc


def cluster_eigenvalues(w: np.ndarray, eps_deg: float) -> list[np.ndarray]:
    """Group eigenvalues with |E_i - E_j| <= eps_deg * max(1, |E_i|).

    Returns index groups sorted by (Re, Im) of the group mean.
    """
    n = len(w)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            tol = eps_deg * max(1.0, abs(w[i]), abs(w[j]))
            if abs(w[i] - w[j]) <= tol:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    idx = [np.array(g) for g in groups.values()]
    idx.sort(key=lambda g: (np.mean(w[g]).real, np.mean(w[g]).imag))
    return idx


def pair_eigensystem(w: np.ndarray, V: np.ndarray, wl: np.ndarray,
                     W: np.ndarray, eps_deg: float = EPS_DEG,
                     groups: list[np.ndarray] | None = None) -> BiorthoEigensystem:
    """Build a grouped biorthonormal system from raw left/right eig output.

    Left eigenvectors (of M^H, eigenvalues wl) are matched to right groups by
    conjugated eigenvalue, then rescaled by a small linear solve so the NxN
    overlap block is exactly the identity.
    """
    dim = V.shape[0]
    if groups is None:
        groups = cluster_eigenvalues(w, eps_deg)
    levels = []
    left_taken = np.zeros(dim, dtype=bool)
    for g in groups:
        ev = complex(np.mean(w[g]))
        dist = np.abs(wl.conj() - ev)
        order = np.argsort(dist)
        pick = [j for j in order if not left_taken[j]][: len(g)]
        tol = max(1e3 * eps_deg * max(1.0, abs(ev)), 1e-10)
        if len(pick) < len(g) or np.max(dist[pick]) > tol:
            raise DefectiveMatrix(
                "left/right eigenvalue groups do not match; matrix may be defective")
        left_taken[pick] = True
        Psi = V[:, g]
        Phi_raw = W[:, pick]
        G = Phi_raw.conj().T @ Psi
        # eigen-solver columns have unit norm, so a (near-)defective group
        # shows up as an absolutely tiny singular value of the overlap block
        smin = np.linalg.svd(G, compute_uv=False)[-1]
        if smin < 1e-12:
            raise DefectiveMatrix(
                "degenerate group is not diagonalizable (singular overlap block)")
        Phi = Phi_raw @ np.linalg.inv(G).conj().T
        levels.append(EigenLevel(ev, Psi, Phi))

    system = BiorthoEigensystem(dim, levels)
    defect = system.completeness_defect()
    if defect > max(EPS_BI, 1e3 * eps_deg):
        raise DefectiveMatrix(
            f"completeness defect {defect:.2e}; matrix treated as defective")
    return system


def bi_eigensystem(M: np.ndarray, eps_deg: float = EPS_DEG) -> BiorthoEigensystem:
    """Grouped biorthonormal eigendecomposition of a diagonalizable matrix."""
    M = np.asarray(M, dtype=complex)
    try:
        w, V = np.linalg.eig(M)
        wl, W = np.linalg.eig(M.conj().T)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NonConvergence(str(exc)) from None
    return pair_eigensystem(w, V, wl, W, eps_deg)

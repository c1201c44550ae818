"""Grid quadrature, differencing and small-matrix exponential kernels.

Everything operates on tables sampled over the solver's time grid. The
cumulative integrators return the running integral with the same shape as
the input, anchored to zero at the first grid point.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_simpson


def cumulative_integral(y: np.ndarray, dx: float, axis: int = 0) -> np.ndarray:
    """Cumulative composite-Simpson integral on a uniform grid.

    Complex data is integrated componentwise (scipy's routine would silently
    drop imaginary parts).
    """
    y = np.asarray(y)
    if np.iscomplexobj(y):
        return (cumulative_simpson(y.real, dx=dx, initial=0.0, axis=axis)
                + 1j * cumulative_simpson(y.imag, dx=dx, initial=0.0, axis=axis))
    return cumulative_simpson(y, dx=dx, initial=0.0, axis=axis)


def cumulative_quadratic(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cumulative integral of tabulated data on a (possibly nonuniform) grid.

    Each panel [x_k, x_{k+1}] is integrated with the quadratic through the
    three nearest samples, so on uniform grids this matches cumulative
    Simpson accuracy. ``y`` may have trailing dimensions (matrix tables).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValueError("x and y must share the leading axis")
    if n < 3:
        raise ValueError("need at least 3 samples")

    # stencil (a, b, c) per panel: (k-1, k, k+1) except the first panel (0, 1, 2)
    ia = np.concatenate(([0], np.arange(0, n - 2)))
    ib = ia + 1
    ic = ia + 2
    xa, xb, xc = x[ia], x[ib], x[ic]
    p, q = x[:-1], x[1:]
    h = q - p

    def basis_weight(xj, xk, xl):
        # integral over [p, q] of (x - xk)(x - xl) / ((xj - xk)(xj - xl)),
        # expanded around the panel start to avoid cancellation
        bk = xk - p
        bl = xl - p
        integral = h**3 / 3.0 - (bk + bl) * h**2 / 2.0 + bk * bl * h
        return integral / ((xj - xk) * (xj - xl))

    wa = basis_weight(xa, xb, xc)
    wb = basis_weight(xb, xa, xc)
    wc = basis_weight(xc, xa, xb)

    shape = (n - 1,) + (1,) * (y.ndim - 1)
    panel = (wa.reshape(shape) * y[ia] + wb.reshape(shape) * y[ib]
             + wc.reshape(shape) * y[ic])
    out = np.zeros_like(panel, shape=(n,) + y.shape[1:])
    np.cumsum(panel, axis=0, out=out[1:])
    return out


def central_difference(y: np.ndarray, dx: float, axis: int = 0) -> np.ndarray:
    """Second-order differences: central inside, one-sided at the endpoints."""
    y = np.moveaxis(np.asarray(y), axis, 0)
    d = np.empty_like(y)
    d[1:-1] = (y[2:] - y[:-2]) / (2.0 * dx)
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * dx)
    d[-1] = (3.0 * y[-1] - 4.0 * y[-2] + y[-3]) / (2.0 * dx)
    return np.moveaxis(d, 0, axis)


def continuous_sqrt(z: np.ndarray) -> np.ndarray:
    """Branch-continuous square root along a sampled curve.

    Principal value at the first sample, then the sign at each step is chosen
    so adjacent values stay close (|r_k - r_{k-1}| <= |r_k + r_{k-1}|).
    """
    r = np.sqrt(np.asarray(z, dtype=complex))
    step = np.ones(r.shape[0])
    flip = np.abs(r[1:] - r[:-1]) > np.abs(r[1:] + r[:-1])
    step[1:] = np.where(flip, -1.0, 1.0)
    return np.cumprod(step) * r


def expm2(A: np.ndarray) -> np.ndarray:
    """Exponential of stacked 2x2 complex matrices, closed form.

    exp(A) = e^mu [cosh(q) I + sinhc(q) (A - mu I)] with mu = tr(A)/2 and
    q = sqrt(mu^2 - det A). Robust for nilpotent blocks (q -> 0).
    """
    A = np.asarray(A, dtype=complex)
    single = A.ndim == 2
    if single:
        A = A[None]
    mu = (A[..., 0, 0] + A[..., 1, 1]) / 2.0
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    q = np.sqrt(mu * mu - det)
    small = np.abs(q) < 1e-4
    qs = np.where(small, 0.0, q)
    q2 = q * q
    coshq = np.where(small, 1.0 + q2 / 2.0 + q2 * q2 / 24.0, np.cosh(qs))
    sinhc = np.where(small, 1.0 + q2 / 6.0 + q2 * q2 / 120.0,
                     np.sinh(qs) / np.where(small, 1.0, qs))
    I = np.eye(2, dtype=complex)
    out = np.exp(mu)[..., None, None] * (
        coshq[..., None, None] * I
        + sinhc[..., None, None] * (A - mu[..., None, None] * I))
    return out[0] if single else out


def fro_norms(tables: np.ndarray) -> np.ndarray:
    """Frobenius norm of each matrix in a stacked (K, d, d) table."""
    t = np.asarray(tables)
    return np.sqrt(np.sum(np.abs(t) ** 2, axis=(-2, -1)))

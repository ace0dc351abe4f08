"""Harmonic polynomial machinery.

2D polynomials are stored as complex coefficients ``p`` of ``u = Re sum p_k z^k``.
3D polynomials are dense monomial arrays ``c[a, b, c]`` of ``x^a y^b z^c``.

Real solid harmonics in 3D are generated from the unnormalised (no
Condon-Shortley phase) recurrences for ``R_l^m = r^l P_l^m(cos psi) e^{i m phi}``::

    R_m^m     = (2m - 1) (x + i y) R_{m-1}^{m-1}
    R_{m+1}^m = (2m + 1) z R_m^m
    (l - m) R_l^m = (2l - 1) z R_{l-1}^m - (l + m - 1) r^2 R_{l-2}^m
"""

from __future__ import annotations

from functools import lru_cache
from math import factorial

import numpy as np

_CHUNK = 1 << 16


def basis_length(dimension: int, degree: int) -> int:
    if dimension == 2:
        return 1 if degree == 0 else 2
    return 2 * degree + 1


def basis_labels(dimension: int, degree: int) -> list[tuple[int, str]]:
    """(azimuthal order, 'c'|'s') for each slot of a degree-k coefficient vector.

    2D: ``(cos k, sin k)``; 3D: ``(C^1, S^1, ..., C^k, S^k, C^0)`` so that
    degree 1 is ordered ``(x, y, z)``.
    """
    if dimension == 2:
        return [(0, "c")] if degree == 0 else [(degree, "c"), (degree, "s")]
    labels = []
    for m in range(1, degree + 1):
        labels += [(m, "c"), (m, "s")]
    return labels + [(0, "c")]


def mean_square_on_sphere(dimension: int, degree: int, m: int) -> float:
    """Average of the squared unnormalised basis function over the unit sphere."""
    if dimension == 2:
        return 1.0 if m == 0 else 0.5
    ratio = factorial(degree + m) / (factorial(degree - m) * (2 * degree + 1))
    return ratio * (0.5 if m > 0 else 1.0)


# ----------------------------------------------------------------------------- 3D


def _mul(c, axis):
    out = np.zeros_like(c)
    sl_out = [slice(None)] * 3
    sl_in = [slice(None)] * 3
    sl_out[axis] = slice(1, None)
    sl_in[axis] = slice(None, -1)
    out[tuple(sl_out)] = c[tuple(sl_in)]
    return out


@lru_cache(maxsize=None)
def _solid_table(k: int):
    """All (C_l^m, S_l^m) for l <= k as monomial arrays of shape (k+1,)*3."""
    shape = (k + 1,) * 3
    re, im = {}, {}
    one = np.zeros(shape)
    one[0, 0, 0] = 1.0
    re[0, 0], im[0, 0] = one, np.zeros(shape)

    def r2(c):
        return _mul(_mul(c, 0), 0) + _mul(_mul(c, 1), 1) + _mul(_mul(c, 2), 2)

    for m in range(1, k + 1):
        a, b = re[m - 1, m - 1], im[m - 1, m - 1]
        re[m, m] = (2 * m - 1) * (_mul(a, 0) - _mul(b, 1))
        im[m, m] = (2 * m - 1) * (_mul(b, 0) + _mul(a, 1))
    for m in range(0, k):
        re[m + 1, m] = (2 * m + 1) * _mul(re[m, m], 2)
        im[m + 1, m] = (2 * m + 1) * _mul(im[m, m], 2)
    for m in range(0, k + 1):
        for l in range(m + 2, k + 1):
            for store in (re, im):
                store[l, m] = ((2 * l - 1) * _mul(store[l - 1, m], 2)
                               - (l + m - 1) * r2(store[l - 2, m])) / (l - m)
    return re, im


def solid_harmonic_3d(degree: int, m: int, kind: str, size: int | None = None) -> np.ndarray:
    """Monomial array of C_l^m (kind 'c') or S_l^m (kind 's'), padded to ``size``."""
    re, im = _solid_table(degree)
    arr = (re if kind == "c" else im)[degree, m]
    size = degree + 1 if size is None else size
    out = np.zeros((size,) * 3)
    out[: degree + 1, : degree + 1, : degree + 1] = arr
    return out


def pad3(c: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros((size,) * 3)
    n = c.shape[0]
    out[:n, :n, :n] = c
    return out


class Monomials3D:
    """Fast evaluator of a 3D polynomial and its gradient."""

    def __init__(self, coeffs: np.ndarray):
        c = np.asarray(coeffs, dtype=float)
        K = c.shape[0] - 1
        gx = np.zeros_like(c)
        gy = np.zeros_like(c)
        gz = np.zeros_like(c)
        idx = np.arange(1, K + 1, dtype=float)
        gx[:-1] = c[1:] * idx[:, None, None]
        gy[:, :-1] = c[:, 1:] * idx[None, :, None]
        gz[:, :, :-1] = c[:, :, 1:] * idx[None, None, :]
        stack = np.stack([c, gx, gy, gz], axis=-1)
        used = np.argwhere(np.any(stack != 0.0, axis=-1))
        self.degree = K
        self.exponents = used
        self.table = stack[used[:, 0], used[:, 1], used[:, 2]]  # (n_terms, 4)

    def _apply(self, points: np.ndarray, cols) -> np.ndarray:
        pts = points.reshape(-1, 3)
        out = np.empty((pts.shape[0], len(cols)))
        if len(self.exponents) == 0:
            out[:] = 0.0
            return out
        K = self.degree
        tab = self.table[:, cols]
        for start in range(0, pts.shape[0], _CHUNK):
            p = pts[start:start + _CHUNK]
            pw = np.ones((3, K + 1, p.shape[0]))
            for a in range(1, K + 1):
                pw[:, a] = pw[:, a - 1] * p.T
            e = self.exponents
            mono = pw[0, e[:, 0]] * pw[1, e[:, 1]] * pw[2, e[:, 2]]
            out[start:start + _CHUNK] = mono.T @ tab
        return out

    def value(self, points):
        return self._apply(points, [0])[:, 0].reshape(points.shape[:-1])

    def gradient(self, points):
        return self._apply(points, [1, 2, 3]).reshape(points.shape)


# ----------------------------------------------------------------------------- 2D


def complex_coefficients_2d(degree: int, coeffs) -> np.ndarray:
    """Map (cos k, sin k) coefficients to ``p`` with ``u = Re p_k z^k``."""
    p = np.zeros(degree + 1, dtype=complex)
    if degree == 0:
        p[0] = coeffs[0]
    else:
        p[degree] = coeffs[0] - 1j * coeffs[1]
    return p


def pad2(p: np.ndarray, size: int) -> np.ndarray:
    out = np.zeros(size, dtype=complex)
    out[: len(p)] = p
    return out


def eval_2d(p: np.ndarray, points: np.ndarray) -> np.ndarray:
    z = points[..., 0] + 1j * points[..., 1]
    return np.polyval(p[::-1], z).real


def grad_2d(p: np.ndarray, points: np.ndarray) -> np.ndarray:
    z = points[..., 0] + 1j * points[..., 1]
    if len(p) <= 1:
        return np.zeros(points.shape)
    dp = p[1:] * np.arange(1, len(p))
    w = np.polyval(dp[::-1], z)
    return np.stack([w.real, -w.imag], axis=-1)

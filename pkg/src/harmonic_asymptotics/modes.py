"""Angular modes on circles, spheres, sectors and spherical caps.

Every mode is evaluated through its 0-homogeneous extension
``Y(x) = phi(x / |x|)``, so ``value``/``gradient`` accept arbitrary nonzero
points and ``r**mu * Y`` is the associated solid function.
"""

from __future__ import annotations

import numpy as np
from scipy.special import hyp2f1

from . import _poly


def _radius(x):
    return np.sqrt(np.sum(x * x, axis=-1))


def _angle_2pi(x):
    th = np.arctan2(x[..., 1], x[..., 0])
    return np.where(th < 0, th + 2 * np.pi, th)


class AngularMode:
    """Base class; subclasses set ``dimension``, ``mu`` and ``label``."""

    dimension: int
    mu: float
    label: str

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.label}, mu={self.mu:.12g})"


class FourierMode(AngularMode):
    """cos(m theta) or sin(m theta) on the circle."""

    def __init__(self, m: int, kind: str = "c", normalized: bool = True):
        self.dimension = 2
        self.m = int(m)
        self.kind = kind
        self.mu = float(m)
        self.scale = (1.0 if m == 0 else np.sqrt(2.0)) if normalized else 1.0
        name = "1" if m == 0 else f"{'cos' if kind == 'c' else 'sin'} {m}theta"
        self.label = name

    def value(self, x):
        th = np.arctan2(x[..., 1], x[..., 0])
        if self.m == 0:
            return np.full(x.shape[:-1], self.scale)
        f = np.cos if self.kind == "c" else np.sin
        return self.scale * f(self.m * th)

    def gradient(self, x):
        th = np.arctan2(x[..., 1], x[..., 0])
        m = self.m
        if m == 0:
            return np.zeros(x.shape)
        dth = -m * np.sin(m * th) if self.kind == "c" else m * np.cos(m * th)
        r2 = np.sum(x * x, axis=-1)
        return self.scale * (dth / r2)[..., None] * np.stack([-x[..., 1], x[..., 0]], axis=-1)


class SphericalHarmonicMode(AngularMode):
    """Real spherical harmonic C_l^m or S_l^m restricted from a solid harmonic."""

    def __init__(self, degree: int, m: int, kind: str = "c", normalized: bool = True):
        self.dimension = 3
        self.degree = int(degree)
        self.m = int(m)
        self.kind = kind
        self.mu = float(degree)
        norm = _poly.mean_square_on_sphere(3, degree, m)
        self.scale = 1.0 / np.sqrt(norm) if normalized else 1.0
        self._poly = _poly.Monomials3D(self.scale * _poly.solid_harmonic_3d(degree, m, kind))
        self.label = f"Y[{degree},{m}{kind}]"

    def value(self, x):
        r = _radius(x)
        return self._poly.value(x) / r ** self.degree

    def gradient(self, x):
        r = _radius(x)[..., None]
        p = self._poly.value(x)[..., None]
        return self._poly.gradient(x) / r ** self.degree - self.degree * p * x / r ** (self.degree + 2)


class SectorMode(AngularMode):
    """Eigenfunction of d^2/dtheta^2 on (0, theta0), Dirichlet or Neumann."""

    def __init__(self, theta0: float, j: int, bc: str, mu: float):
        self.dimension = 2
        self.theta0 = float(theta0)
        self.j = int(j)
        self.bc = bc
        self.mu = float(mu)
        self.freq = j * np.pi / theta0
        self.scale = 1.0 if (bc == "neumann" and j == 0) else np.sqrt(2.0)
        kind = "sin" if bc == "dirichlet" else "cos"
        self.label = f"{kind} {j}pi theta/theta0"

    def value(self, x):
        th = _angle_2pi(x)
        if self.bc == "dirichlet":
            return self.scale * np.sin(self.freq * th)
        return self.scale * np.cos(self.freq * th)

    def gradient(self, x):
        th = _angle_2pi(x)
        if self.bc == "dirichlet":
            d = self.scale * self.freq * np.cos(self.freq * th)
        else:
            d = -self.scale * self.freq * np.sin(self.freq * th)
        r2 = np.sum(x * x, axis=-1)
        return (d / r2)[..., None] * np.stack([-x[..., 1], x[..., 0]], axis=-1)


class CapMode(AngularMode):
    """Regular Legendre-type mode on a polar cap ``psi < psi0``.

    ``phi = scale * sin^m(psi) F(t) {cos, sin}(m varphi)`` with
    ``F = 2F1(m - nu, m + nu + 1; m + 1; t)``, ``t = sin^2(psi / 2)``; then
    ``r**nu * phi`` is harmonic for any real ``nu``.
    """

    def __init__(self, psi0: float, m: int, kind: str, nu: float, mu: float, bc: str, scale: float = 1.0):
        self.dimension = 3
        self.psi0 = float(psi0)
        self.m = int(m)
        self.kind = kind
        self.nu = float(nu)
        self.mu = float(mu)
        self.bc = bc
        self.scale = float(scale)
        self.label = f"cap[m={m}{kind}, nu={nu:.6g}]"

    # profile in the polar angle, used by the spectrum module
    def profile(self, psi):
        m, nu = self.m, self.nu
        t = np.sin(psi / 2) ** 2
        return np.sin(psi) ** m * hyp2f1(m - nu, m + nu + 1, m + 1, t)

    def profile_derivative(self, psi):
        m, nu = self.m, self.nu
        t = np.sin(psi / 2) ** 2
        a, b, c = m - nu, m + nu + 1, m + 1
        F = hyp2f1(a, b, c, t)
        dF = (a * b / c) * hyp2f1(a + 1, b + 1, c + 1, t) * np.sin(psi) / 2
        if m == 0:
            return dF
        s = np.sin(psi)
        return m * s ** (m - 1) * np.cos(psi) * F + s ** m * dF

    def _parts(self, x):
        r = _radius(x)
        m, nu = self.m, self.nu
        t = 0.5 * (1.0 - x[..., 2] / r)
        a, b, c = m - nu, m + nu + 1, m + 1
        F = hyp2f1(a, b, c, t)
        dF = (a * b / c) * hyp2f1(a + 1, b + 1, c + 1, t)
        zeta = x[..., 0] + 1j * x[..., 1]
        if m == 0:
            Q = np.ones_like(r)
            dQ = np.zeros(x.shape)
        else:
            w = zeta ** m
            dw = m * zeta ** (m - 1)
            if self.kind == "c":
                Q = w.real
                dQ = np.stack([dw.real, -dw.imag, np.zeros_like(r)], axis=-1)
            else:
                Q = w.imag
                dQ = np.stack([dw.imag, dw.real, np.zeros_like(r)], axis=-1)
        return r, Q, dQ, F, dF

    def value(self, x):
        r, Q, _, F, _ = self._parts(x)
        return self.scale * Q / r ** self.m * F

    def gradient(self, x):
        r, Q, dQ, F, dF = self._parts(x)
        m = self.m
        rr = r[..., None]
        A = Q / r ** m
        gA = dQ / rr ** m - m * (Q / r ** (m + 2))[..., None] * x
        ez = np.zeros(x.shape)
        ez[..., 2] = 1.0
        gt = -0.5 * (ez / rr - (x[..., 2] / r ** 3)[..., None] * x)
        return self.scale * (F[..., None] * gA + (A * dF)[..., None] * gt)

"""Homogeneities and angular eigenfunctions of model cones.

2D sectors have closed-form spectra.  3D axisymmetric caps ``psi < psi0`` are
handled per azimuthal order by a finite-volume discretisation of

    -(sin psi g')' / sin psi + m^2 g / sin^2 psi = lam g

on a uniform mesh, reduced to a symmetric tridiagonal eigenproblem.  Each
discrete eigenvalue is then refined to the exact root of the boundary
condition for the hypergeometric profile, so that the resulting cone
solutions are exactly harmonic.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import LinAlgError, eigh_tridiagonal
from scipy.optimize import brentq

from .errors import NumericError, SpecificationError
from .frequency import AdmissibleSet
from .modes import AngularMode, CapMode, SectorMode, _angle_2pi

BCS = ("dirichlet", "neumann")


@dataclass
class Eigenpair:
    mu: float
    lam: float
    mode: AngularMode
    m: int = 0
    kind: str = "c"


@dataclass
class ConeSpec:
    dimension: int
    shape: str            # "sector" | "cap"
    opening: float
    boundary_condition: str
    eigenpairs: list = dc_field(default_factory=list)
    mesh_size: int | None = None

    @property
    def modes(self):
        return [e.mode for e in self.eigenpairs]

    @property
    def mus(self) -> np.ndarray:
        return np.array([e.mu for e in self.eigenpairs])

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([e.lam for e in self.eigenpairs])

    @property
    def full_sphere(self) -> bool:
        return self.shape == "cap" and self.opening >= math.pi

    @property
    def descriptor(self) -> str:
        name = "theta0" if self.shape == "sector" else "psi0"
        return f"{self.shape}({name}={self.opening!r},bc={self.boundary_condition})"

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if self.shape == "sector":
            th = _angle_2pi(x)
            nonzero = np.sum(x * x, axis=-1) > 0
            return nonzero & (th > 0) & (th < self.opening)
        r = np.sqrt(np.sum(x * x, axis=-1))
        if self.full_sphere:
            on_axis = (x[..., 0] == 0) & (x[..., 1] == 0) & (x[..., 2] <= 0)
            return (r > 0) & ~on_axis
        return (r > 0) & (x[..., 2] > r * math.cos(self.opening))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["j", "m", "lambda", "mu"])
            for j, e in enumerate(self.eigenpairs, 1):
                w.writerow([j, e.m, f"{e.lam:.17g}", f"{e.mu:.17g}"])


def _check_bc(bc):
    if bc not in BCS:
        raise SpecificationError(f"boundary condition must be one of {BCS}, got {bc!r}")


def mu_from_lambda(lam, dimension: int = 3):
    lam = np.maximum(np.asarray(lam, dtype=float), 0.0)   # clamp rounding-level negatives
    a = dimension - 2
    return (-a + np.sqrt(a * a + 4 * lam)) / 2


# ----------------------------------------------------------------------------- sectors


def sector_spectrum(theta0: float, bc: str = "dirichlet", count: int = 5) -> ConeSpec:
    """Closed form ``mu_j = j pi / theta0`` with sine (Dirichlet) or cosine (Neumann) modes."""
    _check_bc(bc)
    if not (0 < theta0 <= 2 * math.pi):
        raise SpecificationError(f"sector opening must lie in (0, 2 pi], got {theta0}")
    if count < 1:
        raise SpecificationError("count must be >= 1")
    js = range(1, count + 1) if bc == "dirichlet" else range(count)
    pairs = []
    for j in js:
        mu = j * math.pi / theta0
        pairs.append(Eigenpair(mu, mu * mu, SectorMode(theta0, j, bc, mu), j, "s" if bc == "dirichlet" else "c"))
    return ConeSpec(2, "sector", float(theta0), bc, pairs)


# ----------------------------------------------------------------------------- caps


def _cap_matrices(psi0: float, m: int, mesh: int, bc: str):
    """Diagonal mass and tridiagonal stiffness of the finite-volume scheme."""
    h = psi0 / mesh
    psi = h * np.arange(mesh + 1)
    lo = np.maximum(psi - h / 2, 0.0)
    hi = np.minimum(psi + h / 2, psi0)
    mass = np.cos(lo) - np.cos(hi)
    s_half = np.sin(psi[:-1] + h / 2)              # flux weights between i and i+1
    diag = np.zeros(mesh + 1)
    diag[:-1] += s_half / h
    diag[1:] += s_half / h
    off = -s_half / h
    if m:
        with np.errstate(divide="ignore"):
            ln_tan = lambda t: np.log(np.tan(t / 2))
            inner = slice(1, None)
            tail = hi[inner]
            # the cell at psi = pi (full sphere) is never kept for m >= 1
            tail = np.where(tail >= math.pi, math.pi - 1e-300, tail)
            diag[inner] += m * m * (ln_tan(tail) - ln_tan(lo[inner]))
    keep = np.ones(mesh + 1, dtype=bool)
    if m:
        keep[0] = False
    full = psi0 >= math.pi
    if (bc == "dirichlet" and not full) or (full and m):
        keep[-1] = False
    idx = np.nonzero(keep)[0]
    d = diag[idx]
    e = off[idx[:-1]]
    return psi, idx, d, e, mass[idx]


def _cap_eigs(psi0, m, mesh, bc, count):
    psi, idx, d, e, mass = _cap_matrices(psi0, m, mesh, bc)
    s = 1.0 / np.sqrt(mass)
    dd = d * s * s
    ee = e * s[:-1] * s[1:]
    k = min(count, len(dd))
    try:
        lam = eigh_tridiagonal(dd, ee, eigvals_only=True, select="i", select_range=(0, k - 1))
    except (LinAlgError, ValueError) as exc:
        raise NumericError(f"cap eigen-solve failed for m={m}: {exc}",
                           {"mesh": mesh, "m": m, "psi0": psi0, "size": len(dd)}) from exc
    if not np.all(np.isfinite(lam)):
        raise NumericError("non-finite cap eigenvalues", {"mesh": mesh, "m": m, "psi0": psi0})
    return np.sort(lam)


def _bc_residual(psi0, m, bc):
    probe = CapMode(psi0, m, "c", 0.0, 0.0, bc)

    def f(nu):
        probe.nu = nu
        return float(probe.profile(psi0) if bc == "dirichlet" else probe.profile_derivative(psi0))
    return f


def _refine_nu(psi0, m, bc, mu):
    """Exact root of the boundary condition for the hypergeometric profile near ``mu``."""
    if psi0 >= math.pi:
        return float(round(mu))
    f = _bc_residual(psi0, m, bc)
    for delta in (1e-4, 1e-3, 1e-2, 5e-2):
        a, b = max(mu - delta, -0.5), mu + delta
        fa, fb = f(a), f(b)
        if fa == 0:
            return a
        if np.isfinite(fa) and np.isfinite(fb) and fa * fb < 0:
            return brentq(f, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    return float(mu)


def _cap_scale(mode: CapMode) -> float:
    """Scale giving unit mean square over the cap (averaged measure)."""
    x, w = np.polynomial.legendre.leggauss(256)
    psi = 0.5 * mode.psi0 * (x + 1)
    g = mode.profile(psi)
    radial = 0.5 * mode.psi0 * np.sum(w * g * g * np.sin(psi))
    azim = 2 * math.pi if mode.m == 0 else math.pi
    area = 2 * math.pi * (1 - math.cos(mode.psi0))
    return 1.0 / math.sqrt(radial * azim / area)


def cap_spectrum(psi0: float, bc: str = "dirichlet", count: int = 5, mesh: int = 2048) -> ConeSpec:
    """First ``count`` homogeneities of the cap ``psi < psi0`` (``psi0 = pi``: full sphere)."""
    _check_bc(bc)
    if not (0 < psi0 <= math.pi):
        raise SpecificationError(f"cap opening must lie in (0, pi], got {psi0}")
    if count < 1:
        raise SpecificationError("count must be >= 1")
    if mesh < 128:
        raise SpecificationError(f"mesh must be >= 128, got {mesh}")
    psi0 = float(psi0)
    found = []
    for m in range(count + 9):
        for lam in _cap_eigs(psi0, m, mesh, bc, count):
            mu = float(mu_from_lambda(lam))
            for p, kind in enumerate(("c", "s") if m else ("c",)):
                found.append((mu, m, p, kind, float(lam)))
    found.sort(key=lambda t: (round(t[0], 9), t[1], t[2]))
    pairs = []
    for mu, m, _, kind, lam in found[:count]:
        nu = _refine_nu(psi0, m, bc, mu)
        mode = CapMode(psi0, m, kind, nu, mu, bc)
        mode.scale = _cap_scale(mode)
        pairs.append(Eigenpair(mu, lam, mode, m, kind))
    return ConeSpec(3, "cap", psi0, bc, pairs, mesh)


def admissible_from_cone(cone: ConeSpec) -> AdmissibleSet:
    """Cone homogeneities as an admissible set (refined roots where available)."""
    vals = [getattr(e.mode, "nu", e.mu) for e in cone.eigenpairs]
    return AdmissibleSet("cone_spectrum", vals, cone=cone)


# ----------------------------------------------------------------------------- shooting oracle


def _shoot(psi0, m, bc, mu, start=1e-3):
    lam = mu * (mu + 1)
    c = (m * (m + 1) / 3 - lam) / (4 * (m + 1))
    g0 = start ** m * (1 + c * start ** 2)
    dg0 = (m * start ** (m - 1) if m else 0.0) + c * (m + 2) * start ** (m + 1)

    def rhs(t, y):
        s = math.sin(t)
        return [y[1], -math.cos(t) / s * y[1] + (m * m / (s * s) - lam) * y[0]]

    sol = solve_ivp(rhs, (start, psi0), [g0, dg0], method="DOP853", rtol=1e-12, atol=1e-14 * max(g0, 1e-300))
    g, dg = sol.y[:, -1]
    return (g if bc == "dirichlet" else dg) / start ** m


def shooting_mu(psi0: float, bc: str, m: int, guess: float, window: float = 0.5, step: float = 0.02) -> float:
    """Independent oracle: integrate the Legendre-type ODE from the pole and bisect on ``mu``."""
    _check_bc(bc)
    f = lambda mu: _shoot(psi0, m, bc, mu)
    grid = np.arange(max(guess - window, 1e-6), guess + window + step, step)
    vals = np.array([f(x) for x in grid])
    roots = [i for i in range(len(grid) - 1) if vals[i] * vals[i + 1] <= 0]
    if not roots:
        raise NumericError("no sign change found while shooting", {"psi0": psi0, "m": m, "guess": guess})
    i = min(roots, key=lambda i: abs(0.5 * (grid[i] + grid[i + 1]) - guess))
    return brentq(f, grid[i], grid[i + 1], xtol=1e-13)

"""Finite-difference solves of second-order elliptic problems on [-1, 1]^2.

The grid has ``n = 2^k + 1`` nodes per side, so the origin is the centre
node.  Node ``(i, j)`` sits at ``x = -1 + j h``, ``y = -1 + i h``.  Operators
are assembled as ``A = -L_h`` so that the pure Laplacian gives a symmetric
positive definite matrix.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import ndimage

from .errors import DataError, NumericError, SpecificationError
from .fields import ScalarField

TOL = 1e-10
MAGIC = b"HAGRID01"


def _check_n(n: int, min_k: int = 6):
    k = int(round(math.log2(n - 1))) if n > 2 else 0
    if n < 3 or 2 ** k + 1 != n or k < min_k:
        raise SpecificationError(f"grid size must be 2^k + 1 with k >= {min_k}, got {n}")
    return 2.0 / (n - 1)


def grid_points(n: int):
    h = 2.0 / (n - 1)
    t = -1.0 + h * np.arange(n)
    X, Y = np.meshgrid(t, t)   # X[i, j] = t[j], Y[i, j] = t[i]
    return X, Y, h


# ----------------------------------------------------------------------------- coefficients


def _finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise DataError(f"coefficient {name} is not finite at a sampling point")
    return arr


class CoefficientSet:
    """``a`` (symmetric 2x2), drift ``W`` and potential ``V`` of ``D_i(a_ij D_j u) + W.Du + V u``.

    Each entry is a vectorised callable on points of shape ``(..., 2)``; ``None``
    means identity / zero.
    """

    def __init__(self, a: Callable | None = None, W: Callable | None = None, V: Callable | None = None,
                 bounds: tuple[float, float] | None = None, descriptor: str = "coefficients"):
        self.a, self.W, self.V = a, W, V
        self.bounds = bounds
        self.descriptor = descriptor
        self.observed_bounds: tuple[float, float] | None = None

    @property
    def is_laplacian(self):
        return self.a is None and self.W is None and self.V is None

    def matrix_at(self, pts):
        if self.a is None:
            out = np.zeros(pts.shape[:-1] + (2, 2))
            out[..., 0, 0] = out[..., 1, 1] = 1.0
            return out
        return _finite("a", np.asarray(self.a(pts), dtype=float))

    def drift_at(self, pts):
        if self.W is None:
            return np.zeros(pts.shape)
        return _finite("W", np.asarray(self.W(pts), dtype=float))

    def potential_at(self, pts):
        if self.V is None:
            return np.zeros(pts.shape[:-1])
        return _finite("V", np.asarray(self.V(pts), dtype=float) * np.ones(pts.shape[:-1]))

    def check_ellipticity(self, A):
        a11, a12, a21, a22 = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]
        if not np.allclose(a12, a21, rtol=1e-12, atol=1e-14):
            raise SpecificationError("coefficient matrix a is not symmetric")
        mean, dev = 0.5 * (a11 + a22), np.sqrt(0.25 * (a11 - a22) ** 2 + a12 ** 2)
        lo, hi = float(np.min(mean - dev)), float(np.max(mean + dev))
        if lo <= 0:
            raise SpecificationError(f"ellipticity violated at a midpoint (smallest eigenvalue {lo:.3g})")
        if self.bounds is not None:
            bmin, bmax = self.bounds
            if lo < bmin * (1 - 1e-12) or hi > bmax * (1 + 1e-12):
                raise SpecificationError(
                    f"sampled eigenvalues [{lo:.6g}, {hi:.6g}] leave the bounds [{bmin}, {bmax}]")
        self.observed_bounds = (lo, hi)

    def scaling_certificate(self, radii, panels: int = 40, gl: int = 8, angles: int = 64) -> np.ndarray:
        """``avg_{B_r} (|a - a(0)|^2 + r^2 |W|^2 + r^4 |V|^2)`` at each radius."""
        a0 = self.matrix_at(np.zeros(2))
        x, w = np.polynomial.legendre.leggauss(gl)
        th = 2 * np.pi * (np.arange(angles) + 0.5) / angles
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
        out = []
        for r in np.atleast_1d(radii):
            edges = np.geomspace(r * 1e-8, r, panels + 1)
            a_, b_ = edges[:-1, None], edges[1:, None]
            s = (0.5 * (a_ + b_) + 0.5 * (b_ - a_) * x).ravel()
            ws = (0.5 * (b_ - a_) * w).ravel() * s
            pts = s[:, None, None] * dirs[None, :, :]
            da = self.matrix_at(pts) - a0
            dens = np.sum(da * da, axis=(-1, -2))
            dens = dens + r * r * np.sum(self.drift_at(pts) ** 2, axis=-1) + r ** 4 * self.potential_at(pts) ** 2
            integral = np.sum(ws[:, None] * dens) * (2 * np.pi / angles)
            out.append(integral / (np.pi * r * r))
        return np.array(out)


# ----------------------------------------------------------------------------- domains


class DomainMask:
    """Domain ``Omega`` cut off by the unit disc (or the square for ``full_square``)."""

    KINDS = ("full_square", "half_disc", "sector", "cusp_curve", "disc")

    def __init__(self, kind: str, omega: Callable | None = None, params: dict | None = None):
        if kind not in self.KINDS:
            raise SpecificationError(f"unknown domain kind {kind!r}")
        self.kind = kind
        self.omega = omega
        self.params = params or {}

    @classmethod
    def full_square(cls):
        return cls("full_square")

    @classmethod
    def disc(cls):
        return cls("disc", lambda p: np.ones(p.shape[:-1], dtype=bool))

    @classmethod
    def half_disc(cls):
        return cls("half_disc", lambda p: p[..., 1] > 0)

    @classmethod
    def sector(cls, theta0: float):
        if not 0 < theta0 <= 2 * math.pi:
            raise SpecificationError(f"sector opening must lie in (0, 2 pi], got {theta0}")

        def omega(p):
            th = np.arctan2(p[..., 1], p[..., 0])
            th = np.where(th < 0, th + 2 * np.pi, th)
            return (np.sum(p * p, axis=-1) > 0) & (th > 0) & (th < theta0)
        return cls("sector", omega, {"theta0": float(theta0)})

    @classmethod
    def cusp_curve(cls, curve: Callable, descriptor: str = "curve"):
        """``Omega = {y > curve(x)}``."""
        return cls("cusp_curve", lambda p: p[..., 1] > curve(p[..., 0]), {"curve": descriptor})

    @property
    def descriptor(self):
        extra = ",".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{self.kind}({extra})"

    def classify(self, n: int):
        """Node categories: unknown, Dirichlet data (g) and clipped (zero)."""
        X, Y, h = grid_points(n)
        pts = np.stack([X, Y], axis=-1)
        if self.kind == "full_square":
            unknown = np.zeros((n, n), dtype=bool)
            unknown[1:-1, 1:-1] = True
            return unknown, ~unknown, np.zeros((n, n), dtype=bool)
        inside = self.omega(pts)
        interior = X ** 2 + Y ** 2 < 1.0 - 1e-12
        unknown = inside & interior
        data = inside & ~interior
        return unknown, data, ~inside


def _check_connected(unknown):
    labels, count = ndimage.label(unknown)
    if count == 0:
        raise SpecificationError("mask has no interior nodes")
    if count > 1:
        raise SpecificationError(f"mask is disconnected ({count} components)")


# ----------------------------------------------------------------------------- Robin data


@dataclass
class RobinData:
    """Robin potential on the flat boundary ``{y = 0}``, parametrised by ``x`` (arclength)."""

    eta: Callable
    descriptor: str = "eta"

    def integrability(self, samples: int = 1 << 16) -> dict:
        """Estimated ``L_3`` and ``L_inf`` norms on ``(-1, 1)`` (midpoint sampling)."""
        h = 2.0 / samples
        s = -1 + h * (np.arange(samples) + 0.5)
        v = np.abs(np.asarray(self.eta(s), dtype=float) * np.ones_like(s))
        if not np.all(np.isfinite(v)):
            raise DataError("eta is not finite at a midpoint sample")
        return {"p": 3, "L3": float((np.sum(v ** 3) * h) ** (1 / 3)), "Linf": float(v.max())}

    def sample(self, x: np.ndarray, h: float) -> np.ndarray:
        """Values at boundary nodes; non-finite nodes are re-sampled half a spacing along the boundary."""
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            v = np.asarray(self.eta(x), dtype=float) * np.ones_like(x)
        bad = ~np.isfinite(v)
        if np.any(bad):
            v = v.copy()
            with np.errstate(all="ignore"):
                v[bad] = np.asarray(self.eta(x[bad] + h / 2), dtype=float) * np.ones(int(bad.sum()))
            if not np.all(np.isfinite(v)):
                i = int(np.nonzero(~np.isfinite(v))[0][0])
                raise DataError(f"eta is not finite at regularized node x = {x[i] + h / 2:.6g}")
        return v


# ----------------------------------------------------------------------------- solution


@dataclass
class GridSolution:
    n: int
    h: float
    values: np.ndarray              # NaN where undefined
    unknown: np.ndarray = dc_field(repr=False)
    residual: float = 0.0
    iterations: int = 0
    metadata: dict = dc_field(default_factory=dict)
    trace: list = dc_field(default_factory=list, repr=False)

    @property
    def mask(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def mask_hash(self) -> bytes:
        return hashlib.sha256(np.packbits(self.mask).tobytes()).digest()

    def node_value(self, x: float, y: float) -> float:
        j = int(round((x + 1) / self.h))
        i = int(round((y + 1) / self.h))
        return float(self.values[i, j])

    def write_binary(self, path):
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<qd", self.n, self.h))
            fh.write(self.mask_hash)
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def read_binary(cls, path) -> "GridSolution":
        with open(path, "rb") as fh:
            if fh.read(len(MAGIC)) != MAGIC:
                raise DataError(f"{path}: not a grid-solution file")
            n, h = struct.unpack("<qd", fh.read(16))
            digest = fh.read(32)
            vals = np.frombuffer(fh.read(8 * n * n), dtype="<f8")
        if vals.size != n * n:
            raise DataError(f"{path}: truncated payload")
        sol = cls(int(n), float(h), vals.reshape(n, n).copy(), np.zeros((n, n), dtype=bool))
        if sol.mask_hash != digest:
            raise DataError(f"{path}: mask hash mismatch")
        return sol

    def write_csv(self, path):
        X, Y, _ = grid_points(self.n)
        m = self.mask
        rows = np.column_stack([X[m], Y[m], self.values[m]])
        np.savetxt(path, rows, fmt="%.17g", delimiter=",", header="x,y,u", comments="")


# ----------------------------------------------------------------------------- assembly


class _Assembler:
    def __init__(self, n, unknown, known):
        self.n = n
        self.unknown = unknown
        self.known = known           # values at non-unknown nodes (NaN = unavailable)
        self.index = -np.ones((n, n), dtype=np.int64)
        self.index[unknown] = np.arange(int(unknown.sum()))
        self.P = np.nonzero(unknown)
        self.size = int(unknown.sum())
        self.rows, self.cols, self.vals = [], [], []
        self.rhs = np.zeros(self.size)

    def add(self, di, dj, coef, sel=None):
        """Add ``coef * u[P + (di, dj)]`` to the rows of the selected unknowns."""
        I, J = self.P
        p = np.arange(self.size)
        if sel is not None:
            I, J, p, coef = I[sel], J[sel], p[sel], coef[sel]
        Qi, Qj = I + di, J + dj
        if np.any((Qi < 0) | (Qi >= self.n) | (Qj < 0) | (Qj >= self.n)):
            raise SpecificationError("stencil leaves the grid; the domain touches the square boundary")
        q = self.index[Qi, Qj]
        inner = q >= 0
        self.rows.append(p[inner])
        self.cols.append(q[inner])
        self.vals.append(coef[inner])
        outer = ~inner & (coef != 0)
        if np.any(outer):
            kv = self.known[Qi[outer], Qj[outer]]
            if not np.all(np.isfinite(kv)):
                raise SpecificationError("stencil references a node without data")
            np.subtract.at(self.rhs, p[outer], coef[outer] * kv)

    def matrix(self):
        r = np.concatenate(self.rows)
        c = np.concatenate(self.cols)
        v = np.concatenate(self.vals)
        return sp.csr_matrix((v, (r, c)), shape=(self.size, self.size))


def _assemble_operator(asm: _Assembler, coeffs: CoefficientSet, h: float, sel=None):
    """Rows of ``-L_h`` for the selected unknowns."""
    I, J = asm.P
    if sel is not None:
        I, J = I[sel], J[sel]
    x, y = -1 + h * J, -1 + h * I
    m = len(x)
    full = sel if sel is not None else slice(None)

    def at(dx, dy):
        return np.stack([x + dx, y + dy], axis=-1)

    def put(di, dj, c):
        coef = np.zeros(asm.size)
        coef[full] = c
        asm.add(di, dj, coef, sel)

    h2 = h * h
    Ae, Aw = coeffs.matrix_at(at(h / 2, 0)), coeffs.matrix_at(at(-h / 2, 0))
    An, As = coeffs.matrix_at(at(0, h / 2)), coeffs.matrix_at(at(0, -h / 2))
    for A in (Ae, Aw, An, As):
        coeffs.check_ellipticity(A)
    a11e, a11w, a22n, a22s = Ae[:, 0, 0], Aw[:, 0, 0], An[:, 1, 1], As[:, 1, 1]
    b_e, b_w, b_n, b_s = Ae[:, 0, 1], Aw[:, 0, 1], An[:, 0, 1], As[:, 0, 1]
    diag = (a11e + a11w + a22n + a22s) / h2
    stencil = {(0, 1): -a11e / h2, (0, -1): -a11w / h2, (1, 0): -a22n / h2, (-1, 0): -a22s / h2}
    if np.any(b_e) or np.any(b_w) or np.any(b_n) or np.any(b_s):
        q = 4 * h2
        # -D_x(a12 D_y u) - D_y(a12 D_x u) with midpoint fluxes
        extra = {
            (1, 0): -(b_e - b_w) / q, (-1, 0): (b_e - b_w) / q,
            (1, 1): -(b_e + b_n) / q, (-1, 1): (b_e + b_s) / q,
            (1, -1): (b_w + b_n) / q, (-1, -1): -(b_w + b_s) / q,
            (0, 1): -(b_n - b_s) / q, (0, -1): (b_n - b_s) / q,
        }
        for k, v in extra.items():
            stencil[k] = stencil.get(k, 0.0) + v
    if coeffs.W is not None:
        We, Ww = coeffs.drift_at(at(h / 2, 0)), coeffs.drift_at(at(-h / 2, 0))
        Wn, Ws = coeffs.drift_at(at(0, h / 2)), coeffs.drift_at(at(0, -h / 2))
        # -W.Du from averaged one-sided differences
        stencil[(0, 1)] = stencil[(0, 1)] - 0.5 * We[:, 0] / h
        stencil[(0, -1)] = stencil[(0, -1)] + 0.5 * Ww[:, 0] / h
        stencil[(1, 0)] = stencil[(1, 0)] - 0.5 * Wn[:, 1] / h
        stencil[(-1, 0)] = stencil[(-1, 0)] + 0.5 * Ws[:, 1] / h
        diag = diag + 0.5 * (We[:, 0] - Ww[:, 0] + Wn[:, 1] - Ws[:, 1]) / h
    if coeffs.V is not None:
        Vc = sum(coeffs.potential_at(at(sx * h / 2, sy * h / 2)) for sx in (-1, 1) for sy in (-1, 1)) / 4
        diag = diag - Vc
    put(0, 0, diag * np.ones(m))
    for (di, dj), c in stencil.items():
        put(di, dj, c * np.ones(m))


def _solve_linear(A, b, tol, preconditioner, symmetric=None, maxiter=None):
    if symmetric is None:
        d = abs(A - A.T)
        symmetric = bool(d.nnz == 0 or d.max() <= 1e-13 * abs(A).max())
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0:
        return np.zeros_like(b), 0.0, 0, [], symmetric
    if preconditioner == "amg":
        import pyamg
        ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric" if symmetric else "nonsymmetric")
        M = ml.aspreconditioner(cycle="V")
    elif preconditioner == "jacobi":
        dinv = 1.0 / A.diagonal()
        M = spla.LinearOperator(A.shape, matvec=lambda v: dinv * v)
    elif preconditioner in (None, "none"):
        M = None
    else:
        raise SpecificationError(f"unknown preconditioner {preconditioner!r}")
    trace = []
    count = [0]

    def cb(xk):
        count[0] += 1
        if count[0] % 10 == 0:
            trace.append(float(np.linalg.norm(b - A @ xk)) / bnorm)

    maxiter = maxiter or max(1000, 20 * int(math.sqrt(A.shape[0])))
    method = spla.cg if symmetric else spla.bicgstab
    x, info = method(A, b, rtol=tol, atol=0.0, M=M, maxiter=maxiter, callback=cb)
    res = float(np.linalg.norm(b - A @ x)) / bnorm
    if info != 0 or not np.all(np.isfinite(x)) or res > 10 * tol:
        raise NumericError(f"{method.__name__} did not converge (info={info}, residual={res:.3e})",
                           {"iterations": count[0], "trace": trace, "residual": res})
    return x, res, count[0], trace, symmetric


def _package(n, h, unknown, known, x, res, its, trace, meta):
    vals = np.where(unknown, 0.0, known)
    vals[unknown] = x
    support = ndimage.binary_dilation(unknown, structure=np.ones((3, 3), dtype=bool))
    vals = np.where(support | unknown, vals, np.nan)
    vals = np.where(np.isfinite(vals), vals, np.nan)
    return GridSolution(n, h, vals, unknown, res, its, meta, trace)


def _known_values(n, data_nodes, zero_nodes, boundary_data):
    X, Y, h = grid_points(n)
    known = np.full((n, n), np.nan)
    known[zero_nodes] = 0.0
    if np.any(data_nodes):
        pts = np.stack([X[data_nodes], Y[data_nodes]], axis=-1)
        g = np.asarray(boundary_data(pts), dtype=float) * np.ones(len(pts))
        if not np.all(np.isfinite(g)):
            raise DataError("boundary data is not finite at a data node")
        known[data_nodes] = g
    return known


def solve_interior(coeffs: CoefficientSet, boundary_data: Callable, n: int, *, tol: float = TOL,
                   preconditioner: str = "amg") -> GridSolution:
    """``D_i(a_ij D_j u) + W.Du + V u = 0`` in the square with Dirichlet data on its boundary."""
    h = _check_n(n)
    unknown, data, zero = DomainMask.full_square().classify(n)
    known = _known_values(n, data, zero, boundary_data)
    asm = _Assembler(n, unknown, known)
    _assemble_operator(asm, coeffs, h)
    A = asm.matrix()
    x, res, its, trace, sym = _solve_linear(A, asm.rhs, tol, preconditioner)
    meta = {"problem": "interior", "coefficients": coeffs.descriptor, "symmetric": sym,
            "observed_bounds": coeffs.observed_bounds, "preconditioner": preconditioner}
    return _package(n, h, unknown, known, x, res, its, trace, meta)


def solve_dirichlet_domain(mask: DomainMask, boundary_data: Callable, n: int, *, tol: float = TOL,
                           preconditioner: str = "amg", coeffs: CoefficientSet | None = None) -> GridSolution:
    """Laplace problem on ``Omega cap B_1``: zero on the clipped boundary, data on the outer cut."""
    h = _check_n(n)
    unknown, data, zero = mask.classify(n)
    _check_connected(unknown)
    known = _known_values(n, data, zero, boundary_data)
    asm = _Assembler(n, unknown, known)
    _assemble_operator(asm, coeffs or CoefficientSet(), h)
    x, res, its, trace, sym = _solve_linear(asm.matrix(), asm.rhs, tol, preconditioner)
    meta = {"problem": "dirichlet", "mask": mask.descriptor, "symmetric": sym, "preconditioner": preconditioner}
    return _package(n, h, unknown, known, x, res, its, trace, meta)


def solve_robin(mask: DomainMask, eta: RobinData, source_data: Callable, n: int, *, tol: float = TOL,
                preconditioner: str = "amg") -> GridSolution:
    """Laplace problem on the upper half disc with ``du/dy = eta u`` on the flat part.

    ``+y`` is the inward normal, so ``eta >= 0`` gives a coercive problem.  The
    outer arc carries Dirichlet data.
    """
    if mask.kind != "half_disc":
        raise SpecificationError("Robin solves are supported on the half disc only")
    h = _check_n(n)
    X, Y, _ = grid_points(n)
    inside = (Y >= -1e-12) & (X ** 2 + Y ** 2 < 1.0 - 1e-12)
    unknown = inside
    data = (Y >= -1e-12) & ~inside
    known = _known_values(n, data, np.zeros((n, n), dtype=bool), source_data)
    _check_connected(unknown)
    asm = _Assembler(n, unknown, known)
    I, J = asm.P
    flat = I == (n - 1) // 2
    _assemble_operator(asm, CoefficientSet(), h, sel=~flat)
    xb = -1 + h * J[flat]
    eta_v = eta.sample(xb, h)
    # -(-3 u0 + 4 u1 - u2) / (2h) + eta u0 = 0, scaled by 1/h to match the interior rows
    one = np.ones_like(xb)
    for di, c in ((0, (1.5 / h + eta_v) / h), (1, -2.0 / h ** 2 * one), (2, 0.5 / h ** 2 * one)):
        coef = np.zeros(asm.size)
        coef[flat] = c
        asm.add(di, 0, coef, flat)
    x, res, its, trace, sym = _solve_linear(asm.matrix(), asm.rhs, tol, preconditioner, symmetric=False)
    meta = {"problem": "robin", "mask": mask.descriptor, "eta": eta.descriptor,
            "integrability": eta.integrability(), "preconditioner": preconditioner}
    return _package(n, h, unknown, known, x, res, its, trace, meta)


# ----------------------------------------------------------------------------- to_field


def to_field(sol: GridSolution, descriptor: str | None = None) -> ScalarField:
    """Bilinear interpolant of the node values; gradients from centred differences."""
    n, h, V = sol.n, sol.h, sol.values
    defined = np.isfinite(V)
    eroded = ndimage.binary_erosion(defined, structure=np.ones((3, 3), dtype=bool))
    cell_ok = eroded[:-1, :-1] & eroded[1:, :-1] & eroded[:-1, 1:] & eroded[1:, 1:]
    Vz = np.where(defined, V, 0.0)
    Gx = np.zeros_like(Vz)
    Gy = np.zeros_like(Vz)
    Gx[:, 1:-1] = (Vz[:, 2:] - Vz[:, :-2]) / (2 * h)
    Gy[1:-1, :] = (Vz[2:, :] - Vz[:-2, :]) / (2 * h)

    def locate(p):
        fx = (p[..., 0] + 1) / h
        fy = (p[..., 1] + 1) / h
        j = np.clip(np.floor(fx).astype(np.int64), 0, n - 2)
        i = np.clip(np.floor(fy).astype(np.int64), 0, n - 2)
        return i, j, fx - j, fy - i

    def indicator(p):
        p = np.asarray(p, dtype=float)
        inbox = (np.abs(p[..., 0]) <= 1) & (np.abs(p[..., 1]) <= 1)
        i, j, _, _ = locate(np.where(inbox[..., None], p, 0.0))
        return inbox & cell_ok[i, j]

    def interp(F, p):
        i, j, tx, ty = locate(p)
        return ((1 - tx) * (1 - ty) * F[i, j] + tx * (1 - ty) * F[i, j + 1]
                + (1 - tx) * ty * F[i + 1, j] + tx * ty * F[i + 1, j + 1])

    def value(p):
        return interp(Vz, p)

    def gradient(p):
        return np.stack([interp(Gx, p), interp(Gy, p)], axis=-1)

    desc = descriptor or f"grid_solution(n={n},mask={sol.mask_hash.hex()[:16]})"
    return ScalarField(2, value, gradient, indicator, gradient_kind="finite-difference", descriptor=desc)

"""Critical zero sets ``{u = |Du| = 0}`` on sampling grids and their box dimension."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SpecificationError
from .quadrature import DEFAULT_OPTIONS, QuadratureOptions, shell_integrals

EPS_U = 1e-3
EPS_G = 1e-3


@dataclass
class CriticalCloud:
    points: np.ndarray
    abs_u: np.ndarray
    abs_grad: np.ndarray
    u_threshold: np.ndarray
    grad_threshold: np.ndarray
    eps_u: float
    eps_g: float
    resolution: int
    region: tuple
    spacing: float

    @property
    def empty(self) -> bool:
        return len(self.points) == 0

    @property
    def dimension(self) -> int:
        return self.points.shape[1] if self.points.ndim == 2 else len(self.region[0])

    def write_csv(self, path):
        d = len(self.region[0])
        names = ["x", "y", "z"][:d] + ["abs_u", "abs_grad"]
        rows = np.column_stack([self.points.reshape(-1, d), self.abs_u, self.abs_grad])
        np.savetxt(path, rows, fmt="%.17g", delimiter=",", header=",".join(names), comments="")


def _local_scale(field, radii_needed, restricted, options):
    """``rho -> (avg_{B_{2 rho}} u^2)^{1/2}`` interpolated in log-log form."""
    lo, hi = float(radii_needed.min()), float(radii_needed.max())
    radii = np.geomspace(2 * lo, 2 * hi, 48)
    integral, measure, _ = shell_integrals(field, radii, "u2", restricted, options)
    s = np.sqrt(np.maximum(integral, 0.0) / measure)
    logs = np.log(np.maximum(s, np.finfo(float).tiny))
    return lambda rho: np.exp(np.interp(np.log(2 * rho), np.log(radii), logs))


def critical_cloud(field, region, resolution: int, eps_u: float = EPS_U, eps_g: float = EPS_G,
                   options: QuadratureOptions = DEFAULT_OPTIONS) -> CriticalCloud:
    """Grid points with ``|u| <= eps_u s(|x|)`` and ``|Du| <= eps_g s(|x|) / |x|``.

    ``s(rho)`` is the root mean square of ``u`` over ``B_{2 rho}`` (intersected
    with the domain for fields that are not defined everywhere).  Use an odd
    resolution on a symmetric box so the origin and the axes are grid nodes.
    """
    lo = np.asarray(region[0], dtype=float)
    hi = np.asarray(region[1], dtype=float)
    d = field.dimension
    if lo.shape != (d,) or hi.shape != (d,) or np.any(hi <= lo):
        raise SpecificationError("region must be a pair of corner points with lo < hi")
    if resolution < 2:
        raise SpecificationError("resolution must be >= 2")
    axes = [np.linspace(lo[k], hi[k], resolution) for k in range(d)]
    spacing = float(np.max((hi - lo) / (resolution - 1)))
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    rho = np.maximum(np.sqrt(np.sum(pts * pts, axis=1)), 0.5 * spacing)

    scale = _local_scale(field, rho, not field.full_space, options)
    chunk = 1 << 18
    keep, au, ag, tu, tg = [], [], [], [], []
    for start in range(0, len(pts), chunk):
        p = pts[start:start + chunk]
        s = scale(rho[start:start + chunk])
        u = np.abs(field.evaluate(p))
        thr_u = eps_u * s
        cand = u <= thr_u
        if not np.any(cand):
            continue
        g = np.linalg.norm(field.gradient(p[cand]), axis=-1)
        thr_g = eps_g * s[cand] / rho[start:start + chunk][cand]
        ok = g <= thr_g
        idx = np.nonzero(cand)[0][ok]
        keep.append(start + idx)
        au.append(u[idx])
        ag.append(g[ok])
        tu.append(thr_u[idx])
        tg.append(thr_g[ok])
    cat = lambda xs, shape: np.concatenate(xs) if xs else np.zeros(shape)
    sel = cat(keep, (0,)).astype(np.int64)
    return CriticalCloud(pts[sel], cat(au, (0,)), cat(ag, (0,)), cat(tu, (0,)), cat(tg, (0,)),
                         float(eps_u), float(eps_g), int(resolution), (tuple(lo), tuple(hi)), spacing)


@dataclass
class DimensionEstimate:
    scales: np.ndarray
    counts: np.ndarray
    slope: float
    stderr: float
    empty: bool = False

    @property
    def band(self):
        return (self.slope - self.stderr, self.slope + self.stderr)

    def summary(self) -> str:
        if self.empty:
            return "empty cloud: slope 0"
        return f"box dimension {self.slope:.4f} +/- {self.stderr:.4f} over {len(self.scales)} scales"


def default_scales(cloud: CriticalCloud) -> np.ndarray:
    """Dyadic fractions of the region width down to two grid spacings."""
    width = float(np.max(np.subtract(cloud.region[1], cloud.region[0])))
    k = int(math.floor(math.log2(width / (2 * cloud.spacing)) + 1e-9))
    return width * 2.0 ** -np.arange(1, max(k, 1) + 1)


def box_dimension(cloud: CriticalCloud, scales=None) -> DimensionEstimate:
    """Least-squares slope of ``log(count)`` against ``log(1 / scale)``."""
    eps = np.sort(np.asarray(default_scales(cloud) if scales is None else scales, dtype=float))[::-1]
    if len(eps) < 4 or np.any(eps <= 0):
        raise SpecificationError("box counting needs at least 4 positive scales")
    if math.log10(eps[0] / eps[-1]) < 1.5 - 1e-9:
        raise SpecificationError(f"scales span {math.log10(eps[0] / eps[-1]):.3f} decades, need >= 1.5")
    if cloud.empty:
        return DimensionEstimate(eps, np.zeros(len(eps), dtype=int), 0.0, 0.0, True)
    lo = np.asarray(cloud.region[0], dtype=float)
    width = np.subtract(cloud.region[1], cloud.region[0])
    counts = []
    for e in eps:
        top = np.maximum(np.ceil(width / e - 1e-9).astype(np.int64) - 1, 0)   # upper face joins the last box
        idx = np.minimum(np.floor((cloud.points - lo) / e).astype(np.int64), top)
        counts.append(len(np.unique(idx, axis=0)))
    counts = np.array(counts)
    X, Y = np.log(1 / eps), np.log(counts)
    A = np.column_stack([X, np.ones_like(X)])
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = Y - A @ coef
    dof = len(X) - 2
    sigma2 = float(resid @ resid) / dof if dof > 0 else 0.0
    se = math.sqrt(sigma2 / float(np.sum((X - X.mean()) ** 2)))
    return DimensionEstimate(eps, counts, float(coef[0]), se)

"""Sphere averages, solid averages and Dirichlet energies on radius grids.

Averages over ``dB_r`` (or ``dB_r`` cut with the domain) are the stored
quantity; raw integrals are recovered by multiplying with the surface measure
``|dB_r| = 2 pi r`` (2D) or ``4 pi r^2`` (3D) times the covered fraction.

Domain restriction is indicator weighted: nodes outside the field's domain
get weight zero and are excluded from the measure.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np

from .errors import DomainError, EmptySetError, EvaluationError, SpecificationError

QUANTITIES = ("sphere_mean_square", "solid_mean_square", "dirichlet_energy", "frequency", "doubling")


@dataclass(frozen=True)
class QuadratureOptions:
    circle_nodes: int = 512
    polar_nodes: int = 64
    azimuth_nodes: int = 128
    restricted_boost: int = 4
    panels: int = 200
    gl_points: int = 8
    inner_factor: float = 1e-6
    workers: int = 1


DEFAULT_OPTIONS = QuadratureOptions()


@dataclass(frozen=True)
class RadialGrid:
    r_min: float
    r_max: float
    count: int
    spacing: str = "logarithmic"

    def __post_init__(self):
        if self.count < 2:
            raise SpecificationError(f"radial grid needs count >= 2, got {self.count}")
        if not (0 < self.r_min < self.r_max):
            raise SpecificationError(f"need 0 < r_min < r_max, got {self.r_min}, {self.r_max}")
        if self.spacing != "logarithmic":
            raise SpecificationError(f"unsupported spacing {self.spacing!r}")

    @property
    def radii(self) -> np.ndarray:
        return np.geomspace(self.r_min, self.r_max, self.count)

    @property
    def ratio(self) -> float:
        return (self.r_max / self.r_min) ** (1.0 / (self.count - 1))


@dataclass
class RadialProfile:
    grid: RadialGrid
    values: np.ndarray
    quantity: str
    est_error: np.ndarray = None
    field_hash: str = ""

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise SpecificationError(f"unknown quantity {self.quantity!r}")
        self.values = np.asarray(self.values, dtype=float)
        if self.est_error is None:
            self.est_error = np.zeros_like(self.values)

    @property
    def radii(self):
        return self.grid.radii

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(f"# quantity={self.quantity} field={self.field_hash}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "value", "est_error"])
            for r, v, e in zip(self.radii, self.values, self.est_error):
                w.writerow([f"{r:.17g}", f"{v:.17g}", f"{e:.17g}"])


# ----------------------------------------------------------------------------- rules


@dataclass(frozen=True)
class SphereRule:
    """Unit-sphere nodes with weights summing to one, plus an embedded coarse rule."""

    nodes: np.ndarray
    weights: np.ndarray
    coarse_weights: np.ndarray = dc_field(repr=False)


@lru_cache(maxsize=32)
def _circle_rule(n: int) -> SphereRule:
    th = 2 * np.pi * (np.arange(n) + 0.5) / n
    nodes = np.stack([np.cos(th), np.sin(th)], axis=-1)
    w = np.full(n, 1.0 / n)
    cw = np.zeros(n)
    cw[::2] = 2.0 / n
    return SphereRule(nodes, w, cw)


@lru_cache(maxsize=32)
def _sphere_rule(n_polar: int, n_az: int) -> SphereRule:
    x, wx = np.polynomial.legendre.leggauss(n_polar)
    ph = 2 * np.pi * (np.arange(n_az) + 0.5) / n_az
    s = np.sqrt(1 - x * x)
    nodes = np.stack([np.outer(s, np.cos(ph)), np.outer(s, np.sin(ph)),
                      np.outer(x, np.ones(n_az))], axis=-1).reshape(-1, 3)
    w = np.outer(wx / 2, np.full(n_az, 1.0 / n_az)).ravel()
    cw = np.outer(wx / 2, np.where(np.arange(n_az) % 2 == 0, 2.0 / n_az, 0.0)).ravel()
    return SphereRule(nodes, w, cw)


def sphere_rule(dimension: int, restricted: bool = False, options: QuadratureOptions = DEFAULT_OPTIONS) -> SphereRule:
    boost = options.restricted_boost if restricted else 1
    if dimension == 2:
        return _circle_rule(options.circle_nodes * boost)
    side = int(round(math.sqrt(boost)))
    return _sphere_rule(options.polar_nodes * side, options.azimuth_nodes * side)


def sphere_measure(dimension: int, r):
    r = np.asarray(r, dtype=float)
    return 2 * np.pi * r if dimension == 2 else 4 * np.pi * r ** 2


def ball_measure(dimension: int, r):
    r = np.asarray(r, dtype=float)
    return np.pi * r ** 2 if dimension == 2 else 4 * np.pi * r ** 3 / 3


# ----------------------------------------------------------------------------- core sampling


def _raise_nonfinite(vals, pts):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise EvaluationError(f"non-finite field value at {pts[bad][0]}",
                              diagnostics={"point": pts[bad][0]})


def _sphere_moments(field, radii, what: str, restricted: bool, rule: SphereRule, workers: int = 1):
    """Per-radius (mean of 1_Omega f, covered fraction) for f = u^2 or |grad u|^2.

    Returns arrays ``(moment, fraction, coarse_moment, coarse_fraction)``.
    """
    radii = np.asarray(radii, dtype=float)
    nodes, w, cw = rule.nodes, rule.weights, rule.coarse_weights
    if field.parts is not None:
        return _moments_from_parts(field, radii, what, restricted, rule)

    def chunk(rs):
        pts = rs[:, None, None] * nodes[None, :, :]
        if restricted:
            mask = field.contains(pts)
        else:
            mask = field.contains(pts)
            if not np.all(mask):
                bad = pts[~mask][0]
                raise DomainError(f"{field.descriptor}: sphere node {bad} outside the domain; "
                                  "use restricted=True", point=bad)
        vals = np.zeros(mask.shape)
        sel = pts[mask]
        if sel.size:
            if what == "u2":
                v = field._value(sel)
                _raise_nonfinite(v, sel)
                vals[mask] = v * v
            else:
                g = field._gradient(sel)
                g2 = np.sum(g * g, axis=-1)
                _raise_nonfinite(g2, sel)
                vals[mask] = g2
        return vals @ w, mask @ w, vals @ cw, mask @ cw

    per = max(1, (1 << 17) // max(1, len(nodes)))
    pieces = [radii[i:i + per] for i in range(0, len(radii), per)]
    if workers > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(workers) as ex:
            out = list(ex.map(chunk, pieces))
    else:
        out = [chunk(p) for p in pieces]
    return tuple(np.concatenate([o[i] for o in out]) for i in range(4))


def _check_parts_finite(arr, sel):
    ok = np.isfinite(arr).reshape(arr.shape[0], arr.shape[1], -1).all(axis=(0, 2))
    if not np.all(ok):
        raise EvaluationError(f"non-finite field value at direction {sel[~ok][0]}",
                              diagnostics={"point": sel[~ok][0]})


def _moments_from_parts(field, radii, what, restricted, rule):
    nodes, w, cw = rule.nodes, rule.weights, rule.coarse_weights
    if np.any(radii <= 0):
        raise DomainError("radius must be positive")
    mask = field.contains(nodes)
    if not restricted and not np.all(mask):
        bad = nodes[~mask][0]
        raise DomainError(f"{field.descriptor}: sphere direction {bad} outside the domain; "
                          "use restricted=True", point=bad)
    sel = nodes[mask]
    wm, cwm = w[mask], cw[mask]
    exps = np.array([p[0] for p in field.parts])
    wts = np.array([p[1] for p in field.parts])
    nr = len(radii)
    if sel.shape[0] == 0:
        z = np.zeros(nr)
        return z, z.copy(), z.copy(), z.copy()
    logr = np.log(radii)
    # parts sharing an exponent are summed pointwise first so cancellations between
    # them stay exact; what remains is a quadratic form in the radial factors, and
    # only the group-by-group Gram matrices over the sphere nodes are needed
    groups, inverse = np.unique(exps, return_inverse=True)
    onehot = (inverse[None, :] == np.arange(len(groups))[:, None]) * wts[None, :]     # (E, P)
    if what == "u2":
        U = np.stack([pf._value(sel) for (_, _, pf) in field.parts])          # (P, n)
        _check_parts_finite(U, sel)
        U = onehot @ U
        S = np.exp(np.outer(logr, groups))                                    # (nr, E)
        gram, cgram = (U * wm) @ U.T, (U * cwm) @ U.T
    else:
        G = np.stack([pf._gradient(sel) for (_, _, pf) in field.parts])       # (P, n, d)
        _check_parts_finite(G, sel)
        G = np.einsum("ep,pnk->enk", onehot, G)
        S = np.exp(np.outer(logr, groups - 1.0))
        gram = sum((G[:, :, k] * wm) @ G[:, :, k].T for k in range(G.shape[2]))
        cgram = sum((G[:, :, k] * cwm) @ G[:, :, k].T for k in range(G.shape[2]))
    moment = np.maximum(np.einsum("rp,pq,rq->r", S, gram, S), 0.0)
    coarse = np.maximum(np.einsum("rp,pq,rq->r", S, cgram, S), 0.0)
    frac = np.full(nr, wm.sum())
    cfrac = np.full(nr, cwm.sum())
    return moment, frac, coarse, cfrac


# ----------------------------------------------------------------------------- public ops


def sphere_mean_square(field, r: float, restricted: bool = False,
                       options: QuadratureOptions = DEFAULT_OPTIONS, *, with_error: bool = False):
    """Average of u^2 over the sphere of radius r (cut with the domain if restricted)."""
    rule = sphere_rule(field.dimension, restricted, options)
    m, f, cm, cf = _sphere_moments(field, [r], "u2", restricted, rule)
    if f[0] <= 0:
        raise EmptySetError(f"sphere of radius {r} does not meet the domain of {field.descriptor}")
    val = m[0] / f[0]
    if with_error:
        err = abs(val - (cm[0] / cf[0] if cf[0] > 0 else val))
        return val, err
    return val


def sphere_mean_squares(field, radii, restricted=False, options=DEFAULT_OPTIONS):
    """Vectorised :func:`sphere_mean_square`; returns (values, est_error, fraction)."""
    rule = sphere_rule(field.dimension, restricted, options)
    radii = np.asarray(radii, dtype=float)
    m, f, cm, cf = _sphere_moments(field, radii, "u2", restricted, rule, options.workers)
    if np.any(f <= 0):
        i = int(np.argmax(f <= 0))
        raise EmptySetError(f"sphere of radius {radii[i]} does not meet the domain of {field.descriptor}")
    val = m / f
    with np.errstate(invalid="ignore", divide="ignore"):
        coarse = np.where(cf > 0, cm / np.where(cf > 0, cf, 1), val)
    return val, np.abs(val - coarse), f


def radial_partition(radii, options: QuadratureOptions = DEFAULT_OPTIONS):
    """GL nodes/weights on a log-spaced partition with every radius as a breakpoint.

    The innermost interval ``[r_0 * inner_factor, r_0]`` gets ``panels``
    panels; later intervals keep the same panel density per decade.
    Returns ``(nodes, weights, ends)``; ``ends[i]`` is the node count up to radius i.
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise SpecificationError("radii must be strictly increasing")
    density = options.panels / math.log10(1.0 / options.inner_factor)
    x, wx = np.polynomial.legendre.leggauss(options.gl_points)
    edges = [np.geomspace(radii[0] * options.inner_factor, radii[0], options.panels + 1)]
    for a, b in zip(radii[:-1], radii[1:]):
        n = max(1, math.ceil(density * math.log10(b / a) - 1e-9))
        edges.append(np.geomspace(a, b, n + 1)[1:])
    edges = np.concatenate(edges)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * wx[None, :]
    # panel index of each radius end
    counts = [options.panels]
    for a, b in zip(radii[:-1], radii[1:]):
        counts.append(max(1, math.ceil(density * math.log10(b / a) - 1e-9)))
    ends = np.cumsum(counts) * options.gl_points
    return nodes.ravel(), weights.ravel(), ends


def _inner_tail(s, S, eps):
    """``int_0^eps S`` for the excluded inner ball, modelling ``S`` as a power of ``s``."""
    if S[0] <= 0 or S[1] <= 0:
        return 0.0
    p = math.log(S[1] / S[0]) / math.log(s[1] / s[0])
    if p <= -0.9:
        return 0.0
    return float(eps * S[0] * (eps / s[0]) ** p / (p + 1))


def shell_integrals(field, radii, what: str, restricted: bool = False,
                    options: QuadratureOptions = DEFAULT_OPTIONS):
    """Cumulative ``int_0^r S(s) ds`` with ``S(s) = int_{dB_s cap Omega} f``.

    ``what`` is ``"grad2"`` (|grad u|^2) or ``"u2"``.  Returns
    ``(integral, measure, est_error)`` at each radius, where ``measure`` is
    the volume of ``B_r cap Omega``.  Radii may be given in any order.
    """
    radii = np.asarray(radii, dtype=float)
    order = np.argsort(radii)
    rs = radii[order]
    uniq, inv = np.unique(rs, return_inverse=True)
    nodes, weights, ends = radial_partition(uniq, options)
    rule = sphere_rule(field.dimension, restricted, options)
    m, f, cm, _ = _sphere_moments(field, nodes, what, restricted, rule, options.workers)
    area = sphere_measure(field.dimension, nodes)
    meas = area * weights
    eps = uniq[0] * options.inner_factor
    tail_m, tail_f = (_inner_tail(nodes[:2], area[:2] * v[:2], eps) for v in (m, f))
    cum = np.concatenate([[0.0], np.cumsum(m * meas)]) + tail_m
    cumf = np.concatenate([[0.0], np.cumsum(f * meas)]) + tail_f
    cumc = np.concatenate([[0.0], np.cumsum(cm * meas)]) + tail_m
    integral = cum[ends][inv]
    measure = cumf[ends][inv]
    err = (np.abs(cum[ends] - cumc[ends]) + 0.5 * tail_m)[inv]
    out = np.empty((3, len(radii)))
    out[0, order], out[1, order], out[2, order] = integral, measure, err
    if np.any(out[1] <= 0):
        raise EmptySetError(f"ball does not meet the domain of {field.descriptor}")
    return out[0], out[1], out[2]


def dirichlet_energy(field, r: float, restricted: bool = False,
                     options: QuadratureOptions = DEFAULT_OPTIONS) -> float:
    """``int_{B_r cap Omega} |grad u|^2`` by radial integration of shell integrals."""
    return float(shell_integrals(field, [r], "grad2", restricted, options)[0][0])


def solid_mean_square(field, r: float, restricted: bool = False,
                      options: QuadratureOptions = DEFAULT_OPTIONS) -> float:
    """Average of u^2 over the ball of radius r (cut with the domain if restricted)."""
    integral, measure, _ = shell_integrals(field, [r], "u2", restricted, options)
    return float(integral[0] / measure[0])


def profile(field, grid: RadialGrid, quantity: str, restricted: bool = False,
            options: QuadratureOptions = DEFAULT_OPTIONS) -> RadialProfile:
    """Evaluate one of the base quantities at every radius of ``grid``."""
    r = grid.radii
    try:
        if quantity == "sphere_mean_square":
            vals, err, _ = sphere_mean_squares(field, r, restricted, options)
        elif quantity == "dirichlet_energy":
            vals, _, err = shell_integrals(field, r, "grad2", restricted, options)
        elif quantity == "solid_mean_square":
            integral, measure, e = shell_integrals(field, r, "u2", restricted, options)
            vals, err = integral / measure, e / measure
        else:
            raise SpecificationError(f"profile() computes base quantities only, not {quantity!r}")
    except (EmptySetError, EvaluationError, DomainError) as exc:
        exc.args = (f"{exc.args[0]} (grid {grid.r_min:g}..{grid.r_max:g})",) + exc.args[1:]
        raise
    return RadialProfile(grid, vals, quantity, err, field.descriptor_hash)

"""Almgren blowups, spectral limit classification and leading-term extraction."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DegenerateFieldError, PreconditionError, SpecificationError
from .fields import ScalarField, combine, power_mode_field
from .frequency import AdmissibleSet, doubling_profile
from .modes import FourierMode, SphericalHarmonicMode
from .quadrature import DEFAULT_OPTIONS, QuadratureOptions, RadialGrid, shell_integrals, sphere_rule



def _mode_mu(mode):
    return float(getattr(mode, "nu", mode.mu))


class SphericalModeBasis:
    """Orthonormal angular modes sampled on a quadrature grid of the angular domain.

    ``weights`` sum to one, so inner products are averages over the domain.
    """

    def __init__(self, dimension, modes, nodes, weights, cone=None):
        self.dimension = dimension
        self.modes = list(modes)
        self.cone = cone
        self.nodes = nodes
        self.weights = weights / np.sum(weights)
        self.matrix = np.stack([m.value(nodes) for m in self.modes])   # (modes, nodes)
        self.mus = np.array([_mode_mu(m) for m in self.modes])

    @property
    def max_count(self):
        return len(self.modes)

    @classmethod
    def full_sphere(cls, dimension: int, max_degree: int, options: QuadratureOptions = DEFAULT_OPTIONS):
        if dimension == 2:
            modes = [FourierMode(0)]
            for k in range(1, max_degree + 1):
                modes += [FourierMode(k, "c"), FourierMode(k, "s")]
        elif dimension == 3:
            from . import _poly
            modes = [SphericalHarmonicMode(k, m, kind) for k in range(max_degree + 1)
                     for (m, kind) in _poly.basis_labels(3, k)]
        else:
            raise SpecificationError(f"dimension must be 2 or 3, got {dimension}")
        rule = sphere_rule(dimension, False, options)
        return cls(dimension, modes, rule.nodes, rule.weights)

    @classmethod
    def from_cone(cls, cone, count: int | None = None, angular_nodes: int = 256, azimuth_nodes: int = 128):
        modes = cone.modes[:count] if count else cone.modes
        x, w = np.polynomial.legendre.leggauss(angular_nodes)
        if cone.dimension == 2:
            th = 0.5 * cone.opening * (x + 1)
            nodes = np.stack([np.cos(th), np.sin(th)], axis=-1)
            weights = w
        else:
            psi = 0.5 * cone.opening * (x + 1)
            phi = 2 * np.pi * (np.arange(azimuth_nodes) + 0.5) / azimuth_nodes
            P, A = np.meshgrid(psi, phi, indexing="ij")
            nodes = np.stack([np.sin(P) * np.cos(A), np.sin(P) * np.sin(A), np.cos(P)], axis=-1).reshape(-1, 3)
            weights = np.repeat(w * np.sin(psi), azimuth_nodes)
        return cls(cone.dimension, modes, nodes, weights, cone)

    def gram(self) -> np.ndarray:
        return (self.matrix * self.weights) @ self.matrix.T

    def project(self, values, weights=None) -> np.ndarray:
        w = self.weights if weights is None else weights
        return self.matrix @ (w * values)

    def eigenspaces(self, tol: float = 1e-8):
        """Groups of mode indices sharing one homogeneity."""
        groups = []
        for i in np.argsort(self.mus, kind="stable"):
            if groups and abs(self.mus[groups[-1][0]] - self.mus[i]) <= tol:
                groups[-1].append(int(i))
            else:
                groups.append([int(i)])
        return groups


@dataclass
class BlowupTrace:
    lam: float
    trace: np.ndarray = dc_field(repr=False)
    coefficients: np.ndarray
    residual_mass: float
    basis: SphericalModeBasis = dc_field(repr=False, default=None)

    @property
    def norm(self) -> float:
        w = self.basis.weights
        return float(np.sqrt(np.sum(w * self.trace ** 2)))

    def mass_on(self, index: int) -> float:
        return float(self.coefficients[index] ** 2)


def blowup_trace(field: ScalarField, lam: float, basis: SphericalModeBasis,
                 restricted: bool = False) -> BlowupTrace:
    """``u(lam w) / (avg_{dB_lam (cap Omega)} u^2)^{1/2}`` sampled on the basis grid."""
    if lam <= 0:
        raise SpecificationError("lambda must be positive")
    if field.dimension != basis.dimension:
        raise SpecificationError("field and basis dimensions differ")
    pts = lam * basis.nodes
    w = basis.weights
    if restricted:
        inside = field.contains(pts)
        vals = np.zeros(len(pts))
        vals[inside] = field.evaluate(pts[inside])
        w = np.where(inside, w, 0.0)
        w = w / np.sum(w)
    else:
        vals = field.evaluate(pts)
    mean = float(np.sum(w * vals * vals))
    if not mean > np.finfo(float).tiny:
        raise DegenerateFieldError(f"sphere average {mean:.3e} at lambda = {lam:.6g}")
    trace = vals / math.sqrt(mean)
    coeffs = basis.project(trace, w)
    return BlowupTrace(float(lam), trace, coeffs, float(1.0 - np.sum(coeffs ** 2)), basis)


def blowup_traces(field, lambdas, basis, restricted=False):
    return [blowup_trace(field, lam, basis, restricted) for lam in lambdas]


# ----------------------------------------------------------------------------- classification


@dataclass
class LimitClassification:
    kind: str                                       # unique | rotating | divergent | indeterminate
    coefficients: np.ndarray | None = None
    eigenspace: tuple | None = None
    angular_speed: float | None = None
    diagnostics: dict = dc_field(default_factory=dict)

    def __str__(self):
        if self.kind == "rotating":
            return f"rotating(eigenspace={list(self.eigenspace)}, speed={self.angular_speed:.6g})"
        return self.kind


def _check_traces(traces):
    if len(traces) < 8:
        raise SpecificationError(f"need at least 8 traces, got {len(traces)}")
    lams = np.array([t.lam for t in traces])
    if np.any(np.diff(lams) >= 0):
        raise SpecificationError("traces must be ordered by strictly decreasing lambda")
    ratios = lams[1:] / lams[:-1]
    if not np.allclose(ratios, ratios[0], rtol=1e-6, atol=0):
        raise SpecificationError("consecutive lambda ratios must be constant")
    b = traces[0].basis
    if any(t.basis is not b for t in traces):
        raise SpecificationError("traces were projected onto different bases")
    return b


def _rotation(C, group, tol):
    """Signed per-step rotation angle inside an eigenspace, or None."""
    sub = C[:, group]
    norms = np.linalg.norm(sub, axis=1)
    if norms.min() <= 10 * tol:
        return None
    _, _, vt = np.linalg.svd(sub / norms[:, None], full_matrices=False)
    xy = (sub / norms[:, None]) @ vt[:2].T
    planar = np.linalg.norm(xy, axis=1)
    if planar.min() < 0.5:
        return None
    steps = np.diff(np.unwrap(np.arctan2(xy[:, 1], xy[:, 0])))
    if np.all(steps >= 10 * tol) or np.all(steps <= -10 * tol):
        return float(np.mean(np.abs(steps)))
    return None


def classify_limit(traces, tol: float = 1e-4) -> LimitClassification:
    """Unique, rotating, divergent or indeterminate behaviour of a blowup sequence."""
    basis = _check_traces(traces)
    C = np.stack([t.coefficients for t in traces])
    resid = np.array([t.residual_mass for t in traces])
    diag = {"residual_mass": resid.tolist()}
    if resid[-1] > 0.5:
        return LimitClassification("divergent", diagnostics=diag)
    tail = C[-5:]
    d = np.linalg.norm(tail[:, None, :] - tail[None, :, :], axis=-1)
    diag["tail_spread"] = float(d.max())
    if d.max() <= tol:
        return LimitClassification("unique", coefficients=tail[-1].copy(), diagnostics=diag)
    groups = basis.eigenspaces()
    norms = np.stack([np.linalg.norm(C[:, g], axis=1) for g in groups], axis=1)
    spread = norms.max(axis=0) - norms.min(axis=0)
    diag["eigenspace_norm_spread"] = spread.tolist()
    if np.all(spread <= tol):
        for g in groups:
            g = [i for i in g if np.abs(C[:, i]).max() > 10 * tol]
            if len(g) < 2:
                continue
            speed = _rotation(C, g, tol)
            if speed is not None:
                return LimitClassification("rotating", eigenspace=tuple(g), angular_speed=speed, diagnostics=diag)
    return LimitClassification("indeterminate", diagnostics=diag)


# ----------------------------------------------------------------------------- expansion


@dataclass
class ExpansionReport:
    leading_mu: float
    leading_coefficients: np.ndarray
    mode_indices: tuple
    residual_exponent: float
    fit_quality: float
    holder_alpha: float | None = None
    degenerate: bool = False
    radii: np.ndarray = dc_field(repr=False, default=None)
    residual_rms: np.ndarray = dc_field(repr=False, default=None)

    @property
    def validated(self) -> bool:
        return (not self.degenerate) and self.fit_quality >= 0.95


def _default_admissible(basis):
    if basis.cone is None:
        return AdmissibleSet.integers()
    from .cones import admissible_from_cone
    return admissible_from_cone(basis.cone)


def extract_leading_term(field: ScalarField, basis: SphericalModeBasis, grid: RadialGrid,
                         restricted: bool = False, *, admissible: AdmissibleSet | None = None,
                         holder_alpha: float | None = None, window: int = 5,
                         options: QuadratureOptions = DEFAULT_OPTIONS) -> ExpansionReport:
    """Leading homogeneous term ``P`` and the decay rate of ``(avg_{B_r} |u - P|^2)^{1/2}``."""
    admissible = admissible or _default_admissible(basis)
    dp = doubling_profile(field, grid, "spherical", restricted, options, admissible=admissible, window=window)
    lim = dp.limit
    diag = {"estimate": lim.estimate, "gap": lim.gap, "spread": lim.spread, "infinite": lim.infinite}
    if lim.infinite or not lim.converged:
        raise PreconditionError("doubling limit did not converge to an admissible value", diag)
    mu = lim.nearest
    idx = tuple(int(i) for i in np.nonzero(np.abs(basis.mus - mu) <= 1e-6)[0])
    if not idx:
        raise PreconditionError(f"basis has no mode with homogeneity {mu}", diag)

    r = grid.radii
    decade = r[r <= r[0] * 10.0]
    coeffs = np.zeros(len(idx))
    sub = basis.matrix[list(idx)]
    for s in decade:
        pts = s * basis.nodes
        if restricted:
            inside = field.contains(pts)
            vals = np.zeros(len(pts))
            vals[inside] = field.evaluate(pts[inside])
        else:
            vals = field.evaluate(pts)
        coeffs += sub @ (basis.weights * vals) / s ** mu
    coeffs /= len(decade)

    pieces = [power_mode_field(mu, basis.modes[i], c) for i, c in zip(idx, coeffs)]
    P = pieces[0] if len(pieces) == 1 else combine(pieces, [1.0] * len(pieces))
    v = combine([field, P], [1.0, -1.0])
    vi, meas, _ = shell_integrals(v, r, "u2", restricted, options)
    ui, _, _ = shell_integrals(field, r, "u2", restricted, options)
    rms_v = np.sqrt(np.maximum(vi, 0) / meas)
    rms_u = np.sqrt(ui / meas)
    if np.all(rms_v <= 1e-12 * rms_u) or np.any(rms_v <= 0):
        return ExpansionReport(mu, coeffs, idx, math.nan, math.nan, holder_alpha, True, r, rms_v)
    X, Y = np.log(r), np.log(rms_v)
    slope, icpt = np.polyfit(X, Y, 1)
    ss_res = float(np.sum((Y - (slope * X + icpt)) ** 2))
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return ExpansionReport(mu, coeffs, idx, float(slope), r2, holder_alpha, False, r, rms_v)


# ----------------------------------------------------------------------------- output


def write_traces_csv(path, traces):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "mode_index", "mu", "coefficient"])
        for t in traces:
            for i, c in enumerate(t.coefficients):
                w.writerow([f"{t.lam:.17g}", i, f"{t.basis.mus[i]:.17g}", f"{c:.17g}"])


def format_classification(result: LimitClassification, basis: SphericalModeBasis) -> str:
    lines = [f"classification: {result}"]
    if result.kind == "unique":
        top = np.argsort(-np.abs(result.coefficients))[:3]
        for i in top:
            lines.append(f"  mode {i} ({basis.modes[i].label}, mu={basis.mus[i]:.6g}): "
                         f"{result.coefficients[i]:.12g}")
    for k, v in result.diagnostics.items():
        if isinstance(v, list):
            v = "[" + ", ".join(f"{x:.3g}" for x in v[-8:]) + "]"
        lines.append(f"  {k}: {v}")
    return "\n".join(lines)

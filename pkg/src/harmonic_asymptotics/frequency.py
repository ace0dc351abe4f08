"""Almgren frequency, doubling indices, rigidity and limiting homogeneity.

Normalisation used throughout: ``F(r) = r D(r) / H(r)`` with ``H`` the raw
surface integral of ``u^2`` (so ``F = k`` on k-homogeneous harmonic fields),
and base-2 doubling indices, for which

    N(r) = (1 / ln 2) * int_r^{2r} F(s) / s ds

holds exactly for harmonic functions near an interior point.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DegenerateFieldError, SpecificationError
from .quadrature import (DEFAULT_OPTIONS, QuadratureOptions, RadialGrid, shell_integrals,
                         sphere_mean_squares, sphere_measure)

DEGENERATE_FLOOR = 1e-30
TOL_CONST = 1e-6
TOL_MONO = 1e-10
INFINITY_CAP = 50.0


@dataclass(frozen=True)
class Classification:
    tag: str            # constant_integer | strictly_increasing | nonmonotone | indeterminate
    k: int | None = None

    def __str__(self):
        return f"constant_integer({self.k})" if self.tag == "constant_integer" else self.tag


@dataclass
class FrequencyProfile:
    grid: RadialGrid
    F: np.ndarray
    min_increment: float
    classification: Classification
    H: np.ndarray = dc_field(repr=False, default=None)
    D: np.ndarray = dc_field(repr=False, default=None)
    est_error: np.ndarray = dc_field(repr=False, default=None)

    @property
    def radii(self):
        return self.grid.radii


@dataclass
class LimitReport:
    estimate: float
    gap: float
    converged: bool
    infinite: bool = False
    nearest: float | None = None
    spread: float = 0.0


@dataclass
class DoublingProfile:
    grid: RadialGrid
    N: np.ndarray
    variant: str
    est_error: np.ndarray = dc_field(repr=False, default=None)
    limit: LimitReport | None = None

    @property
    def radii(self):
        return self.grid.radii

    @property
    def limit_estimate(self):
        return None if self.limit is None else (math.inf if self.limit.infinite else self.limit.estimate)

    @property
    def limit_gap(self):
        return None if self.limit is None else self.limit.gap


class AdmissibleSet:
    """Sorted admissible homogeneities: all non-negative integers, a cone spectrum or a list."""

    def __init__(self, kind: str = "integers", values=None, cone=None):
        if kind not in ("integers", "cone_spectrum", "explicit"):
            raise SpecificationError(f"unknown admissible kind {kind!r}")
        self.kind = kind
        self.cone = cone
        if kind == "integers":
            self._values = None
        else:
            vals = np.sort(np.asarray(values, dtype=float).ravel())
            if vals.size == 0:
                raise SpecificationError("admissible set is empty")
            keep = np.concatenate([[True], np.diff(vals) > 1e-9])    # merge degenerate copies
            self._values = vals[keep]

    @classmethod
    def integers(cls):
        return cls("integers")

    @classmethod
    def explicit(cls, values):
        return cls("explicit", values)

    def values(self, upto: float | None = None) -> np.ndarray:
        if self._values is not None:
            return self._values
        top = 10 if upto is None else max(1, math.ceil(upto) + 1)
        return np.arange(0, top + 1, dtype=float)

    @property
    def min_spacing(self) -> float:
        if self._values is None:
            return 1.0
        if self._values.size == 1:
            return max(1.0, float(self._values[0]))
        return float(np.min(np.diff(self._values)))

    def nearest(self, x: float):
        """(nearest value, distance, tie) with ties resolved to the smaller value."""
        vals = self.values(x)
        d = np.abs(vals - x)
        i = int(np.argmin(d))
        tie = bool(np.sum(np.isclose(d, d[i], rtol=0, atol=1e-12)) > 1)
        return float(vals[i]), float(d[i]), tie

    def __repr__(self):
        return f"AdmissibleSet({self.kind})" if self._values is None else f"AdmissibleSet({self.kind}, {self._values})"


# ----------------------------------------------------------------------------- profiles


def _check_nondegenerate(H, radii, floor):
    # the floor applies to the largest average; small radii of high-degree fields sit far below it
    if not np.max(H) > floor:
        raise DegenerateFieldError(f"largest average {np.max(H):.3e} <= {floor:g}: field vanishes on the grid")
    bad = ~(H > np.finfo(float).tiny)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DegenerateFieldError(f"average {H[i]:.3e} underflows at r = {radii[i]:.6g}")


def _frequency_values(field, radii, restricted, options, floor=DEGENERATE_FLOOR):
    mean, h_err, frac = sphere_mean_squares(field, radii, restricted, options)
    _check_nondegenerate(mean, radii, floor)
    H = mean * frac * sphere_measure(field.dimension, radii)
    D, _, d_err = shell_integrals(field, radii, "grad2", restricted, options)
    F = radii * D / H
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(D > 0, d_err / np.where(D > 0, D, 1), 0.0) + h_err / mean
    return F, H, D, np.abs(F) * rel


def frequency_profile(field, grid: RadialGrid, restricted: bool = False,
                      options: QuadratureOptions = DEFAULT_OPTIONS, *,
                      tol_const: float = TOL_CONST, tol_mono: float = TOL_MONO,
                      degenerate_floor: float = DEGENERATE_FLOOR) -> FrequencyProfile:
    """``F(r) = r D(r) / H(r)`` on the grid, with its rigidity classification."""
    r = grid.radii
    F, H, D, err = _frequency_values(field, r, restricted, options, degenerate_floor)
    inc = np.diff(F)
    prof = FrequencyProfile(grid, F, float(inc.min()), Classification("indeterminate"), H, D, err)
    prof.classification = rigidity_classify(prof, tol_const, tol_mono)
    return prof


def rigidity_classify(profile: FrequencyProfile, tol_const: float = TOL_CONST,
                      tol_mono: float = TOL_MONO) -> Classification:
    """Strictly increasing, constant at an integer, nonmonotone, or indeterminate.

    Increments are compared against ``tol_mono * max(1, |F|)``.
    """
    F = np.asarray(profile.F, dtype=float)
    inc = np.diff(F)
    scale = np.maximum(1.0, np.abs(F[1:]))
    if np.all(inc > tol_mono * scale):
        return Classification("strictly_increasing")
    k = int(round(float(np.mean(F))))
    if np.max(np.abs(F - k)) <= tol_const:
        return Classification("constant_integer", k)
    if np.any(inc < -tol_mono * scale):
        return Classification("nonmonotone")
    return Classification("indeterminate")


def doubling_profile(field, grid: RadialGrid, variant: str = "spherical", restricted: bool = False,
                     options: QuadratureOptions = DEFAULT_OPTIONS, *,
                     admissible: AdmissibleSet | None = None, window: int = 5,
                     degenerate_floor: float = DEGENERATE_FLOOR) -> DoublingProfile:
    """``N(r) = log2 (avg_{2r} u^2 / avg_r u^2)^{1/2}`` over spheres or balls."""
    r = grid.radii
    both = np.concatenate([r, 2 * r])
    if variant == "spherical":
        m, err, _ = sphere_mean_squares(field, both, restricted, options)
    elif variant == "solid":
        integral, measure, e = shell_integrals(field, both, "u2", restricted, options)
        m, err = integral / measure, e / measure
    else:
        raise SpecificationError(f"unknown doubling variant {variant!r}")
    _check_nondegenerate(m, both, degenerate_floor)
    n = len(r)
    N = 0.5 * np.log2(m[n:] / m[:n])
    N_err = 0.5 / math.log(2) * (err[n:] / m[n:] + err[:n] / m[:n])
    prof = DoublingProfile(grid, N, variant, N_err)
    if len(N) >= window:
        prof.limit = limit_homogeneity(prof, admissible or AdmissibleSet.integers(), window)
    return prof


def limit_homogeneity(profile: DoublingProfile, admissible: AdmissibleSet, window: int = 5,
                      cap: float = INFINITY_CAP) -> LimitReport:
    """Median of the ``window`` smallest-radius doubling values and its distance to the set."""
    N = np.asarray(profile.N, dtype=float)
    if len(N) < window:
        raise SpecificationError(f"profile has {len(N)} points, window needs {window}")
    order = np.argsort(profile.radii)
    w = N[order][:window]                       # smallest radii first
    est = float(np.median(w))
    spread = float(np.max(w) - np.min(w))
    if est > cap and w[0] >= w[-1]:
        return LimitReport(math.inf, math.inf, False, True, None, spread)
    nearest, gap, tie = admissible.nearest(est)
    spacing = admissible.min_spacing
    converged = (not tie) and spread <= 0.5 * spacing and gap <= 0.25 * spacing
    return LimitReport(est, gap, converged, False, nearest, spread)


# ----------------------------------------------------------------------------- relation


@dataclass
class RelationReport:
    r: float
    doubling: float
    integral: float
    discrepancy: float
    est_error: float


def check_relation(field, r: float, options: QuadratureOptions = DEFAULT_OPTIONS,
                   nodes: int = 64) -> RelationReport:
    """Compare the spherical doubling index with ``(1/ln 2) int_r^{2r} F(s)/s ds``."""

    def integral(npts):
        x, w = np.polynomial.legendre.leggauss(npts)
        s = 1.5 * r + 0.5 * r * x
        F, _, _, err = _frequency_values(field, s, False, options)
        return float(np.sum(0.5 * r * w * F / s) / math.log(2)), float(np.sum(0.5 * r * w * err / s) / math.log(2))

    mean, m_err, _ = sphere_mean_squares(field, np.array([r, 2 * r]), False, options)
    _check_nondegenerate(mean, np.array([r, 2 * r]), DEGENERATE_FLOOR)
    N = 0.5 * math.log2(mean[1] / mean[0])
    I, I_err = integral(nodes)
    I_coarse, _ = integral(nodes // 2)
    est = (abs(I - I_coarse) + I_err + 0.5 / math.log(2) * float(np.sum(m_err / mean))
           + 64 * np.finfo(float).eps * max(1.0, abs(N)))
    return RelationReport(r, N, I, abs(N - I), est)


# ----------------------------------------------------------------------------- output


def write_limit_report(path, rows):
    """CSV of ``(name, variant, estimate, gap, converged, infinite, nearest, spread)`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "variant", "estimate", "gap", "converged", "infinite", "nearest", "spread"])
        for name, variant, rep in rows:
            w.writerow([name, variant, f"{rep.estimate:.17g}", f"{rep.gap:.17g}", int(rep.converged),
                        int(rep.infinite), "" if rep.nearest is None else f"{rep.nearest:.17g}",
                        f"{rep.spread:.17g}"])


def format_limit_report(name, variant, rep: LimitReport) -> str:
    if rep.infinite:
        return f"{name} [{variant}]: N -> +inf (spread {rep.spread:.3g})"
    return (f"{name} [{variant}]: limit {rep.estimate:.6f}, nearest admissible {rep.nearest:.6g}, "
            f"gap {rep.gap:.3g}, spread {rep.spread:.3g}, converged={rep.converged}")

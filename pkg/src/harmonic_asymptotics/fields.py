"""Exact, analytically differentiable fields used as ground truth.

A :class:`ScalarField` bundles a vectorised value map, its gradient and a
domain predicate.  Points are arrays of shape ``(..., d)``.  Fields whose
domain is a cone (scale invariant) may also expose ``parts``: a decomposition
into exactly homogeneous pieces, which lets the quadrature evaluate them once
on the unit sphere and rescale.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from . import _poly
from .errors import DegenerateFieldError, DomainError, RangeError, SpecificationError
from .modes import AngularMode, FourierMode, SphericalHarmonicMode

LOG_DRIFT_POLE_RADIUS = 1e-3


class ScalarField:
    """Immutable scalar field on (a subset of) R^d."""

    def __init__(
        self,
        dimension: int,
        value: Callable,
        gradient: Callable,
        indicator: Callable | None = None,
        *,
        gradient_kind: str = "analytic",
        descriptor: str = "field",
        parts=None,
    ):
        if dimension not in (2, 3):
            raise SpecificationError(f"dimension must be 2 or 3, got {dimension}")
        self.dimension = dimension
        self._value = value
        self._gradient = gradient
        self._indicator = indicator
        self.gradient_kind = gradient_kind
        self.descriptor = descriptor
        # tuple of (exponent, weight, field) with every field exactly homogeneous
        self.parts = parts

    # -- domain -----------------------------------------------------------------
    @property
    def full_space(self) -> bool:
        return self._indicator is None

    def _points(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.dimension:
            raise SpecificationError(
                f"expected points with last axis {self.dimension}, got shape {pts.shape}")
        return pts

    def contains(self, points) -> np.ndarray:
        pts = self._points(points)
        if self._indicator is None:
            return np.ones(pts.shape[:-1], dtype=bool)
        return np.asarray(self._indicator(pts), dtype=bool)

    def _check(self, pts):
        if self._indicator is None:
            return
        inside = np.asarray(self._indicator(pts), dtype=bool)
        if not np.all(inside):
            bad = pts[~inside][0] if pts.ndim > 1 else pts
            raise DomainError(f"{self.descriptor}: point {bad} is outside the domain", point=bad)

    # -- evaluation -------------------------------------------------------------
    def evaluate(self, points) -> np.ndarray:
        pts = self._points(points)
        self._check(pts)
        return self._value(pts)

    def gradient(self, points) -> np.ndarray:
        pts = self._points(points)
        self._check(pts)
        return self._gradient(pts)

    __call__ = evaluate

    @property
    def descriptor_hash(self) -> str:
        return hashlib.sha256(self.descriptor.encode()).hexdigest()[:16]

    def __repr__(self):
        return f"ScalarField(d={self.dimension}, {self.descriptor})"


def _intersect(indicators):
    active = [f for f in indicators if f is not None]
    if not active:
        return None
    if len(active) == 1:
        return active[0]
    return lambda x: np.logical_and.reduce([f(x) for f in active])


def _not_origin(x):
    return np.sum(x * x, axis=-1) > 0


# ----------------------------------------------------------------------------- polynomials


@dataclass(frozen=True)
class PolynomialSpec:
    """A homogeneous harmonic polynomial in the real spherical-mode basis.

    2D coefficients are for ``(cos k theta, sin k theta)`` (a single entry for
    k = 0); 3D coefficients follow ``(C^1, S^1, ..., C^k, S^k, C^0)`` of the
    unnormalised real solid harmonics, so degree 1 reads ``(x, y, z)``.
    """

    dimension: int
    degree: int
    mode_coefficients: Sequence[float] = dc_field(default_factory=tuple)


class PolynomialField(ScalarField):
    """Harmonic polynomial stored in collapsed coefficient form."""

    def __init__(self, dimension: int, data: np.ndarray, descriptor: str):
        self.data = data
        if dimension == 2:
            value = lambda x: _poly.eval_2d(data, x)
            grad = lambda x: _poly.grad_2d(data, x)
            nz = np.nonzero(data)[0]
            self.degrees = tuple(int(k) for k in nz)
        else:
            ev = _poly.Monomials3D(data)
            value, grad = ev.value, ev.gradient
            total = np.add.outer(np.add.outer(*(np.arange(data.shape[0]),) * 2), np.arange(data.shape[0]))
            self.degrees = tuple(sorted({int(t) for t in total[data != 0]}))
        super().__init__(dimension, value, grad, None, descriptor=descriptor)
        if len(self.degrees) <= 1:
            k = self.degrees[0] if self.degrees else 0
            self.parts = ((float(k), 1.0, self),)
        else:
            self.parts = tuple((float(k), 1.0, self._degree_part(k)) for k in self.degrees)

    def _degree_part(self, k):
        d = self.data
        if self.dimension == 2:
            p = np.zeros_like(d)
            p[k] = d[k]
        else:
            idx = np.arange(d.shape[0])
            total = idx[:, None, None] + idx[None, :, None] + idx[None, None, :]
            p = np.where(total == k, d, 0.0)
        return PolynomialField(self.dimension, p, f"{self.descriptor}|deg{k}")

    @property
    def homogeneity(self) -> int | None:
        return self.degrees[0] if len(self.degrees) == 1 else None


def make_harmonic_polynomial(spec: PolynomialSpec) -> PolynomialField:
    """Realise a homogeneous harmonic polynomial of the given degree."""
    d, k = spec.dimension, spec.degree
    if d not in (2, 3):
        raise SpecificationError(f"dimension must be 2 or 3, got {d}")
    if k < 0:
        raise SpecificationError("degree must be non-negative")
    coeffs = np.asarray(spec.mode_coefficients, dtype=float)
    need = _poly.basis_length(d, k)
    if coeffs.shape != (need,):
        raise SpecificationError(f"degree {k} in {d}D needs {need} coefficients, got {coeffs.size}")
    if not np.any(coeffs):
        raise DegenerateFieldError("all mode coefficients are zero")
    if d == 2:
        data = _poly.complex_coefficients_2d(k, coeffs)
    else:
        data = np.zeros((k + 1,) * 3)
        for c, (m, kind) in zip(coeffs, _poly.basis_labels(3, k)):
            if c:
                data += c * _poly.solid_harmonic_3d(k, m, kind)
    desc = f"polynomial(d={d},k={k},c={[float(c) for c in coeffs]})"
    return PolynomialField(d, data, desc)


def harmonic_mode_field(mode: AngularMode) -> ScalarField:
    """``r**mu * Y`` for a full-sphere mode, returned as an exact polynomial."""
    if isinstance(mode, FourierMode):
        coeffs = [mode.scale] if mode.m == 0 else ([mode.scale, 0.0] if mode.kind == "c" else [0.0, mode.scale])
        return make_harmonic_polynomial(PolynomialSpec(2, mode.m, coeffs))
    if isinstance(mode, SphericalHarmonicMode):
        labels = _poly.basis_labels(3, mode.degree)
        coeffs = [mode.scale if lab == (mode.m, mode.kind) else 0.0 for lab in labels]
        return make_harmonic_polynomial(PolynomialSpec(3, mode.degree, coeffs))
    raise SpecificationError(f"{mode!r} is not a full-sphere harmonic mode")


# ----------------------------------------------------------------------------- log drift


def make_log_drift() -> ScalarField:
    """``u = Re(z / log z)`` on the plane slit along theta = pi, pole at z = 1 removed."""

    def value(x):
        z = x[..., 0] + 1j * x[..., 1]
        return (z / np.log(z)).real

    def gradient(x):
        z = x[..., 0] + 1j * x[..., 1]
        L = np.log(z)
        w = (L - 1.0) / L ** 2
        return np.stack([w.real, -w.imag], axis=-1)

    def indicator(x):
        on_cut = (x[..., 1] == 0) & (x[..., 0] <= 0)
        far_pole = (x[..., 0] - 1.0) ** 2 + x[..., 1] ** 2 > LOG_DRIFT_POLE_RADIUS ** 2
        return ~on_cut & far_pole

    return ScalarField(2, value, gradient, indicator, descriptor="log_drift()")


# ----------------------------------------------------------------------------- power modes


def power_mode_field(exponent: float, mode: AngularMode, amplitude: float = 1.0,
                     indicator: Callable | None = None, descriptor: str | None = None) -> ScalarField:
    """``amplitude * r**exponent * Y(x/|x|)`` with analytic gradient (origin excluded)."""
    e = float(exponent)

    def value(x):
        r = np.sqrt(np.sum(x * x, axis=-1))
        return amplitude * r ** e * mode.value(x)

    def gradient(x):
        r2 = np.sum(x * x, axis=-1)
        r = np.sqrt(r2)
        Y = mode.value(x)
        return amplitude * ((e * r ** (e - 2) * Y)[..., None] * x + (r ** e)[..., None] * mode.gradient(x))

    ind = _intersect([_not_origin, indicator])
    desc = descriptor or f"power_mode(e={e!r},mode={mode.label},a={amplitude!r})"
    f = ScalarField(mode.dimension, value, gradient, ind, descriptor=desc)
    f.parts = ((e, 1.0, f),)
    return f


def make_cone_solution(cone, mode_index: int) -> ScalarField:
    """``r**mu_j phi_j`` on the open cone (``mode_index`` is 1-based)."""
    modes = cone.modes
    if not 1 <= mode_index <= len(modes):
        raise RangeError(f"mode_index {mode_index} outside computed spectrum (1..{len(modes)})")
    mode = modes[mode_index - 1]
    exponent = getattr(mode, "nu", mode.mu)
    desc = f"cone_solution({cone.descriptor},j={mode_index})"
    return power_mode_field(exponent, mode, 1.0, cone.contains, descriptor=desc)


def perturb_power(base: ScalarField, exponent: float, mode: AngularMode, amplitude: float) -> ScalarField:
    """``base + amplitude * r**exponent * mode``."""
    if amplitude == 0:
        return base
    if mode.dimension != base.dimension:
        raise SpecificationError("mode and base field dimensions differ")
    extra = power_mode_field(exponent, mode, amplitude)
    f = combine([base, extra], [1.0, 1.0])
    f.descriptor = f"power_perturbation({base.descriptor},e={exponent!r},mode={mode.label},a={amplitude!r})"
    return f


def rotating_field(mode_a: AngularMode, mode_b: AngularMode, exponent: float = 2.0,
                   rate: float = 1.0) -> ScalarField:
    """Synthetic, non-harmonic ``r**e [cos(rate log r) Y_a + sin(rate log r) Y_b]``."""
    e = float(exponent)

    def value(x):
        r = np.sqrt(np.sum(x * x, axis=-1))
        ph = rate * np.log(r)
        return r ** e * (np.cos(ph) * mode_a.value(x) + np.sin(ph) * mode_b.value(x))

    def gradient(x):
        r2 = np.sum(x * x, axis=-1)
        r = np.sqrt(r2)
        ph = rate * np.log(r)
        c, s = np.cos(ph), np.sin(ph)
        Ya, Yb = mode_a.value(x), mode_b.value(x)
        radial = (e * (c * Ya + s * Yb) + rate * (-s * Ya + c * Yb)) * r ** (e - 2)
        return radial[..., None] * x + (r ** e)[..., None] * (
            c[..., None] * mode_a.gradient(x) + s[..., None] * mode_b.gradient(x))

    desc = f"rotator(e={e!r},rate={rate!r},a={mode_a.label},b={mode_b.label})"
    return ScalarField(mode_a.dimension, value, gradient, _not_origin, descriptor=desc)


# ----------------------------------------------------------------------------- combinators


def combine(fields: Sequence[ScalarField], weights) -> ScalarField:
    """Pointwise weighted sum; the domain is the intersection of the inputs."""
    fields = list(fields)
    w = [float(v) for v in np.atleast_1d(np.asarray(weights, dtype=float))]
    if not fields:
        raise SpecificationError("combine needs at least one field")
    if len(w) != len(fields):
        raise SpecificationError(f"{len(fields)} fields but {len(w)} weights")
    d = fields[0].dimension
    if any(f.dimension != d for f in fields):
        raise SpecificationError("all fields must share one dimension")
    desc = "combination(" + ",".join(f"{wi!r}*{f.descriptor}" for wi, f in zip(w, fields)) + ")"

    if len(fields) > 1 and all(isinstance(f, PolynomialField) for f in fields):
        size = max(f.data.shape[0] for f in fields)
        if d == 2:
            data = sum(wi * _poly.pad2(f.data, size) for wi, f in zip(w, fields))
        else:
            data = sum(wi * _poly.pad3(f.data, size) for wi, f in zip(w, fields))
        return PolynomialField(d, data, desc)

    def value(x):
        out = w[0] * fields[0]._value(x)
        for wi, f in zip(w[1:], fields[1:]):
            out = out + wi * f._value(x)
        return out

    def gradient(x):
        out = w[0] * fields[0]._gradient(x)
        for wi, f in zip(w[1:], fields[1:]):
            out = out + wi * f._gradient(x)
        return out

    kind = "analytic" if all(f.gradient_kind == "analytic" for f in fields) else "finite-difference"
    parts = None
    if all(f.parts is not None for f in fields):
        parts = tuple((e, wi * pw, pf) for wi, f in zip(w, fields) for (e, pw, pf) in f.parts)
    return ScalarField(d, value, gradient, _intersect([f._indicator for f in fields]),
                       gradient_kind=kind, descriptor=desc, parts=parts)


def dilate(field: ScalarField, s: float) -> ScalarField:
    """``x -> u(s x)``."""
    s = float(s)
    ind = None if field._indicator is None else (lambda x: field._indicator(s * x))
    parts = None
    if field.parts is not None:
        parts = tuple((e, pw * s ** e, pf) for (e, pw, pf) in field.parts)
    return ScalarField(field.dimension, lambda x: field._value(s * x),
                       lambda x: s * field._gradient(s * x), ind,
                       gradient_kind=field.gradient_kind,
                       descriptor=f"dilate({field.descriptor},{s!r})", parts=parts)


def fourier_mode(m: int, kind: str = "c") -> FourierMode:
    """Unnormalised cos(m theta)/sin(m theta), as used by power perturbations."""
    return FourierMode(m, kind, normalized=False)


def spherical_mode(degree: int, m: int, kind: str = "c") -> SphericalHarmonicMode:
    """Unnormalised real spherical harmonic C_l^m / S_l^m on the unit sphere."""
    return SphericalHarmonicMode(degree, m, kind, normalized=False)

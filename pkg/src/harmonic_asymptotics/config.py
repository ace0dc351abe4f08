"""Experiment configuration: ``key = value`` lines grouped under ``[section]`` headers.

Comments start with ``#``.  Numeric values may be arithmetic in ``pi``
(``3*pi/2``); lists are comma separated.  Unknown sections and keys are
rejected with the offending line number.
"""

from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError

# section -> allowed keys (``field.*`` sections share the field schema)
FIELD_KEYS = {
    "kind", "dimension", "degree", "coefficients", "shape", "opening", "bc", "mode_index", "count",
    "mesh", "fields", "weights", "base", "exponent", "mode_degree", "mode_m", "mode_kind", "amplitude",
    "rate", "mode_a", "mode_b",
}
SCHEMA = {
    "run": {"name"},
    "field": FIELD_KEYS,
    "grid": {"r_min", "r_max", "count"},
    "analysis": {"restricted", "variants", "window", "admissible", "admissible_values", "tol_const", "tol_mono"},
    "cone": {"shape", "opening", "bc", "count", "mesh"},
    "blowup": {"lambda_max", "ratio", "count", "basis", "max_degree", "tol", "restricted"},
    "solve": {"problem", "n", "domain", "theta0", "tol", "preconditioner", "export_csv"},
    "coefficients": {"a", "drift_exponent", "drift_scale", "potential"},
    "robin": {"eta_exponent", "eta_scale"},
    "singular": {"source", "region_lo", "region_hi", "resolution", "eps_u", "eps_g"},
    "expansion": {"enabled", "holder_alpha"},
}

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "e": math.e, "inf": math.inf}


def _eval_number(text: str) -> float:
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return node.value
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(text)
    return ev(ast.parse(text.strip(), mode="eval"))


@dataclass
class Entry:
    value: str
    line: int


@dataclass
class ExperimentConfig:
    sections: dict = dc_field(default_factory=dict)       # name -> {key: Entry}
    source: str = ""
    seed: int | None = None
    resolved: dict = dc_field(default_factory=dict)       # name -> {key: str}, defaults included

    # -- access ------------------------------------------------------------------
    def has(self, section):
        return section in self.sections

    def _entry(self, section, key):
        return self.sections.get(section, {}).get(key)

    def _record(self, section, key, value):
        self.resolved.setdefault(section, {})[key] = value

    def raw(self, section, key, default=None, required=False):
        e = self._entry(section, key)
        if e is None:
            if required:
                line = self.section_line(section)
                raise ConfigError(f"[{section}] requires key {key!r}", line)
            if default is not None:
                self._record(section, key, str(default))
            return default
        self._record(section, key, e.value)
        return e.value

    def section_line(self, section):
        entries = self.sections.get(section)
        if entries and "__line__" in entries:
            return entries["__line__"].line
        return None

    def number(self, section, key, default=None, required=False) -> float | None:
        text = self.raw(section, key, default, required)
        if text is None:
            return None
        if isinstance(text, (int, float)):
            return float(text)
        try:
            return float(_eval_number(text))
        except (ValueError, SyntaxError, ZeroDivisionError, TypeError):
            raise ConfigError(f"[{section}] {key}: {text!r} is not a number", self._line(section, key))

    def integer(self, section, key, default=None, required=False) -> int | None:
        v = self.number(section, key, default, required)
        if v is None:
            return None
        if v != int(v):
            raise ConfigError(f"[{section}] {key}: expected an integer", self._line(section, key))
        return int(v)

    def numbers(self, section, key, default=None, required=False):
        text = self.raw(section, key, default, required)
        if text is None:
            return None
        if not isinstance(text, str):
            return [float(v) for v in text]
        out = []
        for part in text.split(","):
            try:
                out.append(float(_eval_number(part)))
            except (ValueError, SyntaxError, ZeroDivisionError, TypeError):
                raise ConfigError(f"[{section}] {key}: {part.strip()!r} is not a number", self._line(section, key))
        return out

    def words(self, section, key, default=None, required=False):
        text = self.raw(section, key, default, required)
        if text is None:
            return None
        return [w.strip() for w in str(text).split(",") if w.strip()]

    def boolean(self, section, key, default=False) -> bool:
        text = str(self.raw(section, key, "true" if default else "false")).lower()
        if text in ("true", "yes", "1", "on"):
            return True
        if text in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"[{section}] {key}: expected true/false", self._line(section, key))

    def choice(self, section, key, options, default=None, required=False) -> str | None:
        v = self.raw(section, key, default, required)
        if v is not None and v not in options:
            raise ConfigError(f"[{section}] {key}: {v!r} not one of {sorted(options)}", self._line(section, key))
        return v

    def _line(self, section, key):
        e = self._entry(section, key)
        return e.line if e else self.section_line(section)

    def fail(self, section, key, message):
        raise ConfigError(f"[{section}] {message}", self._line(section, key))

    def resolved_text(self) -> str:
        lines = []
        for sec in sorted(self.resolved):
            lines.append(f"[{sec}]")
            for k in sorted(self.resolved[sec]):
                lines.append(f"{k} = {self.resolved[sec][k]}")
            lines.append("")
        return "\n".join(lines)


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig(source=text)
    current = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", no)
            name = line[1:-1].strip()
            base = name.split(".", 1)[0]
            if base not in SCHEMA or (name != base and base != "field"):
                raise ConfigError(f"unknown section [{name}]", no)
            if name in cfg.sections:
                raise ConfigError(f"duplicate section [{name}]", no)
            cfg.sections[name] = {"__line__": Entry("", no)}
            current = name
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", no)
        if current is None:
            raise ConfigError("key outside of any section", no)
        key, value = (s.strip() for s in line.split("=", 1))
        allowed = SCHEMA[current.split(".", 1)[0]]
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{current}]", no)
        if key in cfg.sections[current]:
            raise ConfigError(f"duplicate key {key!r} in [{current}]", no)
        if value == "":
            raise ConfigError(f"empty value for {key!r}", no)
        cfg.sections[current][key] = Entry(value, no)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# ----------------------------------------------------------------------------- builders


FIELD_KINDS = ("polynomial", "log_drift", "cone_solution", "combination", "power_perturbation", "rotator")


def build_cone(cfg: ExperimentConfig, section: str):
    from .cones import cap_spectrum, sector_spectrum
    shape = cfg.choice(section, "shape", {"sector", "cap"}, required=True)
    opening = cfg.number(section, "opening", required=True)
    bc = cfg.choice(section, "bc", {"dirichlet", "neumann"}, "dirichlet")
    count = cfg.integer(section, "count", 6)
    if shape == "sector":
        return sector_spectrum(opening, bc, count)
    return cap_spectrum(opening, bc, count, cfg.integer(section, "mesh", 2048))


def _angular_mode(cfg, section, dimension, prefix="mode"):
    from .fields import fourier_mode, spherical_mode
    m = cfg.integer(section, f"{prefix}_m", 1)
    kind = cfg.choice(section, f"{prefix}_kind", {"c", "s"}, "c")
    if dimension == 2:
        return fourier_mode(m, kind)
    deg = cfg.integer(section, f"{prefix}_degree", max(m, 1))
    return spherical_mode(deg, m, kind)


def build_field(cfg: ExperimentConfig, section: str = "field", _depth: int = 0):
    """Field described by a ``[field]`` (or ``[field.name]``) section."""
    from . import _poly
    from .fields import (PolynomialSpec, combine, make_cone_solution, make_harmonic_polynomial,
                         make_log_drift, perturb_power, rotating_field)
    from .modes import FourierMode, SphericalHarmonicMode
    if _depth > 8:
        cfg.fail(section, "kind", "field references nest too deeply")
    if not cfg.has(section) or len(cfg.sections[section]) <= 1:
        raise ConfigError(f"field section [{section}] is missing or empty", cfg.section_line(section))
    kind = cfg.choice(section, "kind", set(FIELD_KINDS), required=True)
    if kind == "polynomial":
        d = cfg.integer(section, "dimension", 2)
        k = cfg.integer(section, "degree", required=True)
        if d not in (2, 3) or k < 0:
            cfg.fail(section, "degree", "dimension must be 2 or 3 and degree >= 0")
        text = cfg.raw(section, "coefficients", required=True)
        if text.strip() == "random":
            rng = np.random.default_rng(cfg.seed)
            coeffs = rng.standard_normal(_poly.basis_length(d, k))
            cfg._record(section, "coefficients", ", ".join(f"{c:.17g}" for c in coeffs))
        else:
            coeffs = cfg.numbers(section, "coefficients")
        need = _poly.basis_length(d, k)
        if len(coeffs) != need:
            cfg.fail(section, "coefficients", f"degree {k} in {d}D needs {need} coefficients, got {len(coeffs)}")
        return make_harmonic_polynomial(PolynomialSpec(d, k, coeffs))
    if kind == "log_drift":
        return make_log_drift()
    if kind == "cone_solution":
        cone = build_cone(cfg, section)
        j = cfg.integer(section, "mode_index", 1)
        if not 1 <= j <= len(cone.modes):
            cfg.fail(section, "mode_index", f"mode_index {j} outside 1..{len(cone.modes)}")
        return make_cone_solution(cone, j)
    if kind == "combination":
        names = cfg.words(section, "fields", required=True)
        weights = cfg.numbers(section, "weights", required=True)
        if len(names) != len(weights):
            cfg.fail(section, "weights", f"{len(names)} fields but {len(weights)} weights")
        subs = []
        for nm in names:
            sub = f"field.{nm}"
            if not cfg.has(sub):
                cfg.fail(section, "fields", f"references missing section [{sub}]")
            subs.append(build_field(cfg, sub, _depth + 1))
        return combine(subs, weights)
    if kind == "power_perturbation":
        base_name = cfg.raw(section, "base", required=True)
        if not cfg.has(f"field.{base_name}"):
            cfg.fail(section, "base", f"references missing section [field.{base_name}]")
        base = build_field(cfg, f"field.{base_name}", _depth + 1)
        mode = _angular_mode(cfg, section, base.dimension)
        return perturb_power(base, cfg.number(section, "exponent", required=True), mode,
                             cfg.number(section, "amplitude", 1.0))
    # rotator: synthetic validation field for the rotation detector
    d = cfg.integer(section, "dimension", 3)
    if d == 2:
        ma = FourierMode(cfg.integer(section, "mode_degree", 2), "c")
        mb = FourierMode(cfg.integer(section, "mode_degree", 2), "s")
    else:
        deg = cfg.integer(section, "mode_degree", 2)
        labels = _poly.basis_labels(3, deg)
        ia = cfg.integer(section, "mode_a", 0)
        ib = cfg.integer(section, "mode_b", 1)
        if not (0 <= ia < len(labels) and 0 <= ib < len(labels)) or ia == ib:
            cfg.fail(section, "mode_a", f"mode_a/mode_b must be distinct indices in 0..{len(labels) - 1}")
        ma = SphericalHarmonicMode(deg, *labels[ia])
        mb = SphericalHarmonicMode(deg, *labels[ib])
    return rotating_field(ma, mb, cfg.number(section, "exponent", 2.0), cfg.number(section, "rate", 1.0))


def build_grid(cfg: ExperimentConfig, defaults=(1e-3, 0.5, 40)):
    from .errors import SpecificationError
    from .quadrature import RadialGrid
    try:
        return RadialGrid(cfg.number("grid", "r_min", defaults[0]), cfg.number("grid", "r_max", defaults[1]),
                          cfg.integer("grid", "count", defaults[2]))
    except SpecificationError as exc:
        raise ConfigError(f"[grid] {exc}", cfg.section_line("grid")) from exc


def build_coefficients(cfg: ExperimentConfig):
    from .solver import CoefficientSet
    sec = "coefficients"
    a_text = cfg.raw(sec, "a", "identity")
    a = None
    if a_text != "identity":
        vals = cfg.numbers(sec, "a")
        if len(vals) != 3:
            cfg.fail(sec, "a", "a must be 'identity' or 'a11, a12, a22'")
        A = np.array([[vals[0], vals[1]], [vals[1], vals[2]]])
        a = lambda p, A=A: np.broadcast_to(A, p.shape[:-1] + (2, 2))
    W = None
    e = cfg.raw(sec, "drift_exponent", "none")
    if e != "none":
        ex = cfg.number(sec, "drift_exponent")
        sc = cfg.number(sec, "drift_scale", 1.0)
        # W = -scale x |x|^(ex - 1), so |W| = scale |x|^ex
        W = lambda p, ex=ex, sc=sc: -sc * p * (np.sum(p * p, axis=-1) ** ((ex - 1) / 2))[..., None]
    V = None
    v = cfg.number(sec, "potential", 0.0)
    if v:
        V = lambda p, v=v: np.full(p.shape[:-1], v)
    return CoefficientSet(a, W, V, descriptor=f"a={a_text};W_exp={e};V={v}")


def build_mask(cfg: ExperimentConfig):
    from .solver import DomainMask
    dom = cfg.choice("solve", "domain", {"half_disc", "sector", "disc", "full_square"}, "half_disc")
    if dom == "sector":
        return DomainMask.sector(cfg.number("solve", "theta0", required=True))
    return getattr(DomainMask, dom)()

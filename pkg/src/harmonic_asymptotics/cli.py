"""Batch experiment runner.

    harmonic-asymptotics [--config PATH] [--out DIR] [--threads N] [--seed N] COMMAND

Commands: profile, blowup, spectrum, solve, singular, figure1.  Exit status 0
on success, 2 on configuration errors, 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import (ExperimentConfig, build_coefficients, build_cone, build_field, build_grid, build_mask,
                     load_config, parse_config)
from .errors import AnalysisError, ConfigError, SpecificationError
from .quadrature import DEFAULT_OPTIONS, RadialProfile

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class Run:
    """Output directory bookkeeping plus the manifest."""

    def __init__(self, command, cfg: ExperimentConfig, out, args):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.args = args
        self.files = []
        os.makedirs(out, exist_ok=True)
        self.options = replace(DEFAULT_OPTIONS, workers=max(1, args.threads or 1))

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.out, name)

    def text(self, name, content):
        with open(self.path(name), "w") as fh:
            fh.write(content if content.endswith("\n") else content + "\n")

    def manifest(self):
        resolved = self.cfg.resolved_text()
        lines = [f"# harmonic-asymptotics {__version__} manifest",
                 f"command = {self.command}",
                 f"seed = {self.cfg.seed if self.cfg.seed is not None else 'none'}",
                 f"config_sha256 = {hashlib.sha256(resolved.encode()).hexdigest()}",
                 "", "# resolved configuration", resolved, "# outputs"]
        for name in self.files:
            with open(os.path.join(self.out, name), "rb") as fh:
                lines.append(f"{name} sha256={hashlib.sha256(fh.read()).hexdigest()}")
        with open(os.path.join(self.out, "manifest.txt"), "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _profile_csv(run, name, grid, values, quantity, err, field):
    RadialProfile(grid, values, quantity, err, field.descriptor_hash).write_csv(run.path(name))


def _admissible(cfg, default_cone=None):
    from .cones import admissible_from_cone
    from .frequency import AdmissibleSet
    kind = cfg.choice("analysis", "admissible", {"integers", "cone", "explicit"},
                      "cone" if default_cone is not None else "integers")
    if kind == "explicit":
        return AdmissibleSet.explicit(cfg.numbers("analysis", "admissible_values", required=True))
    if kind == "cone":
        cone = build_cone(cfg, "cone") if cfg.has("cone") else default_cone
        if cone is None:
            raise ConfigError("admissible = cone needs a [cone] section", cfg.section_line("analysis"))
        return admissible_from_cone(cone)
    return AdmissibleSet.integers()


def _doubling_outputs(run, field, grid, restricted, admissible, lines, variants=None):
    from .frequency import doubling_profile, format_limit_report, write_limit_report
    cfg = run.cfg
    variants = variants or cfg.words("analysis", "variants", "spherical, solid")
    window = cfg.integer("analysis", "window", 5)
    rows, profiles = [], {}
    for v in variants:
        if v not in ("spherical", "solid"):
            cfg.fail("analysis", "variants", f"unknown doubling variant {v!r}")
        dp = doubling_profile(field, grid, v, restricted, run.options, admissible=admissible, window=window)
        profiles[v] = dp
        _profile_csv(run, f"N_{v}.csv", grid, dp.N, "doubling", dp.est_error, field)
        rows.append((field.descriptor_hash, v, dp.limit))
        lines.append(format_limit_report(field.descriptor_hash, v, dp.limit))
    write_limit_report(run.path("limits.csv"), rows)
    return profiles


# ----------------------------------------------------------------------------- commands


def cmd_profile(run: Run):
    from .frequency import frequency_profile
    from .quadrature import profile
    from .svgplot import line_plot
    cfg = run.cfg
    field = build_field(cfg)
    grid = build_grid(cfg)
    restricted = cfg.boolean("analysis", "restricted", False)
    H = profile(field, grid, "sphere_mean_square", restricted, run.options)
    D = profile(field, grid, "dirichlet_energy", restricted, run.options)
    H.write_csv(run.path("H.csv"))
    D.write_csv(run.path("D.csv"))
    fp = frequency_profile(field, grid, restricted, run.options,
                           tol_const=cfg.number("analysis", "tol_const", 1e-6),
                           tol_mono=cfg.number("analysis", "tol_mono", 1e-10))
    _profile_csv(run, "F.csv", grid, fp.F, "frequency", fp.est_error, field)
    lines = [f"field: {field.descriptor}", f"field_hash: {field.descriptor_hash}",
             f"classification: {fp.classification}", f"min_increment: {fp.min_increment:.6g}"]
    dps = _doubling_outputs(run, field, grid, restricted, _admissible(cfg), lines)
    series = [(grid.radii, fp.F, "F(r)")] + [(grid.radii, dp.N, f"N(r) {v}") for v, dp in dps.items()]
    line_plot(run.path("profile.svg"), series, title="frequency and doubling", ylabel="value")
    run.text("report.txt", "\n".join(lines))
    return lines


def cmd_blowup(run: Run):
    from .blowup import (SphericalModeBasis, blowup_traces, classify_limit, extract_leading_term,
                         format_classification, write_traces_csv)
    from .svgplot import polar_plot
    cfg = run.cfg
    field = build_field(cfg)
    basis_kind = cfg.choice("blowup", "basis", {"full", "cone"}, "full")
    if basis_kind == "cone":
        if not cfg.has("cone"):
            raise ConfigError("basis = cone needs a [cone] section", cfg.section_line("blowup"))
        basis = SphericalModeBasis.from_cone(build_cone(cfg, "cone"))
    else:
        basis = SphericalModeBasis.full_sphere(field.dimension, cfg.integer("blowup", "max_degree", 6), run.options)
    lam0 = cfg.number("blowup", "lambda_max", 1e-4)
    ratio = cfg.number("blowup", "ratio", 0.5)
    count = cfg.integer("blowup", "count", 12)
    if not (0 < ratio < 1) or lam0 <= 0 or count < 8:
        cfg.fail("blowup", "ratio", "need lambda_max > 0, 0 < ratio < 1 and count >= 8")
    restricted = cfg.boolean("blowup", "restricted", basis_kind == "cone")
    lams = lam0 * ratio ** np.arange(count)
    traces = blowup_traces(field, lams, basis, restricted)
    write_traces_csv(run.path("traces.csv"), traces)
    result = classify_limit(traces, cfg.number("blowup", "tol", 0.05))
    lines = [f"field: {field.descriptor}", format_classification(result, basis)]
    if field.dimension == 2 and basis.cone is None:
        ang = np.arctan2(basis.nodes[:, 1], basis.nodes[:, 0])
        polar_plot(run.path("trace_polar.svg"), ang, traces[-1].trace, title=f"blowup trace at {lams[-1]:.3g}")
    if cfg.boolean("expansion", "enabled", False):
        rep = extract_leading_term(field, basis, build_grid(cfg), restricted,
                                   holder_alpha=cfg.number("expansion", "holder_alpha", None), options=run.options)
        lines += [f"leading_mu: {rep.leading_mu:.12g}",
                  "leading_coefficients: " + ", ".join(f"{c:.12g}" for c in rep.leading_coefficients),
                  f"residual_exponent: {rep.residual_exponent:.6g}", f"fit_quality: {rep.fit_quality:.6g}",
                  f"degenerate: {rep.degenerate}", f"validated: {rep.validated}"]
    run.text("classification.txt", "\n".join(lines))
    return lines


def cmd_spectrum(run: Run):
    from .cones import admissible_from_cone
    cfg = run.cfg
    if not cfg.has("cone"):
        raise ConfigError("spectrum needs a [cone] section")
    cone = build_cone(cfg, "cone")
    cone.write_csv(run.path("spectrum.csv"))
    adm = admissible_from_cone(cone)
    lines = [f"cone: {cone.descriptor}"] + [f"mu_{j} = {mu:.12g}" for j, mu in enumerate(cone.mus, 1)]
    lines.append("admissible: " + ", ".join(f"{v:.12g}" for v in adm.values()))
    run.text("spectrum.txt", "\n".join(lines))
    return lines


def _solve(run: Run):
    from .solver import RobinData, solve_dirichlet_domain, solve_interior, solve_robin
    cfg = run.cfg
    problem = cfg.choice("solve", "problem", {"interior", "dirichlet", "robin"}, required=True)
    n = cfg.integer("solve", "n", 257)
    tol = cfg.number("solve", "tol", 1e-10)
    pre = cfg.choice("solve", "preconditioner", {"amg", "jacobi"}, "amg")
    data_field = build_field(cfg)
    data = data_field._value
    if problem == "interior":
        sol = solve_interior(build_coefficients(cfg), data, n, tol=tol, preconditioner=pre)
    elif problem == "dirichlet":
        sol = solve_dirichlet_domain(build_mask(cfg), data, n, tol=tol, preconditioner=pre)
    else:
        e = cfg.number("robin", "eta_exponent", 0.0)
        c = cfg.number("robin", "eta_scale", 1.0)
        eta = RobinData(lambda x, e=e, c=c: c * np.abs(x) ** e, f"{c}*|x|^{e}")
        sol = solve_robin(build_mask(cfg), eta, data, n, tol=tol, preconditioner=pre)
    return problem, sol


def cmd_solve(run: Run):
    from .cones import sector_spectrum
    from .solver import to_field
    cfg = run.cfg
    problem, sol = _solve(run)
    sol.write_binary(run.path("solution.bin"))
    if cfg.boolean("solve", "export_csv", True):
        sol.write_csv(run.path("solution.csv"))
    field = to_field(sol)
    grid = build_grid(cfg, defaults=(10 * sol.h, 0.4, 16))
    restricted = problem != "interior"
    cone = None
    if problem == "dirichlet" and cfg.raw("solve", "domain") == "sector":
        cone = sector_spectrum(cfg.number("solve", "theta0"), "dirichlet", 6)
    lines = [f"problem: {problem}", f"n: {sol.n}", f"h: {sol.h:.17g}", f"residual: {sol.residual:.3e}",
             f"iterations: {sol.iterations}"]
    for k, v in sol.metadata.items():
        if k != "problem":
            lines.append(f"{k}: {v}")
    _doubling_outputs(run, field, grid, restricted, _admissible(cfg, cone), lines)
    run.text("report.txt", "\n".join(lines))
    return lines


def cmd_singular(run: Run):
    from .singular import box_dimension, critical_cloud
    from .solver import to_field
    cfg = run.cfg
    source = cfg.choice("singular", "source", {"field", "solve"}, "field")
    if source == "solve":
        _, sol = _solve(run)
        field = to_field(sol)
    else:
        field = build_field(cfg)
    d = field.dimension
    lo = cfg.numbers("singular", "region_lo", ", ".join(["-1"] * d))
    hi = cfg.numbers("singular", "region_hi", ", ".join(["1"] * d))
    if len(lo) != d or len(hi) != d:
        cfg.fail("singular", "region_lo", f"region corners need {d} coordinates")
    res = cfg.integer("singular", "resolution", 257 if d == 2 else 129)
    cloud = critical_cloud(field, (lo, hi), res, cfg.number("singular", "eps_u", 1e-3),
                           cfg.number("singular", "eps_g", 1e-3), run.options)
    cloud.write_csv(run.path("cloud.csv"))
    est = box_dimension(cloud)
    with open(run.path("dimension.csv"), "w") as fh:
        fh.write("scale,count\n")
        for s, c in zip(est.scales, est.counts):
            fh.write(f"{s:.17g},{int(c)}\n")
    lines = [f"field: {field.descriptor}", f"points: {len(cloud.points)}", est.summary(),
             f"slope: {est.slope:.17g}", f"stderr: {est.stderr:.17g}", f"empty: {est.empty}",
             f"bound d-2: {d - 2}"]
    run.text("singular.txt", "\n".join(lines))
    return lines


def cmd_figure1(run: Run, output=None):
    from .svgplot import figure_nodal_set
    path = output or run.path("figure1.svg")
    if output:
        run.files.append(os.path.relpath(output, run.out))
    segs = figure_nodal_set(path)
    return [f"figure1: {len(segs)} segments -> {path}"]


COMMANDS = {"profile": cmd_profile, "blowup": cmd_blowup, "spectrum": cmd_spectrum, "solve": cmd_solve,
            "singular": cmd_singular, "figure1": cmd_figure1}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="experiment config file")
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--threads", metavar="N", type=int, default=argparse.SUPPRESS, help="worker threads")
    common.add_argument("--seed", metavar="N", type=int, default=argparse.SUPPRESS, help="random seed")
    p = argparse.ArgumentParser(prog="harmonic-asymptotics", parents=[common], description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "figure1":
            sp.add_argument("--output", metavar="PATH", help="SVG path (default OUT/figure1.svg)")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for key, default in (("config", None), ("out", "out"), ("threads", 1), ("seed", None)):
        if not hasattr(args, key):
            setattr(args, key, default)
    try:
        if args.config:
            cfg = load_config(args.config)
        elif args.command == "figure1":
            cfg = parse_config("")
        else:
            raise ConfigError(f"{args.command} requires --config")
        cfg.seed = args.seed
        run = Run(args.command, cfg, args.out, args)
        if args.command == "figure1":
            lines = cmd_figure1(run, getattr(args, "output", None))
        else:
            lines = COMMANDS[args.command](run)
        run.manifest()
    except (ConfigError, SpecificationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AnalysisError, FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for line in lines:
        print(line)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

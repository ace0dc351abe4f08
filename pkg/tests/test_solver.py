import math

import numpy as np
import pytest

from harmonic_asymptotics import (AdmissibleSet, CoefficientSet, DataError, DegenerateFieldError, DomainError,
                                  DomainMask, GridSolution, NumericError, RadialGrid, RobinData, SpecificationError,
                                  admissible_from_cone, doubling_profile, frequency_profile, sector_spectrum,
                                  solve_dirichlet_domain, solve_interior, solve_robin, to_field)
from harmonic_asymptotics.solver import _solve_linear, grid_points

LAPLACE = CoefficientSet()


def exact_error(sol, u):
    X, Y, _ = grid_points(sol.n)
    m = sol.unknown
    return float(np.max(np.abs(sol.values[m] - u(np.stack([X[m], Y[m]], axis=-1)))))


def lin(p):
    return p[..., 0]


def expsin(p):
    return np.exp(p[..., 0]) * np.sin(p[..., 1])


@pytest.mark.parametrize("n", [33, 64, 100, 129.5])
def test_grid_size_validation(n):
    with pytest.raises(SpecificationError):
        solve_interior(LAPLACE, lin, n)


def test_linear_data_reproduced_exactly():
    sol = solve_interior(LAPLACE, lin, 129)
    assert exact_error(sol, lin) <= 1e-9
    assert sol.residual <= 1e-10
    assert sol.metadata["symmetric"] is True


def test_interior_second_order():
    errs = [exact_error(solve_interior(LAPLACE, expsin, n), expsin) for n in (65, 129, 257)]
    for a, b in zip(errs, errs[1:]):
        assert 3.6 <= a / b <= 4.4


def test_constant_anisotropic_coefficients():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    coeffs = CoefficientSet(a=lambda p: np.broadcast_to(A, p.shape[:-1] + (2, 2)))
    # a11 u_xx + 2 a12 u_xy + a22 u_yy = 4 + 1 - 5 = 0
    u = lambda p: p[..., 0] ** 2 - 2.5 * p[..., 1] ** 2 + p[..., 0] * p[..., 1]
    sol = solve_interior(coeffs, u, 65)
    assert exact_error(sol, u) <= 1e-8


def test_variable_coefficient_convergence():
    # div((1 + x^2) grad u) = 0 has the solution u = arctan(x) + y
    coeffs = CoefficientSet(a=lambda p: (1 + p[..., 0] ** 2)[..., None, None] * np.eye(2))
    u = lambda p: np.arctan(p[..., 0]) + p[..., 1]
    errs = [exact_error(solve_interior(coeffs, u, n), u) for n in (65, 129, 257)]
    for a, b in zip(errs, errs[1:]):
        assert abs(math.log2(a / b) - 2) <= 0.3


def test_ellipticity_violation():
    bad = CoefficientSet(a=lambda p: np.broadcast_to(np.diag([1.0, -0.5]), p.shape[:-1] + (2, 2)))
    with pytest.raises(SpecificationError):
        solve_interior(bad, lin, 65)
    outside = CoefficientSet(a=lambda p: np.broadcast_to(np.eye(2) * 3, p.shape[:-1] + (2, 2)), bounds=(1.0, 2.0))
    with pytest.raises(SpecificationError):
        solve_interior(outside, lin, 65)


def test_non_finite_data():
    with pytest.raises(DataError):
        solve_interior(LAPLACE, lambda p: np.full(p.shape[:-1], np.nan), 65)


def test_small_potential_keeps_linear_growth():
    coeffs = CoefficientSet(V=lambda p: np.full(p.shape[:-1], -0.5))
    sol = solve_interior(coeffs, lin, 257)
    dp = doubling_profile(to_field(sol), RadialGrid(0.04, 0.4, 8), "solid", admissible=AdmissibleSet.integers())
    assert abs(dp.limit_estimate - 1) <= 0.05


def test_rough_drift_is_nonsymmetric_and_certified():
    W = lambda p: -p * (np.sum(p * p, axis=-1) ** (-0.95))[..., None]
    coeffs = CoefficientSet(W=W)
    sol = solve_interior(coeffs, lin, 129)
    assert sol.metadata["symmetric"] is False
    assert np.all(np.isfinite(sol.values[sol.unknown]))
    cert = coeffs.scaling_certificate([1e-3, 1e-2, 1e-1])
    assert np.all(np.diff(cert) > 0)              # reported, decreasing toward 0 at small r


def test_discrete_maximum_principle():
    g = lambda p: np.sin(3 * p[..., 0]) * np.cos(2 * p[..., 1]) + 0.3 * p[..., 1]
    sol = solve_interior(LAPLACE, g, 129)
    inner = sol.values[sol.unknown]
    X, Y, _ = grid_points(129)
    edge = ~sol.unknown
    assert inner.max() <= sol.values[edge].max() + 1e-12
    assert inner.min() >= sol.values[edge].min() - 1e-12


def test_symmetric_data_symmetric_solution():
    g = lambda p: p[..., 0] ** 2 * np.cos(p[..., 1])
    sol = solve_dirichlet_domain(DomainMask.disc(), g, 129, tol=1e-13)
    V = np.nan_to_num(sol.values)
    assert np.max(np.abs(V - V[:, ::-1])) <= 1e-10
    assert np.max(np.abs(V - V[::-1, :])) <= 1e-10


@pytest.mark.parametrize("pre", ["jacobi", "none"])
def test_preconditioners_agree(pre):
    a = solve_interior(LAPLACE, expsin, 65)
    b = solve_interior(LAPLACE, expsin, 65, preconditioner=pre)
    assert np.nanmax(np.abs(a.values - b.values)) <= 1e-8


def test_unknown_preconditioner():
    with pytest.raises(SpecificationError):
        solve_interior(LAPLACE, expsin, 65, preconditioner="ilu")


def test_stagnation_raises():
    with pytest.raises(NumericError) as info:
        _solve_linear(_hard_matrix(), np.ones(400), 1e-12, "none", maxiter=3)
    assert "iterations" in info.value.diagnostics


def _hard_matrix():
    import scipy.sparse as sp
    n = 400
    return sp.diags([-np.ones(n - 1), 2.0001 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


# --- masked Dirichlet ---------------------------------------------------------------


def test_half_disc_recovers_linear():
    u = lambda p: p[..., 1]
    sol = solve_dirichlet_domain(DomainMask.half_disc(), u, 129)
    assert exact_error(sol, u) <= 1e-9


def test_clipped_boundary_first_order():
    a = 0.5
    curve = lambda x: (-1 + np.sqrt(1 + 4 * a * a * x * x)) / (2 * a)
    u = lambda p: p[..., 1] - a * (p[..., 0] ** 2 - p[..., 1] ** 2)
    mask = DomainMask.cusp_curve(curve, "level set of y - a(x^2 - y^2)")
    errs = [exact_error(solve_dirichlet_domain(mask, u, n), u) for n in (129, 257, 513)]
    orders = [math.log2(a_ / b_) for a_, b_ in zip(errs, errs[1:])]
    assert all(abs(o - 1) <= 0.3 for o in orders), orders


def test_disconnected_mask():
    wall = DomainMask.cusp_curve(lambda x: np.where(np.abs(x) < 0.3, 2.0, -1.0), "wall")
    with pytest.raises(SpecificationError):
        solve_dirichlet_domain(wall, lin, 65)


def test_sector_corner_homogeneity():
    theta0 = 3 * math.pi / 2
    cone = sector_spectrum(theta0, count=4)
    g = lambda p: np.sum(p * p, axis=-1) ** (1 / 3) * np.sin(2 / 3 * np.mod(np.arctan2(p[..., 1], p[..., 0]), 2 * np.pi))
    sol = solve_dirichlet_domain(DomainMask.sector(theta0), g, 257)
    dp = doubling_profile(to_field(sol), RadialGrid(10 * sol.h, 0.4, 12), "spherical", restricted=True,
                          admissible=admissible_from_cone(cone))
    assert dp.limit.nearest == pytest.approx(2 / 3)
    assert dp.limit_gap <= 0.05


def test_zero_sector_data_is_degenerate():
    sol = solve_dirichlet_domain(DomainMask.sector(3 * math.pi / 2), lambda p: 0 * p[..., 0], 65)
    assert np.nanmax(np.abs(sol.values)) == 0
    with pytest.raises(DegenerateFieldError):
        doubling_profile(to_field(sol), RadialGrid(0.1, 0.4, 5), restricted=True)


def test_sector_opening_validation():
    with pytest.raises(SpecificationError):
        DomainMask.sector(7.0)


# --- Robin --------------------------------------------------------------------------


def test_neumann_recovers_even_function():
    eta = RobinData(lambda x: 0 * x, "0")
    sol = solve_robin(DomainMask.half_disc(), eta, lin, 129)
    assert exact_error(sol, lin) <= 1e-9


def test_robin_second_order():
    u = lambda p: np.exp(p[..., 1]) * np.cos(p[..., 0])
    eta = RobinData(lambda x: np.ones_like(x), "1")
    errs = [exact_error(solve_robin(DomainMask.half_disc(), eta, u, n), u) for n in (129, 257, 513)]
    for a, b in zip(errs, errs[1:]):
        assert abs(math.log2(a / b) - 2) <= 0.3


def test_rough_robin_integrability_and_stability():
    eta = RobinData(lambda x: np.abs(x) ** -0.25, "|x|^-1/4")
    rep = eta.integrability()
    assert rep["p"] == 3
    assert rep["L3"] == pytest.approx(2.0, rel=0.03)
    field = lambda p: p[..., 0] + p[..., 1]
    sol = solve_robin(DomainMask.half_disc(), eta, field, 513)
    assert np.all(np.isfinite(sol.values[sol.unknown]))
    dp = doubling_profile(to_field(sol), RadialGrid(0.02, 0.4, 14), "spherical", restricted=True)
    r = dp.grid.radii
    last = dp.N[r <= r[0] * 10 ** 0.5]
    assert last.max() - last.min() <= 0.1


def test_robin_eta_not_finite():
    eta = RobinData(lambda x: np.where(np.abs(x) < 0.2, np.nan, 1.0), "holes")
    with pytest.raises(DataError):
        solve_robin(DomainMask.half_disc(), eta, lin, 65)


def test_robin_requires_half_disc():
    with pytest.raises(SpecificationError):
        solve_robin(DomainMask.disc(), RobinData(lambda x: x * 0), lin, 65)


# --- solution objects ------------------------------------------------------------------


def test_to_field_pipeline():
    sol = solve_interior(LAPLACE, lin, 257)
    field = to_field(sol)
    assert field.gradient_kind == "finite-difference"
    fp = frequency_profile(field, RadialGrid(0.05, 0.4, 10), restricted=True)
    assert np.max(np.abs(fp.F - 1)) <= 5e-3


def test_constant_solution_has_zero_doubling():
    sol = solve_interior(LAPLACE, lambda p: np.ones(p.shape[:-1]), 65, tol=1e-13)
    dp = doubling_profile(to_field(sol), RadialGrid(0.05, 0.4, 6), restricted=True)
    assert np.allclose(dp.N, 0, atol=1e-12)


def test_to_field_domain_error():
    sol = solve_dirichlet_domain(DomainMask.half_disc(), lambda p: p[..., 1], 65)
    f = to_field(sol)
    assert f.contains(np.array([[0.1, 0.3]]))[0]
    with pytest.raises(DomainError):
        f.evaluate(np.array([[0.1, -0.3]]))
    with pytest.raises(DomainError):
        f.evaluate(np.array([[0.0, 1.5]]))


def test_binary_round_trip(tmp_path):
    sol = solve_dirichlet_domain(DomainMask.sector(3 * math.pi / 2), lin, 65)
    path = tmp_path / "u.bin"
    sol.write_binary(path)
    raw = path.read_bytes()
    assert raw[:8] == b"HAGRID01"
    assert len(raw) == 8 + 16 + 32 + 8 * 65 * 65
    back = GridSolution.read_binary(path)
    assert back.n == 65 and back.h == sol.h
    assert np.array_equal(np.isnan(back.values), np.isnan(sol.values))
    assert np.array_equal(np.nan_to_num(back.values), np.nan_to_num(sol.values))
    assert back.mask_hash == sol.mask_hash
    path.write_bytes(raw[:-8])
    with pytest.raises(DataError):
        GridSolution.read_binary(path)


def test_csv_export(tmp_path):
    sol = solve_robin(DomainMask.half_disc(), RobinData(lambda x: 0 * x + 1), lin, 65)
    path = tmp_path / "u.csv"
    sol.write_csv(path)
    assert path.read_text().splitlines()[0] == "x,y,u"
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    assert rows.shape == (int(sol.mask.sum()), 3)


def test_node_value():
    sol = solve_interior(LAPLACE, lin, 65)
    assert sol.node_value(0.5, 0.25) == pytest.approx(0.5, abs=1e-10)

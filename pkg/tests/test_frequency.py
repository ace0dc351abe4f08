import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from harmonic_asymptotics import (AdmissibleSet, DegenerateFieldError, RadialGrid, SpecificationError,
                                  admissible_from_cone, check_relation, combine, dilate, doubling_profile,
                                  frequency_profile, limit_homogeneity, make_cone_solution, make_log_drift,
                                  rigidity_classify, sector_spectrum)
from harmonic_asymptotics import _poly
from harmonic_asymptotics.frequency import (Classification, DoublingProfile, FrequencyProfile,
                                            format_limit_report, write_limit_report)

from conftest import P, mix, poly

GRID = RadialGrid(1e-3, 0.5, 30)


def two_mode_F(r, b):
    """F for P1 + b P3 (unit-amplitude cosine modes) by mode orthogonality."""
    return (1 + 3 * b * b * r ** 4) / (1 + b * b * r ** 4)


def test_cubic_is_constant_three():
    fp = frequency_profile(P(3), GRID)
    assert np.max(np.abs(fp.F - 3)) <= 1e-8
    assert fp.classification == Classification("constant_integer", 3)
    assert str(fp.classification) == "constant_integer(3)"


def test_two_mode_closed_form():
    u = mix((P(1), 1.0), (P(3), 0.1))
    grid = RadialGrid(0.1, 1.0, 20)
    fp = frequency_profile(u, grid)
    assert np.allclose(fp.F, two_mode_F(grid.radii, 0.1), rtol=1e-11)
    assert fp.classification.tag == "strictly_increasing"
    assert fp.F[0] > 1 and fp.F[-1] < 3


def test_log_drift_frequency_tends_to_one():
    fp = frequency_profile(make_log_drift(), RadialGrid(1e-6, 1e-2, 12))
    gaps = fp.F - 1
    assert np.all(gaps > 0)
    assert np.all(np.diff(gaps) > 0)            # smaller r, closer to 1
    # the gap is O(1/|log r|)
    scaled = gaps * np.abs(np.log(fp.grid.radii))
    assert scaled.max() < 0.5 and np.all(np.diff(scaled) > 0)


def test_doubling_basic_cases():
    g = RadialGrid(1e-3, 0.25, 10)
    for variant in ("spherical", "solid"):
        assert np.allclose(doubling_profile(poly(2, 0, 3.0), g, variant).N, 0, atol=1e-13)
        for u, k in ((P(2), 2), (poly(3, 3, *np.arange(1, 8)), 3)):
            assert np.allclose(doubling_profile(u, g, variant).N, k, atol=1e-10)


def test_log_drift_doubling_closed_form():
    lam = 1e-5
    N = doubling_profile(make_log_drift(), RadialGrid(lam, 2 * lam, 2)).N[0]
    ref = 1 + math.log2(abs(math.log(lam)) / abs(math.log(2 * lam)))
    assert ref == pytest.approx(1.0896, abs=1e-4)
    assert N == pytest.approx(ref, abs=2e-3)


def test_degenerate_field():
    zero = mix((P(1), 1.0), (P(1), -1.0))
    with pytest.raises(DegenerateFieldError):
        frequency_profile(zero, GRID)
    with pytest.raises(DegenerateFieldError):
        doubling_profile(zero, GRID)


def test_unknown_variant():
    with pytest.raises(SpecificationError):
        doubling_profile(P(1), GRID, "cubical")


# --- relation ------------------------------------------------------------------


def test_relation_quadratic():
    rep = check_relation(P(2), 0.1)
    assert rep.doubling == pytest.approx(2, abs=1e-10)
    assert rep.integral == pytest.approx(2, abs=1e-10)
    assert rep.discrepancy <= 1e-8
    assert rep.discrepancy <= 10 * rep.est_error


def test_relation_two_mode():
    rep = check_relation(mix((P(1), 1.0), (P(3), 0.1)), 0.1)
    assert rep.discrepancy <= 1e-6
    assert rep.discrepancy <= 10 * rep.est_error


def test_relation_constant():
    rep = check_relation(poly(2, 0, 1.0), 0.2)
    assert rep.doubling == pytest.approx(0, abs=1e-14) and rep.integral == pytest.approx(0, abs=1e-14)


# --- classification -------------------------------------------------------------


def _fp(F):
    F = np.asarray(F, float)
    return FrequencyProfile(RadialGrid(0.1, 1.0, len(F)), F, float(np.min(np.diff(F))), None)


def test_rigidity_synthetic_profiles():
    assert rigidity_classify(_fp([3.0] * 6)) == Classification("constant_integer", 3)
    assert rigidity_classify(_fp([1, 1.1, 1.2, 1.3])).tag == "strictly_increasing"
    assert rigidity_classify(_fp([1, 1.2, 1.1, 1.3])).tag == "nonmonotone"
    assert rigidity_classify(_fp([1.5, 1.5, 1.5, 1.6])).tag == "indeterminate"


def test_restricted_half_plane_is_constant_one():
    u = make_cone_solution(sector_spectrum(math.pi), 1)
    fp = frequency_profile(u, RadialGrid(1e-3, 0.5, 12), restricted=True)
    assert fp.classification == Classification("constant_integer", 1)


def _pure(d, k, rng):
    c = rng.standard_normal(_poly.basis_length(d, k))
    return poly(d, k, *c)


def test_single_degree_rigidity(rng):
    for d in (2, 3):
        for k in range(1, 7):
            fp = frequency_profile(_pure(d, k, rng), GRID)
            assert fp.classification == Classification("constant_integer", k)
            assert np.max(np.abs(fp.F - k)) <= 1e-6


@pytest.mark.parametrize("grid", [RadialGrid(0.1, 0.5, 12), RadialGrid(0.5, 1.0, 12)])
def test_two_degree_mix_strictly_increasing(grid, rng):
    for d in (2, 3):
        u = combine([_pure(d, 1, rng), _pure(d, 2, rng)], [1.0, 1e-3])
        assert frequency_profile(u, grid).classification.tag == "strictly_increasing"


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31), d=st.sampled_from([2, 3]), parts=st.integers(1, 5))
def test_almgren_monotonicity(seed, d, parts):
    rng = np.random.default_rng(seed)
    degrees = rng.choice(np.arange(0, 7), size=parts, replace=False)
    fields = [_pure(d, int(k), rng) for k in degrees]
    u = combine(fields, list(rng.uniform(0.1, 1.0, parts)))
    if all(k == 0 for k in degrees):
        return
    fp = frequency_profile(u, RadialGrid(1e-3, 0.5, 25))
    assert fp.min_increment >= -1e-10


# --- invariances -----------------------------------------------------------------


def test_scale_invariance_bitwise_for_powers_of_two():
    u = mix((P(1), 1.0), (P(3), 0.4))
    for c in (4.0, -0.5):
        cu = combine([u], [c])
        a, b = frequency_profile(u, GRID), frequency_profile(cu, GRID)
        assert np.array_equal(a.F, b.F)
        assert a.classification == b.classification
        na, nb = doubling_profile(u, GRID), doubling_profile(cu, GRID)
        assert np.array_equal(na.N, nb.N)
        assert na.limit == nb.limit


def test_scale_invariance_general_constant():
    u = mix((P(1), 1.0), (P(3), 0.4))
    cu = combine([u], [-3.7])
    assert np.allclose(frequency_profile(u, GRID).F, frequency_profile(cu, GRID).F, rtol=1e-14)


def test_dilation_covariance():
    u = mix((P(1), 1.0), (P(2), 0.5), (P(4), 0.3))
    s = 0.6
    g = RadialGrid(0.01, 0.5, 10)
    gs = RadialGrid(0.01 * s, 0.5 * s, 10)
    assert np.allclose(frequency_profile(dilate(u, s), g).F, frequency_profile(u, gs).F, rtol=1e-10)


def test_solid_and_spherical_limits_agree():
    g = RadialGrid(1e-4, 0.1, 20)
    for u in (P(2), mix((P(1), 1.0), (P(3), 0.1)), make_log_drift(), poly(3, 2, 1, 2, 3, 4, 5)):
        ints = AdmissibleSet.integers()
        a = doubling_profile(u, g, "spherical", admissible=ints).limit_estimate
        b = doubling_profile(u, g, "solid", admissible=ints).limit_estimate
        assert abs(a - b) <= 0.05
    cone = make_cone_solution(sector_spectrum(3 * math.pi / 4), 1)
    adm = admissible_from_cone(sector_spectrum(3 * math.pi / 4))
    a = doubling_profile(cone, g, "spherical", restricted=True, admissible=adm).limit_estimate
    b = doubling_profile(cone, g, "solid", restricted=True, admissible=adm).limit_estimate
    assert abs(a - b) <= 0.05


# --- limits ----------------------------------------------------------------------


def _dp(N):
    N = np.asarray(N, float)
    return DoublingProfile(RadialGrid(1e-3, 1e-1, len(N)), N, "spherical")


def test_limit_of_constant_two():
    rep = limit_homogeneity(_dp([2.0] * 8), AdmissibleSet.integers())
    assert (rep.estimate, rep.gap, rep.converged) == (2.0, 0.0, True)


def test_limit_tie_prefers_smaller_and_does_not_converge():
    rep = limit_homogeneity(_dp([1.5] * 8), AdmissibleSet.integers())
    assert rep.nearest == 1.0 and not rep.converged


def test_limit_infinity_flag():
    N = np.linspace(200, 60, 8)                 # grows toward small radii
    rep = limit_homogeneity(_dp(N), AdmissibleSet.integers())
    assert rep.infinite and math.isinf(rep.estimate)


def test_limit_window_too_long():
    with pytest.raises(SpecificationError):
        limit_homogeneity(_dp([1.0] * 3), AdmissibleSet.integers(), window=5)


def test_limit_uses_smallest_radii():
    N = [1.0] * 5 + [7.0] * 5
    rep = limit_homogeneity(_dp(N), AdmissibleSet.integers())
    assert rep.estimate == 1.0


def test_log_drift_limit():
    dp = doubling_profile(make_log_drift(), RadialGrid(1e-6, 1e-2, 20), admissible=AdmissibleSet.integers())
    assert dp.limit.nearest == 1.0 and dp.limit.converged
    # the closed form gives 1.074 at the smallest radius, so the window median sits near 0.08 above 1
    assert dp.limit_gap <= 0.085


def test_cone_limit_four_thirds():
    cone = sector_spectrum(3 * math.pi / 4)
    u = make_cone_solution(cone, 1)
    dp = doubling_profile(u, RadialGrid(1e-3, 0.2, 10), restricted=True, admissible=admissible_from_cone(cone))
    assert dp.limit_estimate == pytest.approx(4 / 3, abs=1e-6)
    assert dp.limit_gap <= 1e-6


def test_admissible_sets():
    ints = AdmissibleSet.integers()
    assert ints.nearest(2.3)[:2] == (2.0, pytest.approx(0.3))
    ex = AdmissibleSet.explicit([3, 1, 1 + 1e-12, 2])
    assert np.array_equal(ex.values(), [1, 2, 3])
    assert np.all(np.diff(ex.values()) > 0)
    with pytest.raises(SpecificationError):
        AdmissibleSet("primes")


def test_limit_report_serialization(tmp_path):
    dp = doubling_profile(P(2), RadialGrid(1e-3, 0.1, 8), admissible=AdmissibleSet.integers())
    path = tmp_path / "limits.csv"
    write_limit_report(path, [("p2", "spherical", dp.limit)])
    header, row = path.read_text().splitlines()[:2]
    assert header.split(",")[:2] == ["name", "variant"]
    assert row.startswith("p2,spherical,")
    text = format_limit_report("p2", "spherical", dp.limit)
    assert "converged=True" in text

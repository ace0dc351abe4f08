import xml.etree.ElementTree as ET

import numpy as np
import pytest

from harmonic_asymptotics.svgplot import (contour_svg, figure_nodal_set, line_plot, marching_squares, polar_plot,
                                          read_contour_svg)

BOX = (-1.5, 1.5, -1.5, 1.5)


def test_marching_squares_circle():
    t = np.linspace(-1, 1, 201)
    X, Y = np.meshgrid(t, t)
    segs = marching_squares(X ** 2 + Y ** 2, t, t, level=0.25)
    r = np.linalg.norm(segs.reshape(-1, 2), axis=1)
    assert np.max(np.abs(r - 0.5)) <= (t[1] - t[0]) ** 2
    length = np.sum(np.linalg.norm(segs[:, 1] - segs[:, 0], axis=1))
    assert length == pytest.approx(np.pi, rel=1e-3)


def test_marching_squares_saddle_and_skip():
    t = np.linspace(-1, 1, 4)
    X, Y = np.meshgrid(t, t)
    F = X * Y + 0.01
    segs = marching_squares(F, t, t)
    assert len(segs) > 0
    assert len(marching_squares(F, t, t, skip=np.ones((3, 3), bool))) == 0
    F[0, 0] = np.nan
    assert len(marching_squares(F, t, t)) <= len(segs)


def test_contour_round_trip(tmp_path):
    segs = np.array([[[0.1, 0.2], [0.3, -0.4]], [[-1.0, 1.0], [1.2, 0.0]]])
    path = tmp_path / "c.svg"
    contour_svg(path, segs, BOX, markers=[(1.0, 0.0, "pole")])
    back, markers = read_contour_svg(path, BOX)
    assert np.max(np.abs(back - segs)) <= 1e-5
    assert markers == [pytest.approx((1.0, 0.0), abs=1e-5)]
    ET.parse(path)


@pytest.fixture(scope="module")
def figure(tmp_path_factory):
    path = tmp_path_factory.mktemp("fig") / "figure1.svg"
    segs = figure_nodal_set(path)
    return path, segs


def test_figure_curve_matches_nodal_equation(figure):
    path, _ = figure
    back, markers = read_contour_svg(path, BOX)
    z = back.reshape(-1, 2) @ np.array([1.0, 1j])
    r, th = np.abs(z), np.angle(z)
    # ln r = -theta tan theta, written as cos(theta) ln r + theta sin(theta) = 0 and measured as a distance
    with np.errstate(all="ignore"):
        U = (z / np.log(z)).real
        grad = np.abs((np.log(z) - 1) / np.log(z) ** 2)
    dist = np.abs(U) / grad
    assert np.nanmax(dist) <= 3.0 / 2047
    resid = np.cos(th) * np.log(r) + th * np.sin(th)
    assert np.max(np.abs(resid[r > 0.05])) <= 1e-2
    assert len(markers) == 1 and markers[0] == pytest.approx((1.0, 0.0), abs=1e-3)


def test_figure_shape(figure):
    _, segs = figure
    p = segs.reshape(-1, 2)
    r, th = np.linalg.norm(p, axis=1), np.arctan2(p[:, 1], p[:, 0])
    assert np.allclose(np.sort(p[:, 1]), np.sort(-p[:, 1]), atol=1e-9)   # mirror symmetric
    assert np.all(p[r < 1, 0] >= -1e-9)          # the inner loop stays in the right half plane
    assert np.any((p[:, 0] < 0) & (r > 1))       # outer branches with pi/2 < |theta| < pi
    near = np.abs(th[(r < 0.01) & (p[:, 1] > 0)])
    mid = np.abs(th[(r > 0.05) & (r < 0.1) & (p[:, 1] > 0)])
    assert near.mean() > mid.mean() and near.min() > 1.25              # tangent turns vertical at 0
    assert np.min(np.abs(p - [1.0, 0.0]).sum(axis=1)) <= 0.01            # passes through the pole


def test_line_and_polar_plots(tmp_path):
    r = np.geomspace(1e-3, 1, 20)
    line_plot(tmp_path / "a.svg", [(r, 1 + r, "F"), (r, np.full(20, 2.0), "N")], title="t", ylabel="F")
    line_plot(tmp_path / "b.svg", [(r, r ** 2, "H")], logy=True)
    polar_plot(tmp_path / "c.svg", np.linspace(0, 2 * np.pi, 50, endpoint=False), np.cos(np.linspace(0, 6, 50)))
    for name in "abc":
        root = ET.parse(tmp_path / f"{name}.svg").getroot()
        assert root.tag.endswith("svg")
        assert root.findall(".//{http://www.w3.org/2000/svg}polyline")

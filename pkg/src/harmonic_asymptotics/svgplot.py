"""Minimal SVG output: log-log line plots, polar trace plots and level sets."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _svg(width, height, body, title=""):
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n')
    if title:
        head += f"<title>{escape(title)}</title>\n"
    return head + '<rect width="100%" height="100%" fill="white"/>\n' + "".join(body) + "</svg>\n"


def _polyline(xs, ys, color, width=1.5):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return f'<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{pts}"/>\n'


def line_plot(path, series, title="", xlabel="r", ylabel="", logx=True, logy=False, size=(640, 420)):
    """``series``: iterable of ``(x, y, label)``."""
    W, H = size
    L, R, T, B = 70, 20, 30, 50
    tx = (lambda v: np.log10(v)) if logx else (lambda v: np.asarray(v, float))
    ty = (lambda v: np.log10(np.abs(v) + 1e-300)) if logy else (lambda v: np.asarray(v, float))
    xs = [tx(np.asarray(s[0], float)) for s in series]
    ys = [ty(np.asarray(s[1], float)) for s in series]
    fin = [np.isfinite(x) & np.isfinite(y) for x, y in zip(xs, ys)]
    allx = np.concatenate([x[f] for x, f in zip(xs, fin)])
    ally = np.concatenate([y[f] for y, f in zip(ys, fin)])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x1 = x0 + 1
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    px = lambda v: L + (v - x0) / (x1 - x0) * (W - L - R)
    py = lambda v: H - B - (v - y0) / (y1 - y0) * (H - T - B)
    body = [f'<rect x="{L}" y="{T}" width="{W - L - R}" height="{H - T - B}" fill="none" stroke="black"/>\n']
    for k, (x, y, f) in enumerate(zip(xs, ys, fin)):
        body.append(_polyline(px(x[f]), py(y[f]), COLORS[k % len(COLORS)]))
        body.append(f'<text x="{L + 10}" y="{T + 16 + 14 * k}" font-size="12" '
                    f'fill="{COLORS[k % len(COLORS)]}">{escape(series[k][2])}</text>\n')
    lab_x = f"log10 {xlabel}" if logx else xlabel
    lab_y = f"log10 {ylabel}" if logy else ylabel
    body.append(f'<text x="{W / 2}" y="{H - 12}" font-size="13" text-anchor="middle">{escape(lab_x)}</text>\n')
    body.append(f'<text x="14" y="{H / 2}" font-size="13" transform="rotate(-90 14 {H / 2})" '
                f'text-anchor="middle">{escape(lab_y)}</text>\n')
    for v, anchor in ((x0, "start"), (x1, "end")):
        body.append(f'<text x="{px(v):.1f}" y="{H - B + 16}" font-size="11" text-anchor="{anchor}">{v:.3g}</text>\n')
    for v in (y0, y1):
        body.append(f'<text x="{L - 6}" y="{py(v) + 4:.1f}" font-size="11" text-anchor="end">{v:.4g}</text>\n')
    with open(path, "w") as fh:
        fh.write(_svg(W, H, body, title))


def polar_plot(path, angles, values, title="", size=420):
    """Trace values ``values(theta)`` drawn as radius ``1 + 0.4 v / max|v|``."""
    c = size / 2
    v = np.asarray(values, float)
    scale = 0.4 / max(float(np.abs(v).max()), 1e-300)
    rad = (1 + scale * v) * c * 0.7
    xs = c + rad * np.cos(angles)
    ys = c - rad * np.sin(angles)
    body = [f'<circle cx="{c}" cy="{c}" r="{0.7 * c:.1f}" fill="none" stroke="#999" stroke-dasharray="4 3"/>\n',
            _polyline(np.append(xs, xs[0]), np.append(ys, ys[0]), COLORS[0])]
    with open(path, "w") as fh:
        fh.write(_svg(size, size, body, title))


# ----------------------------------------------------------------------------- level sets


def marching_squares(F, xs, ys, level=0.0, skip=None):
    """Segments of ``{F = level}`` for ``F[i, j]`` sampled at ``(xs[j], ys[i])``.

    Linear interpolation along cell edges; saddle cells are split using the
    cell-centre average.  ``skip`` is an optional boolean mask of cells to ignore.
    Returns an array of shape ``(m, 2, 2)``.
    """
    G = np.asarray(F, float) - level
    a, b = G[:-1, :-1], G[:-1, 1:]     # bottom-left, bottom-right
    c, d = G[1:, 1:], G[1:, :-1]       # top-right, top-left
    code = (a > 0).astype(int) | ((b > 0) << 1) | ((c > 0) << 2) | ((d > 0) << 3)
    valid = np.isfinite(a) & np.isfinite(b) & np.isfinite(c) & np.isfinite(d)
    if skip is not None:
        valid &= ~skip
    I, J = np.nonzero(valid & (code != 0) & (code != 15))
    x0, x1 = xs[J], xs[J + 1]
    y0, y1 = ys[I], ys[I + 1]
    A, Bv, C, D = a[I, J], b[I, J], c[I, J], d[I, J]

    def lerp(p, q, fp, fq):
        return p + fp / (fp - fq) * (q - p)

    with np.errstate(divide="ignore", invalid="ignore"):
        bottom = np.stack([lerp(x0, x1, A, Bv), y0], axis=-1)
        right = np.stack([x1, lerp(y0, y1, Bv, C)], axis=-1)
        top = np.stack([lerp(x0, x1, D, C), y1], axis=-1)
        left = np.stack([x0, lerp(y0, y1, A, D)], axis=-1)
    edges = {"b": bottom, "r": right, "t": top, "l": left}
    table = {1: ["bl"], 2: ["br"], 3: ["lr"], 4: ["rt"], 6: ["bt"], 7: ["lt"], 8: ["lt"],
             9: ["bt"], 11: ["rt"], 12: ["lr"], 13: ["br"], 14: ["bl"]}
    code = code[I, J]
    centre = 0.25 * (A + Bv + C + D)
    segs = []
    for k, pairs in table.items():
        sel = code == k
        for p in pairs:
            segs.append(np.stack([edges[p[0]][sel], edges[p[1]][sel]], axis=1))
    # saddles: a positive centre joins the positive corners and cuts off the negative ones
    saddles = ((5, True, ["br", "lt"]), (5, False, ["bl", "rt"]),
               (10, True, ["bl", "rt"]), (10, False, ["br", "lt"]))
    for k, positive, pairs in saddles:
        sel = (code == k) & ((centre > 0) == positive)
        for p in pairs:
            segs.append(np.stack([edges[p[0]][sel], edges[p[1]][sel]], axis=1))
    return np.concatenate(segs, axis=0) if segs else np.zeros((0, 2, 2))


def contour_svg(path, segments, box, markers=(), title="", size=800, axes=True):
    """Write segments in data coordinates ``box = (xmin, xmax, ymin, ymax)``."""
    xmin, xmax, ymin, ymax = box
    px = lambda x: (x - xmin) / (xmax - xmin) * size
    py = lambda y: size - (y - ymin) / (ymax - ymin) * size
    body = []
    if axes:
        body.append(f'<line x1="0" y1="{py(0):.2f}" x2="{size}" y2="{py(0):.2f}" stroke="#bbb"/>\n')
        body.append(f'<line x1="{px(0):.2f}" y1="0" x2="{px(0):.2f}" y2="{size}" stroke="#bbb"/>\n')
    d = " ".join(f"M{px(s[0, 0]):.3f} {py(s[0, 1]):.3f}L{px(s[1, 0]):.3f} {py(s[1, 1]):.3f}" for s in segments)
    body.append(f'<path id="level-set" fill="none" stroke="black" stroke-width="1" d="{d}"/>\n')
    for mx, my, label in markers:
        body.append(f'<circle class="marker" cx="{px(mx):.3f}" cy="{py(my):.3f}" r="5" fill="red"/>\n')
        body.append(f'<text x="{px(mx) + 8:.1f}" y="{py(my) - 8:.1f}" font-size="14">{escape(label)}</text>\n')
    with open(path, "w") as fh:
        fh.write(_svg(size, size, body, title))


def read_contour_svg(path, box, size=800):
    """Segments back in data coordinates from a file written by :func:`contour_svg`."""
    import re
    text = open(path).read()
    m = re.search(r'id="level-set"[^>]*d="([^"]*)"', text)
    nums = np.array(re.findall(r"[-+]?\d*\.?\d+(?:[eE][-+]?\d+)?", m.group(1) if m else ""), float)
    xmin, xmax, ymin, ymax = box
    pts = nums.reshape(-1, 2, 2)
    x = pts[..., 0] / size * (xmax - xmin) + xmin
    y = (size - pts[..., 1]) / size * (ymax - ymin) + ymin
    markers = [(float(a) / size * (xmax - xmin) + xmin, (size - float(b)) / size * (ymax - ymin) + ymin)
               for a, b in re.findall(r'class="marker" cx="([^"]+)" cy="([^"]+)"', text)]
    return np.stack([x, y], axis=-1), markers


def figure_nodal_set(path, n=2048, half_width=1.5, pole_guard=3):
    """Zero set of ``Re(z / log z)`` on an ``n x n`` grid, pole marked at ``(1, 0)``."""
    t = np.linspace(-half_width, half_width, n)
    X, Y = np.meshgrid(t, t)
    z = X + 1j * Y
    with np.errstate(all="ignore"):
        U = (z / np.log(z)).real
    h = t[1] - t[0]
    cx = 0.5 * (t[:-1] + t[1:])
    CX, CY = np.meshgrid(cx, cx)
    # cells next to the pole change sign through infinity, not through zero
    skip = (CX - 1.0) ** 2 + CY ** 2 < (pole_guard * h) ** 2
    segs = marching_squares(U, t, t, 0.0, skip)
    box = (-half_width, half_width, -half_width, half_width)
    contour_svg(path, segs, box, markers=[(1.0, 0.0, "pole")], title="Nodal set of Re(z/log z)")
    return segs

"""Rendering measures back into rasters, SVG scatter plots and palette strips.

Raster outputs use ASCII netpbm formats (PGM P2 for grayscale, PPM P3 for
color): bit-exact and diff-able in tests.
"""

import warnings

import numpy as np

SVG_SIZE = 1000
_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
_LUMA = np.array([0.299, 0.587, 0.114])


def measure_to_raster(m, h, w):
    """Splat a planar measure's mass bilinearly onto an h x w pixel grid.

    Each atom's mass is split over the four surrounding pixel centers; atoms
    in the half-pixel border band (or outside [0, w] x [0, h], after a
    warning) deposit on the nearest edge pixels, so total mass is conserved.
    Returns the raw (h, w) mass grid; see `raster_to_pgm` for display scaling.
    """
    if h <= 0 or w <= 0:
        raise ValueError("raster dimensions must be positive")
    if m.d != 2:
        raise ValueError("raster output needs planar measures")
    x = m.locations[0]
    y = m.locations[1]
    if np.any(x < 0) or np.any(x > w) or np.any(y < 0) or np.any(y > h):
        warnings.warn("atoms outside the raster frame were clipped")
    u = np.clip(x - 0.5, 0.0, w - 1.0)
    v = np.clip(y - 0.5, 0.0, h - 1.0)
    c0 = np.minimum(np.floor(u).astype(int), max(w - 2, 0))
    r0 = np.minimum(np.floor(v).astype(int), max(h - 2, 0))
    fx = u - c0
    fy = v - r0
    grid = np.zeros((h, w))
    wgt = m.weights
    np.add.at(grid, (r0, c0), wgt * (1 - fx) * (1 - fy))
    np.add.at(grid, (r0, np.minimum(c0 + 1, w - 1)), wgt * fx * (1 - fy))
    np.add.at(grid, (np.minimum(r0 + 1, h - 1), c0), wgt * (1 - fx) * fy)
    np.add.at(
        grid, (np.minimum(r0 + 1, h - 1), np.minimum(c0 + 1, w - 1)), wgt * fx * fy
    )
    return grid


def raster_to_pgm(grid, maxval=255):
    """ASCII PGM (P2) text for a nonnegative grid, scaled to the peak value."""
    grid = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    peak = grid.max()
    scaled = grid * (maxval / peak) if peak > 0 else grid
    ints = np.floor(scaled + 0.5).astype(int)  # round half up
    h, w = ints.shape
    lines = [f"P2", f"{w} {h}", f"{maxval}"]
    lines.extend(" ".join(str(v) for v in row) for row in ints)
    return "\n".join(lines) + "\n"


def image_to_ppm(rgb, maxval=255):
    """ASCII PPM (P3) text for an (h, w, 3) array of values in [0, 1]."""
    rgb = np.asarray(rgb, dtype=np.float64)
    ints = np.floor(np.clip(rgb, 0.0, 1.0) * maxval + 0.5).astype(int)
    h, w, _ = ints.shape
    lines = [f"P3", f"{w} {h}", f"{maxval}"]
    for row in ints:
        lines.append(" ".join(str(v) for v in row.ravel()))
    return "\n".join(lines) + "\n"


def render_palette_strip(m, width=512, height=64):
    """Horizontal strip of color bands for an RGB measure.

    Bands are ordered by luminance and sized proportionally to atom weight
    (within one pixel, via cumulative rounding). Coordinates are clamped to
    [0, 1]. Returns an (height, width, 3) array in [0, 1].
    """
    if m.d != 3:
        raise ValueError("palette strips need RGB (3-dimensional) measures")
    colors = np.clip(m.locations.T, 0.0, 1.0)
    order = np.argsort(colors @ _LUMA, kind="stable")
    colors = colors[order]
    weights = m.weights[order]
    edges = np.floor(np.cumsum(weights) * width + 0.5).astype(int)
    edges = np.concatenate([[0], edges])
    edges[-1] = width
    strip = np.zeros((height, width, 3))
    for i in range(colors.shape[0]):
        strip[:, edges[i]:edges[i + 1]] = colors[i]
    return strip


def _svg_coords(points, bounds):
    (x0, x1), (y0, y1) = bounds
    sx = SVG_SIZE / (x1 - x0)
    sy = SVG_SIZE / (y1 - y0)
    xs = (points[0] - x0) * sx
    ys = SVG_SIZE - (points[1] - y0) * sy  # math orientation: y grows upward
    return xs, ys


def render_scatter_svg(measures, labels=None, axes=(0, 1), max_radius=25.0):
    """Scatter plot of measures as an SVG document string.

    Marker area is proportional to atom weight; each measure gets its own
    style class and a legend entry. Three-dimensional measures are projected
    orthographically onto the requested coordinate pair (with a warning).
    """
    if labels is None:
        labels = [f"measure {i}" for i in range(len(measures))]
    projected = []
    for m in measures:
        if m.d == 2:
            projected.append(m.locations)
        elif m.d == 3:
            warnings.warn(f"projecting 3-d measure orthographically onto axes {axes}")
            projected.append(m.locations[list(axes), :])
        else:
            raise ValueError("scatter rendering supports d = 2 or 3 only")

    if projected:
        allpts = np.concatenate(projected, axis=1)
        lo = allpts.min(axis=1)
        hi = allpts.max(axis=1)
        span = np.maximum(hi - lo, 1e-9)
        lo = lo - 0.05 * span
        hi = hi + 0.05 * span
    else:
        lo = np.array([0.0, 0.0])
        hi = np.array([1.0, 1.0])
    bounds = ((lo[0], hi[0]), (lo[1], hi[1]))

    styles = "\n".join(
        f".m{i} {{ fill: {_PALETTE[i % len(_PALETTE)]}; fill-opacity: 0.65; }}"
        for i in range(len(measures))
    )
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">',
        f"<style>{styles}</style>",
        f'<rect x="0" y="0" width="{SVG_SIZE}" height="{SVG_SIZE}" '
        'fill="white" stroke="black"/>',
    ]
    for i, (m, pts) in enumerate(zip(measures, projected)):
        xs, ys = _svg_coords(pts, bounds)
        wmax = m.weights.max() if m.weights.max() > 0 else 1.0
        radii = max_radius * np.sqrt(m.weights / wmax)
        parts.append(f'<g class="m{i}">')
        for xj, yj, rj in zip(xs, ys, radii):
            parts.append(f'<circle cx="{xj:.3f}" cy="{yj:.3f}" r="{rj:.3f}"/>')
        parts.append("</g>")
    for i, label in enumerate(labels[: len(measures)]):
        y = 30 + 28 * i
        parts.append(
            f'<rect x="20" y="{y - 14}" width="16" height="16" class="m{i}"/>'
        )
        parts.append(f'<text x="44" y="{y}" font-size="20">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"

"""Deterministic SVG rendering of specialization heatmaps and proximity
networks. No third-party plotting dependency; plain string assembly keeps
the output byte-stable."""

import numpy as np

from .specialization import nested_sort

_HEADER = '<?xml version="1.0" encoding="UTF-8"?>\n'


def _svg(width, height, body):
    return (
        _HEADER
        + f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        + f'viewBox="0 0 {width} {height}">\n'
        + body
        + "</svg>\n"
    )


def heatmap_svg(M, region_codes, occupation_codes, cell=6, margin=80):
    """Nested-sorted binary matrix as an SVG grid.

    Rows sorted by descending diversity, columns by descending ubiquity;
    filled cells mark specialization.
    """
    M = np.asarray(M)
    rows, cols = nested_sort(M, region_codes, occupation_codes)
    width = margin + cell * len(cols) + 2
    height = margin + cell * len(rows) + 2
    parts = [f'<rect width="{width}" height="{height}" fill="white"/>\n']
    for r, i in enumerate(rows):
        for c, k in enumerate(cols):
            if M[i, k]:
                x = margin + c * cell
                y = margin + r * cell
                parts.append(
                    f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="#1f3b73"/>\n'
                )
    font = max(3, cell - 2)
    for c, k in enumerate(cols):
        x = margin + c * cell + cell / 2
        parts.append(
            f'<text x="{x:g}" y="{margin - 4}" font-size="{font}" text-anchor="start" '
            f'transform="rotate(-60 {x:g} {margin - 4})">{_esc(occupation_codes[k])}</text>\n'
        )
    for r, i in enumerate(rows):
        y = margin + r * cell + cell - 1
        parts.append(
            f'<text x="{margin - 4}" y="{y}" font-size="{font}" '
            f'text-anchor="end">{_esc(region_codes[i])}</text>\n'
        )
    return _svg(width, height, "".join(parts))


def network_svg(phi, labels, sizes=None, positions=None, width=700, height=700,
                edge_cutoff=0.0):
    """Proximity graph as SVG: nodes sized by activity counts, edges by phi.

    `positions` maps label -> (x, y) in data coordinates (e.g. longitude,
    latitude for a geographic layout); without it nodes sit on a circle in
    label order (no force-directed layout, so output stays deterministic).
    """
    phi = np.asarray(phi, dtype=np.float64)
    n = phi.shape[0]
    if sizes is None:
        sizes = np.ones(n)
    sizes = np.asarray(sizes, dtype=np.float64)

    pad = 50.0
    if positions is not None:
        xs = np.array([positions[l][0] for l in labels], dtype=np.float64)
        ys = np.array([positions[l][1] for l in labels], dtype=np.float64)
        ys = -ys  # screen y grows downward
        for v in (xs, ys):
            span = v.max() - v.min()
            v -= v.min()
            v /= span if span > 0 else 1.0
        xs = pad + xs * (width - 2 * pad)
        ys = pad + ys * (height - 2 * pad)
    else:
        angle = 2.0 * np.pi * np.arange(n) / max(n, 1)
        r = min(width, height) / 2.0 - pad
        xs = width / 2.0 + r * np.cos(angle)
        ys = height / 2.0 + r * np.sin(angle)

    smax = sizes.max() if sizes.max() > 0 else 1.0
    radii = 3.0 + 12.0 * np.sqrt(sizes / smax)

    parts = [f'<rect width="{width}" height="{height}" fill="white"/>\n']
    for a in range(n):
        for b in range(a + 1, n):
            w = phi[a, b]
            if w <= edge_cutoff:
                continue
            parts.append(
                f'<line x1="{xs[a]:.2f}" y1="{ys[a]:.2f}" x2="{xs[b]:.2f}" '
                f'y2="{ys[b]:.2f}" stroke="#999999" stroke-opacity="{min(w, 1.0):.3f}" '
                f'stroke-width="{0.3 + 2.0 * w:.2f}"/>\n'
            )
    for a in range(n):
        parts.append(
            f'<circle cx="{xs[a]:.2f}" cy="{ys[a]:.2f}" r="{radii[a]:.2f}" '
            f'fill="#c0392b" fill-opacity="0.8" stroke="#5b1208" stroke-width="0.5"/>\n'
        )
        parts.append(
            f'<text x="{xs[a]:.2f}" y="{ys[a] - radii[a] - 2:.2f}" font-size="8" '
            f'text-anchor="middle">{_esc(labels[a])}</text>\n'
        )
    return _svg(width, height, "".join(parts))


def _esc(s):
    return (
        str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )

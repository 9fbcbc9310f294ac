"""SVG drawing of a map and its approximation, projected onto two coordinates."""

from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np

from .forms import PLMap

POSITIVE_COLOR = "#1f5fa8"
NEGATIVE_COLOR = "#b8322a"


def edge_polylines(h: PLMap) -> list:
    """One vertex chain per edge of the root complex, ordered along the edge.

    For a map without carrier every chain has two points.
    """
    root = h.root
    if h.carrier is None:
        return [h.images[list(e)] for e in root.edges]
    C = h.carrier
    on_vertex = C.support[:, 0] == C.support[:, 1]
    where = {int(C.support[i, 0]): i for i in np.flatnonzero(on_vertex)}
    chains = []
    E = root.edge_array
    interior = ~on_vertex
    for u, w in E:
        mine = np.flatnonzero(interior & (C.support[:, 0] == u) & (C.support[:, 1] == w))
        mine = mine[np.argsort(C.t[mine], kind="stable")]
        ids = [where[int(u)], *mine.tolist(), where[int(w)]]
        chains.append(h.images[ids])
    return chains


def _axis_color(sig, i) -> str:
    return POSITIVE_COLOR if i < sig.p else NEGATIVE_COLOR


def render_svg(maps, project=(0, 1), size: int = 480, margin: int = 24) -> str:
    """SVG text with one polyline per domain edge per map.

    ``maps`` is a list of ``(PLMap, style)`` with style ``"dashed"`` or
    ``"solid"``.  Axis labels are colored by the sign of the coordinate.
    """
    i, j = project
    chains = [(style, c) for m, style in maps for c in edge_polylines(m)]
    for m, _ in maps:
        if max(i, j) >= m.signature.dim or min(i, j) < 0:
            raise ValueError(f"projection {project} out of range for signature {tuple(m.signature)}")
    pts = np.concatenate([c[:, [i, j]] for _, c in chains]) if chains else np.zeros((1, 2))
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-12))
    scale = (size - 2 * margin) / span

    def xy(p):
        return margin + (p[0] - lo[0]) * scale, size - margin - (p[1] - lo[1]) * scale

    svg = ET.Element(
        "svg",
        xmlns="http://www.w3.org/2000/svg",
        version="1.1",
        width=str(size),
        height=str(size),
        viewBox=f"0 0 {size} {size}",
    )
    ET.SubElement(svg, "title").text = f"projection onto coordinates {i}, {j}"
    sig = maps[0][0].signature if maps else None
    if sig is not None:
        for axis, x, y in ((i, size - margin, size - 6), (j, 6, margin - 8)):
            lab = ET.SubElement(svg, "text", x=str(x), y=str(y), fill=_axis_color(sig, axis), attrib={"font-size": "12"})
            lab.text = f"x{axis}"
    for style, c in chains:
        attrs = {
            "fill": "none",
            "stroke": "#777777" if style == "dashed" else "#111111",
            "stroke-width": "1" if style == "dashed" else "1.5",
            "points": " ".join(f"{x:.3f},{y:.3f}" for x, y in map(xy, c[:, [i, j]])),
            "class": "f" if style == "dashed" else "h",
        }
        if style == "dashed":
            attrs["stroke-dasharray"] = "4 3"
        ET.SubElement(svg, "polyline", attrib=attrs)
    return ET.tostring(svg, encoding="unicode") + "\n"

"""A short segment made exact by a sawtooth.

The chord from (0, 0) to (3, 0) is asked to have length 5.  Two teeth of
height 1 do it: each of the four pieces is a 0.75 by 1 right triangle's
hypotenuse, so 4 * 1.25 = 5.  The script prints the points, then saves the
document and an SVG with the chord dashed and the sawtooth solid.

    python demos/sawtooth.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from pliso import EdgeMetric, MinkowskiSignature, PLMap, build_complex, sawtooth_edge, subdivide_edges, tooth_count
from pliso.io import PolyhedronDocument, Result, Schedule, save
from pliso.plot import render_svg

out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
out.mkdir(parents=True, exist_ok=True)

line = sawtooth_edge((0, 0), (3, 0), 5.0, 2, (0, 1))
print("points:", line.points.tolist())
print("piece lengths:", line.segment_lengths.tolist())
print(f"total length {line.length}, height {line.deviation}")

# the engine picks the tooth count from the accuracy instead
print("teeth needed for accuracy 0.5:", tooth_count(5.0, 3.0, 0.5))

X = build_complex([0, 1], [[0, 1]])
sig = MinkowskiSignature(2, 0)
f = PLMap(X, sig, [[0.0, 0.0], [3.0, 0.0]])
child, carrier = subdivide_edges(X, {(0, 1): 4})
# child vertices: the two ends first, then the interior points in order
h = PLMap(child, sig, np.vstack([line.points[0], line.points[-1], line.points[1:-1]]), carrier)

doc = PolyhedronDocument(X, EdgeMetric(X, [25.0]), f, Schedule(0, (1.5,), 0), Result(h, "sawtooth", {}))
save(doc, out / "sawtooth.json")
(out / "sawtooth.svg").write_text(render_svg([(f, "dashed"), (h, "solid")]))
print("wrote", out / "sawtooth.json", "and", out / "sawtooth.svg")

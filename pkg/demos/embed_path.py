"""Embedding a mixed-sign path into Minkowski space, at shrinking accuracies.

The path 0-1-2-3 carries energies 4, 0 and -1: one spacelike edge of length
2, one null edge and one timelike edge of length 1.  A random map into
R^{1,2} is neither short nor isometric.  For each accuracy the pipeline
returns a PL map that has exactly these energies, is injective, and stays
within the accuracy of the input map.

    python demos/embed_path.py
"""

import numpy as np

from pliso import (
    EdgeMetric,
    MinkowskiSignature,
    PipelineRequest,
    PLMap,
    approximate,
    build_complex,
    induced_edge_energies,
    shell_decomposition,
)
from pliso.verify import verify_closeness, verify_embedding, verify_isometry

X = build_complex(range(4), [[0, 1], [1, 2], [2, 3]])
g = EdgeMetric(X, [4.0, 0.0, -1.0])
f = PLMap(X, MinkowskiSignature(1, 2), np.random.default_rng(12).normal(size=(4, 3)))
shells = shell_decomposition(X, 0)

print("input energies:", np.round(induced_edge_energies(f).energies, 3))
print(f"{'eps':>8} {'pieces':>7} {'energy err':>11} {'injective':>10} {'sup |h-f|':>10}")
for eps in (0.5, 0.25, 0.125, 0.0625):
    h, report = approximate(PipelineRequest(X, g, f, 0, (eps,), "embed", 0))
    iso = verify_isometry(h, g)
    emb = verify_embedding(h)
    close = verify_closeness(f, h, shells, (eps,), samples=100)
    print(f"{eps:8.4f} {len(h.complex.edges):7d} {iso.max_rel_error:11.1e} {str(emb.passed):>10} {max(close.shell_deviation):10.4f}")

print("H per edge (last run):", np.round(report.H, 3))

"""Independent checks for produced maps.

Nothing here calls into the engines or the pipeline: energies are recomputed
from raw coordinates, segment distances use their own closed-form routine,
and closeness is measured on a sample grid against the original map.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .complex import CarrierMap, ShellDecomposition, schedule_value


# ---------------------------------------------------------------------------
# geometry


def _point_segment_dist(p, a, b):
    ab = b - a
    den = np.einsum("ij,ij->i", ab, ab)
    num = np.einsum("ij,ij->i", p - a, ab)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(den > 0, num / den, 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm(p - (a + t[:, None] * ab), axis=1)


def segment_distance(p0, p1, q0, q1) -> np.ndarray:
    """Euclidean distance between segments ``[p0, p1]`` and ``[q0, q1]`` (row-wise).

    The minimum is either an endpoint-to-segment distance or is attained at an
    interior critical point of both lines; all five candidates are evaluated.
    """
    p0, p1, q0, q1 = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (p0, p1, q0, q1))
    best = np.minimum.reduce(
        [
            _point_segment_dist(p0, q0, q1),
            _point_segment_dist(p1, q0, q1),
            _point_segment_dist(q0, p0, p1),
            _point_segment_dist(q1, p0, p1),
        ]
    )
    u, v, w = p1 - p0, q1 - q0, p0 - q0
    a = np.einsum("ij,ij->i", u, u)
    b = np.einsum("ij,ij->i", u, v)
    c = np.einsum("ij,ij->i", v, v)
    d = np.einsum("ij,ij->i", u, w)
    e = np.einsum("ij,ij->i", v, w)
    det = a * c - b * b
    ok = det > 1e-14 * np.maximum(a * c, 1e-300)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(ok, (b * e - c * d) / det, -1.0)
        t = np.where(ok, (a * e - b * d) / det, -1.0)
    inside = ok & (s > 0) & (s < 1) & (t > 0) & (t < 1)
    if np.any(inside):
        diff = w + s[:, None] * u - t[:, None] * v
        best = np.where(inside, np.minimum(best, np.linalg.norm(diff, axis=1)), best)
    return best


def _euclid_energy(vec, p):
    return np.sum(vec[:, :p] ** 2, axis=1) - np.sum(vec[:, p:] ** 2, axis=1)


# ---------------------------------------------------------------------------
# isometry


@dataclass
class IsometryCheck:
    passed: bool
    max_rel_error: float
    worst_parent_edge: tuple | None
    worst_child_edge: tuple | None
    coverage_ok: bool


def verify_isometry(h, g, carrier=None, tol: float = 1e-9) -> IsometryCheck:
    """Each sub-edge of parametric fraction ``t`` must carry energy ``t**2 * E_g``.

    The relative error is measured against the larger of ``|t**2 E_g|`` and the
    sum of the absolute positive and negative parts of the achieved energy.
    """
    carrier = carrier if carrier is not None else h.carrier
    child = h.complex
    parent = g.complex
    if not child.edges:
        return IsometryCheck(True, 0.0, None, None, not parent.edges)
    E = child.edge_array
    if carrier is None:
        if child != parent:
            raise ValueError("map without carrier must live on the metric's complex")
        parent_idx = np.array([parent.edge_index[e] for e in child.edges])
        t0, t1 = np.zeros(len(E)), np.ones(len(E))
    else:
        parent_idx, t0, t1 = carrier.edge_map
    frac = np.abs(t1 - t0)
    vec = h.images[E[:, 1]] - h.images[E[:, 0]]
    p = h.signature.p
    pos = np.sum(vec[:, :p] ** 2, axis=1)
    neg = np.sum(vec[:, p:] ** 2, axis=1)
    achieved = pos - neg
    expected = frac**2 * g.energies[parent_idx]
    scale = np.maximum(np.abs(expected), pos + neg)
    err = np.abs(achieved - expected)
    rel = np.where(scale > 0, err / np.where(scale > 0, scale, 1.0), np.where(err > 0, np.inf, 0.0))

    covered = np.zeros(len(parent.edges))
    np.add.at(covered, parent_idx, frac)
    coverage_ok = bool(np.all(np.abs(covered - 1.0) <= 1e-9))

    k = int(np.argmax(rel))
    worst = float(rel[k])
    return IsometryCheck(
        passed=bool(worst < tol and coverage_ok),
        max_rel_error=worst,
        worst_parent_edge=parent.edges[int(parent_idx[k])],
        worst_child_edge=child.edges[k],
        coverage_ok=coverage_ok,
    )


# ---------------------------------------------------------------------------
# embedding


@dataclass
class EmbeddingCheck:
    passed: bool
    offending_pair: tuple | None
    reason: str
    segments: int


def _segments_and_points(h):
    X = h.complex
    segs = [tuple(e) for e in X.edges]
    isolated = [v for v in range(X.n_vertices) if not X.neighbors[v]]
    segs += [(v, v) for v in isolated]
    idx = np.array(segs, dtype=int).reshape(-1, 2)
    return idx


def _adjacent_pairs(idx):
    """All pairs of segments sharing a vertex, with the shared vertex."""
    seg = np.flatnonzero(idx[:, 0] != idx[:, 1])
    vert = np.concatenate([idx[seg, 0], idx[seg, 1]])
    owner = np.concatenate([seg, seg])
    order = np.lexsort((owner, vert))
    vert, owner = vert[order], owner[order]
    rows = []
    for d in range(1, len(vert)):
        same = vert[d:] == vert[:-d]
        if not np.any(same):
            break
        rows.append(np.stack([owner[:-d][same], owner[d:][same], vert[d:][same]], axis=1))
    return np.concatenate(rows) if rows else np.zeros((0, 3), dtype=int)


def _sweep_pairs(lo, hi, chunk=1 << 20):
    """Index pairs whose axis-aligned boxes intersect, in chunks."""
    order = np.argsort(lo[:, 0], kind="stable")
    lo_sorted = lo[order, 0]
    stop = np.searchsorted(lo_sorted, hi[order, 0], side="right")
    pos = np.arange(len(order))
    counts = np.maximum(stop - pos - 1, 0)
    start = 0
    while start < len(order):
        total = np.cumsum(counts[start:])
        end = start + max(1, int(np.searchsorted(total, chunk, side="right")))
        c = counts[start:end]
        I = np.repeat(pos[start:end], c)
        offs = np.arange(int(c.sum())) - np.repeat(np.cumsum(c) - c, c)
        J = I + 1 + offs
        i, j = order[I], order[J]
        box = np.all((lo[j] <= hi[i]) & (hi[j] >= lo[i]), axis=1)
        yield i[box], j[box]
        start = end


def verify_embedding(h, slack: float | None = None) -> EmbeddingCheck:
    """Exhaustive segment-pair injectivity test in Euclidean ``R^(p+q)``.

    Pairs sharing a vertex may meet only there; every other pair must be more
    than ``slack`` apart.  A sweep over the first coordinate discards pairs
    whose bounding boxes are further than ``slack`` apart, which cannot
    change the verdict.
    """
    if h.complex.dimension > 1:
        raise ValueError("embedding check supports 1-dimensional domains only")
    idx = _segments_and_points(h)
    P = h.images
    n = len(idx)
    if slack is None:
        diam = float(np.linalg.norm(P.max(axis=0) - P.min(axis=0))) if len(P) else 0.0
        slack = 1e-12 * diam
    a, b = P[idx[:, 0]], P[idx[:, 1]]
    is_point = idx[:, 0] == idx[:, 1]
    seg_len = np.linalg.norm(b - a, axis=1)
    degenerate = np.flatnonzero(~is_point & (seg_len <= slack))
    if degenerate.size:
        i = int(degenerate[0])
        return EmbeddingCheck(False, (tuple(idx[i]), tuple(idx[i])), "degenerate segment", n)

    adj = _adjacent_pairs(idx)
    if len(adj):
        bad = _overlap_at(P, idx[adj[:, 0]], idx[adj[:, 1]], adj[:, 2], slack)
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            pair = (tuple(idx[adj[k, 0]]), tuple(idx[adj[k, 1]]))
            return EmbeddingCheck(False, pair, "adjacent segments overlap", n)

    lo = np.minimum(a, b) - slack
    hi = np.maximum(a, b) + slack
    for i, j in _sweep_pairs(lo, hi):
        ei, ej = idx[i], idx[j]
        adjacent = (ei[:, :1] == ej).any(axis=1) | (ei[:, 1:] == ej).any(axis=1)
        i, j = i[~adjacent], j[~adjacent]
        if i.size == 0:
            continue
        d = segment_distance(a[i], b[i], a[j], b[j])
        bad = np.flatnonzero(d <= slack)
        if bad.size:
            k = bad[np.lexsort((j[bad], i[bad]))[0]]
            return EmbeddingCheck(False, (tuple(idx[i[k]]), tuple(idx[j[k]])), "segments meet", n)
    return EmbeddingCheck(True, None, "ok", n)


def _overlap_at(P, ei, ej, common, slack) -> np.ndarray:
    """Row-wise: do segments sharing ``common`` overlap beyond it?

    They do iff the far endpoint of one lies on the other.
    """
    other_i = np.where(ei[:, 1] == common, ei[:, 0], ei[:, 1])
    other_j = np.where(ej[:, 1] == common, ej[:, 0], ej[:, 1])
    c, oi, oj = P[common], P[other_i], P[other_j]
    d1 = _point_segment_dist(oi, c, oj)
    d2 = _point_segment_dist(oj, c, oi)
    return np.minimum(d1, d2) <= slack


# ---------------------------------------------------------------------------
# closeness


@dataclass
class ClosenessCheck:
    passed: bool
    shell_deviation: list
    eps: list
    samples: int  # points evaluated in total


def verify_closeness(f, h, shells: ShellDecomposition, eps, samples: int = 2) -> ClosenessCheck:
    """Sup over a sample grid of ``|f - h|`` in each shell, compared with ``eps[k]``."""
    if samples < 2:
        raise ValueError("need at least 2 samples per sub-edge")
    root = f.complex
    if set(shells.index) != set(root.simplices):
        raise ValueError("shell decomposition does not match the map's complex")
    carrier = h.carrier
    if carrier is None or carrier.parent != root:
        if h.complex != root:
            raise ValueError("h must live on a subdivision of f's complex")
        carrier = CarrierMap.identity(root)
    parent_idx, t0, t1 = carrier.edge_map
    dev = np.zeros(len(shells))
    u = np.linspace(0.0, 1.0, samples)
    E = h.complex.edge_array
    RE = root.edge_array
    edge_shell = np.array([shells.shell_of(e) for e in root.edges], dtype=int)
    step = max(1, 2_000_000 // (samples * max(1, h.images.shape[1])))
    for lo in range(0, len(E), step):
        sl = slice(lo, lo + step)
        pi = parent_idx[sl]
        t = t0[sl, None] + u[None, :] * (t1[sl] - t0[sl])[:, None]
        fa, fb = f.images[RE[pi, 0]], f.images[RE[pi, 1]]
        fp = fa[:, None, :] + t[:, :, None] * (fb - fa)[:, None, :]
        ha, hb = h.images[E[sl, 0]], h.images[E[sl, 1]]
        hp = ha[:, None, :] + u[None, :, None] * (hb - ha)[:, None, :]
        per_edge = np.linalg.norm(fp - hp, axis=2).max(axis=1)
        np.maximum.at(dev, edge_shell[pi], per_edge)
    count = len(E) * samples
    # child vertices sitting on parent vertices (covers isolated vertices)
    on_vertex = np.flatnonzero(carrier.support[:, 0] == carrier.support[:, 1])
    if on_vertex.size:
        v = carrier.support[on_vertex, 0]
        vshell = np.array([shells.shell_of((int(x),)) for x in v], dtype=int)
        np.maximum.at(dev, vshell, np.linalg.norm(f.images[v] - h.images[on_vertex], axis=1))
        count += on_vertex.size
    dev = [float(x) for x in dev]
    eps_list = [schedule_value(eps, k) for k in range(len(shells))]
    passed = all(d < e for d, e in zip(dev, eps_list))
    return ClosenessCheck(passed, dev, eps_list, count)


# ---------------------------------------------------------------------------
# brute-force separation


def _domain_distances(X, lengths):
    E = X.edge_array
    n = X.n_vertices
    if len(E) == 0:
        D = np.full((n, n), np.inf)
        np.fill_diagonal(D, 0.0)
        return D
    w = np.asarray(lengths, dtype=float)
    # csgraph drops explicit zeros, so zero-length edges get a tiny positive weight.
    w = np.where(w > 0, w, 1e-300)
    A = coo_matrix((np.concatenate([w, w]), (np.concatenate([E[:, 0], E[:, 1]]), np.concatenate([E[:, 1], E[:, 0]]))), shape=(n, n))
    return dijkstra(A.tocsr(), directed=False)


def brute_force_min_separation(h, cutoff: float, edge_lengths=None) -> float:
    """Minimum image distance over sub-segment pairs whose domain gap is at least ``cutoff``.

    Domain lengths of sub-edges default to 1.  Returns ``inf`` when no pair
    qualifies.
    """
    X = h.complex
    idx = _segments_and_points(h)
    n = len(idx)
    if n < 2:
        return float("inf")
    lengths = np.ones(len(X.edges)) if edge_lengths is None else np.asarray(edge_lengths, dtype=float)
    D = _domain_distances(X, lengths)
    i, j = np.triu_indices(n, k=1)
    ei, ej = idx[i], idx[j]
    gap = np.minimum.reduce([D[ei[:, a], ej[:, b]] for a in (0, 1) for b in (0, 1)])
    keep = gap >= cutoff
    if not np.any(keep):
        return float("inf")
    P = h.images
    d = segment_distance(P[ei[keep, 0]], P[ei[keep, 1]], P[ej[keep, 0]], P[ej[keep, 1]])
    return float(d.min())


# ---------------------------------------------------------------------------
# combined report


@dataclass
class VerificationReport:
    max_rel_energy_error: float
    worst_edge: tuple | None
    isometry_passed: bool
    embedding_passed: bool | None
    offending_pair: tuple | None
    shell_deviation: list
    eps: list
    closeness_passed: bool
    samples: int
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.isometry_passed and self.closeness_passed and self.embedding_passed is not False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def verify_all(h, g, f, shells, eps, check_embedding: bool = True, tol: float = 1e-9, samples: int = 2) -> VerificationReport:
    iso = verify_isometry(h, g, tol=tol)
    emb = verify_embedding(h) if check_embedding else None
    clo = verify_closeness(f, h, shells, eps, samples=samples)
    return VerificationReport(
        max_rel_energy_error=iso.max_rel_error,
        worst_edge=iso.worst_parent_edge,
        isometry_passed=iso.passed,
        embedding_passed=None if emb is None else emb.passed,
        offending_pair=None if emb is None else emb.offending_pair,
        shell_deviation=clo.shell_deviation,
        eps=clo.eps,
        closeness_passed=clo.passed,
        samples=clo.samples,
    )

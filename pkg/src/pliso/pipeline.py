"""Isometric embeddings and isometries of indefinite metric graphs into R^{p,q}.

The construction splits the map into a positive block, a middle block and a
negative block, pushes every edge energy below both the prescribed and the
induced energy with an auxiliary form ``H``, realizes the negative part
exactly with the negative engine, and finally realizes whatever positive
energy is left with the positive engine.  Injectivity is protected by a
separation guard that bounds how far each engine may move each edge.

Only 1-dimensional complexes are handled; the orchestration only talks to
the engines through :class:`~pliso.engine1d.EngineRequest`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .complex import (
    SimplicialComplex,
    schedule_value,
    shell_decomposition,
)
from .engine1d import EngineRequest, negative_engine, positive_engine
from .forms import (
    EdgeMetric,
    MinkowskiSignature,
    PLMap,
    induced_edge_energies,
    lift,
    signed_length,
    split_map,
)
from .verify import VerificationReport, verify_all

log = logging.getLogger(__name__)

INTRINSIC_DIM = 1
NEG_SHARE = 0.4  # embed mode: fraction of eps_k granted to each engine
ISO_SHARE = 0.7  # isometry mode: two engines, 2 * 0.7**2 < 1
PERTURB_SHARE = 1 / 8


class PipelineError(RuntimeError):
    """An internal precondition failed; carries per-edge diagnostics."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


class VerificationError(PipelineError):
    def __init__(self, report: VerificationReport):
        super().__init__(f"output failed verification: {report.to_dict()}", {"report": report})
        self.report = report


# ---------------------------------------------------------------------------
# geometry used by the construction (the verifier has its own)


def _closest_segment_distance(p0, q0, p1, q1):
    """Row-wise segment distance by clamped closest-point parameters."""
    d1 = q0 - p0
    d2 = q1 - p1
    r = p0 - p1
    a = np.einsum("ij,ij->i", d1, d1)
    e = np.einsum("ij,ij->i", d2, d2)
    f = np.einsum("ij,ij->i", d2, r)
    c = np.einsum("ij,ij->i", d1, r)
    b = np.einsum("ij,ij->i", d1, d2)
    denom = a * e - b * b
    safe_a = np.where(a > 0, a, 1.0)
    safe_e = np.where(e > 0, e, 1.0)
    s = np.where(denom > 1e-15 * np.maximum(a * e, 1e-300), np.clip((b * f - c * e) / np.where(denom != 0, denom, 1.0), 0, 1), 0.0)
    t = np.where(e > 0, (b * s + f) / safe_e, 0.0)
    low = t < 0
    high = t > 1
    s = np.where(low, np.where(a > 0, np.clip(-c / safe_a, 0, 1), 0.0), s)
    s = np.where(high, np.where(a > 0, np.clip((b - c) / safe_a, 0, 1), 0.0), s)
    t = np.clip(t, 0, 1)
    diff = (p0 + s[:, None] * d1) - (p1 + t[:, None] * d2)
    return np.linalg.norm(diff, axis=1)


def _items(X: SimplicialComplex) -> np.ndarray:
    """Edges followed by isolated vertices (as degenerate pairs)."""
    iso = [(v, v) for v in range(X.n_vertices) if not X.neighbors[v]]
    return np.array(list(X.edges) + iso, dtype=int).reshape(-1, 2)


def _clip(poly, a_s, a_t, c):
    """Clip a convex polygon to the half-plane ``a_s*s + a_t*t >= c``."""
    out = []
    n = len(poly)
    for i in range(n):
        P, Q = poly[i], poly[(i + 1) % n]
        fp = a_s * P[0] + a_t * P[1] - c
        fq = a_s * Q[0] + a_t * Q[1] - c
        if fp >= 0:
            out.append(P)
        if (fp >= 0) != (fq >= 0):
            lam = fp / (fp - fq)
            out.append((P[0] + lam * (Q[0] - P[0]), P[1] + lam * (Q[1] - P[1])))
    return out


def _min_over_polygon(c0, B1, B2, poly, halfplanes) -> float:
    """Minimum of ``|c0 + s*B1 - t*B2|`` over a convex polygon in (s, t)."""
    M = np.stack([B1, -B2], axis=1)
    best = np.inf
    x, *_ = np.linalg.lstsq(M, -c0, rcond=None)
    if -1e-12 <= x[0] <= 1 + 1e-12 and -1e-12 <= x[1] <= 1 + 1e-12 and all(
        a_s * x[0] + a_t * x[1] >= c - 1e-12 for a_s, a_t, c in halfplanes
    ):
        best = float(np.linalg.norm(c0 + M @ x))
    n = len(poly)
    for i in range(n):
        P = np.asarray(poly[i])
        Q = np.asarray(poly[(i + 1) % n])
        r0 = c0 + M @ P
        r1 = M @ (Q - P)
        den = r1 @ r1
        lam = 0.0 if den == 0 else min(1.0, max(0.0, -(r0 @ r1) / den))
        best = min(best, float(np.linalg.norm(r0 + lam * r1)))
    return best


def domain_lengths(g: EdgeMetric) -> np.ndarray:
    """``|signed_length|`` of each energy; zero-energy edges count as length 1."""
    L = np.array([abs(signed_length(e)) for e in g.energies])
    return np.where(L > 0, L, 1.0)


def _graph_distances(X: SimplicialComplex, lengths) -> np.ndarray:
    n = X.n_vertices
    E = X.edge_array
    if len(E) == 0:
        D = np.full((n, n), np.inf)
        np.fill_diagonal(D, 0.0)
        return D
    w = np.asarray(lengths, dtype=float)
    A = coo_matrix((np.r_[w, w], (np.r_[E[:, 0], E[:, 1]], np.r_[E[:, 1], E[:, 0]])), shape=(n, n))
    return dijkstra(A.tocsr(), directed=False)


# ---------------------------------------------------------------------------
# coordinate split


def split_coordinates(f: PLMap, n: int = INTRINSIC_DIM) -> tuple:
    """``f = f_plus (+) f_star (+) f_minus`` with ``n`` coordinates in each outer block.

    ``f_star`` is ``None`` when ``p == q == n``.
    """
    p, q = f.signature
    if p < n or q < n:
        raise ValueError(f"signature ({p}, {q}) has fewer than {n} positive or negative coordinates")
    if p == n and q == n:
        f_plus, f_minus = split_map(f, [(n, 0), (0, n)])
        return f_plus, None, f_minus
    return tuple(split_map(f, [(n, 0), (p - n, q - n), (0, n)]))


# ---------------------------------------------------------------------------
# predicates


def _tol(P) -> float:
    if len(P) == 0:
        return 0.0
    return 1e-9 * (1.0 + float(np.linalg.norm(P.max(axis=0) - P.min(axis=0))))


def _overlaps_at_shared(P, ei, ej, tol) -> bool:
    common = (set(ei) & set(ej)).pop()
    oi = ei[0] if ei[1] == common else ei[1]
    oj = ej[0] if ej[1] == common else ej[1]
    d = _closest_segment_distance(P[[oi, oj]], P[[oi, oj]], P[[common, common]], P[[oj, oi]])
    return bool(np.min(d) <= tol)


def is_embedding(f: PLMap) -> bool:
    """Injectivity of a simplicial map of a graph (all pairs; meant for the original complex)."""
    X = f.complex
    P = f.images
    tol = _tol(P)
    items = _items(X)
    a, b = P[items[:, 0]], P[items[:, 1]]
    deg = items[:, 0] != items[:, 1]
    if np.any(deg & (np.linalg.norm(b - a, axis=1) <= tol)):
        return False
    i, j = np.triu_indices(len(items), k=1)
    if i.size == 0:
        return True
    shared = (
        (items[i, 0] == items[j, 0])
        | (items[i, 0] == items[j, 1])
        | (items[i, 1] == items[j, 0])
        | (items[i, 1] == items[j, 1])
    )
    ii, jj = i[~shared], j[~shared]
    if ii.size and np.min(_closest_segment_distance(a[ii], b[ii], a[jj], b[jj])) <= tol:
        return False
    return not any(_overlaps_at_shared(P, tuple(items[x]), tuple(items[y]), tol) for x, y in zip(i[shared], j[shared]))


def is_local_embedding(f: PLMap, vertices: Sequence[int] | None = None) -> bool:
    """Injectivity on the closed star of each listed vertex (default: all)."""
    X = f.complex
    P = f.images
    tol = _tol(P)
    for u in range(X.n_vertices) if vertices is None else vertices:
        nbrs = X.neighbors[u]
        if not nbrs:
            continue
        vec = P[list(nbrs)] - P[u]
        if np.any(np.linalg.norm(vec, axis=1) <= tol):
            return False
        for x in range(len(nbrs)):
            for y in range(x + 1, len(nbrs)):
                if _overlaps_at_shared(P, (u, nbrs[x]), (u, nbrs[y]), tol):
                    return False
    return True


def edges_nondegenerate(f: PLMap) -> bool:
    if not f.complex.edges:
        return True
    return bool(np.all(np.linalg.norm(f.edge_vectors(), axis=1) > _tol(f.images)))


# ---------------------------------------------------------------------------
# perturbation


def perturb_general_position(
    f: PLMap,
    scale,
    seed: int,
    predicates: Sequence[Callable[[PLMap], bool]],
    max_retries: int = 32,
    movable: np.ndarray | None = None,
    columns: slice | None = None,
) -> PLMap:
    """Jiggle vertex images until every predicate holds.

    ``scale`` (scalar or per-vertex) bounds the Euclidean size of each move;
    it is halved after every failed attempt.  ``movable`` restricts which
    vertices move and ``columns`` which coordinates.  The input is returned
    unchanged when the predicates already hold.
    """
    if all(pred(f) for pred in predicates):
        return f
    rng = np.random.default_rng(seed)
    n, N = f.images.shape
    cols = columns if columns is not None else slice(0, N)
    width = len(range(N)[cols])
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (n,)).copy()
    if movable is not None:
        scale = np.where(movable, scale, 0.0)
    for attempt in range(max_retries):
        noise = rng.uniform(-1.0, 1.0, size=(n, width)) * (scale / np.sqrt(width))[:, None]
        images = f.images.copy()
        images[:, cols] += noise
        g = PLMap(f.complex, f.signature, images, f.carrier)
        if all(pred(g) for pred in predicates):
            log.debug("perturbation accepted after %d attempts", attempt + 1)
            return g
        scale = scale / 2
    raise PipelineError("could not reach general position", {"retries": max_retries})


# ---------------------------------------------------------------------------
# H and the guard


@dataclass(frozen=True, eq=False)
class HForm:
    complex: SimplicialComplex
    energies: np.ndarray

    def as_metric(self) -> EdgeMetric:
        return EdgeMetric(self.complex, self.energies)


def construct_H(g: EdgeMetric, g_f: EdgeMetric, margin: float = 1.0) -> HForm:
    """Per-edge energy strictly below both ``g`` and ``g_f``."""
    if margin <= 0:
        raise ValueError("margin must be positive")
    if g.complex != g_f.complex:
        raise ValueError("metrics live on different complexes")
    a, b = g.energies, g_f.energies
    H = np.minimum(a, b) - margin * (1.0 + np.abs(a) + np.abs(b))
    return HForm(g.complex, H)


@dataclass(frozen=True, eq=False)
class EmbeddingGuard:
    delta: list  # per shell, domain length units
    mu: list  # per shell, min far-pair image separation (inf when vacuous)
    eps_eff: list  # per shell, min(eps_k, mu_k / 3)
    edge_mu: np.ndarray  # per edge of the complex
    lebesgue: float  # the delta actually used to classify pairs (min over shells)


def _pair_far_distance(A1, B1, ends1, l1, A2, B2, ends2, l2, D, delta) -> float:
    """Min of ``|f(x) - f(y)|`` over ``x`` on item 1, ``y`` on item 2 with domain distance >= delta."""
    halfplanes = []
    for p in (0, 1):
        for q in (0, 1):
            d = D[ends1[p], ends2[q]]
            if not np.isfinite(d):
                continue
            # distance along item 1 to its endpoint p: s*l1 (p=0) or (1-s)*l1 (p=1)
            a_s, c1 = (l1, 0.0) if p == 0 else (-l1, l1)
            a_t, c2 = (l2, 0.0) if q == 0 else (-l2, l2)
            halfplanes.append((a_s, a_t, delta - d - c1 - c2))
    poly = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    for hp in halfplanes:
        poly = _clip(poly, *hp)
        if not poly:
            return np.inf
    return _min_over_polygon(A1 - A2, B1, B2, poly, halfplanes)


def compute_guard(
    X: SimplicialComplex, f: PLMap, v: int, eps: Sequence[float], metric: EdgeMetric | None = None
) -> EmbeddingGuard:
    """Lebesgue-number surrogate, far-pair separation and effective accuracy per shell.

    Pairs on the same edge lie in a common closed star and are never
    constrained.  For points on different edges the domain distance is a
    minimum of four affine functions of the two edge parameters, so the far
    region is a convex polygon and the separation is found exactly.
    Domain lengths come from ``metric`` (all 1 when omitted).
    """
    if f.complex != X:
        raise ValueError("f must live on X")
    P = f.images
    if len({tuple(row) for row in P}) != len(P):
        raise PipelineError("f is not injective on vertices")
    shells = shell_decomposition(X, v)
    lengths = domain_lengths(metric) if metric is not None else np.ones(len(X.edges))
    delta = []
    for k, shell in enumerate(shells.shells):
        ls = [lengths[X.edge_index[s]] for s in shell if len(s) == 2]
        delta.append(0.5 * min(ls) if ls else np.inf)
    leb = min(delta)
    if not np.isfinite(leb):
        leb = 0.5
    D = _graph_distances(X, lengths)
    items = _items(X)
    ell = np.array([lengths[X.edge_index[tuple(e)]] if e[0] != e[1] else 0.0 for e in items])
    mu_item = np.full(len(items), np.inf)
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            e1, e2 = items[i], items[j]
            d = _pair_far_distance(
                P[e1[0]], P[e1[1]] - P[e1[0]], e1, ell[i], P[e2[0]], P[e2[1]] - P[e2[0]], e2, ell[j], D, leb
            )
            mu_item[i] = min(mu_item[i], d)
            mu_item[j] = min(mu_item[j], d)
    mu = [np.inf] * len(shells)
    for i, e in enumerate(items):
        key = tuple(e) if e[0] != e[1] else (int(e[0]),)
        k = shells.shell_of(key)
        mu[k] = min(mu[k], float(mu_item[i]))
    if any(m <= 0 for m in mu):
        raise PipelineError("f is not an embedding: far pairs collide", {"mu": mu})
    eps_eff = [min(schedule_value(eps, k), mu[k] / 3) for k in range(len(shells))]
    return EmbeddingGuard(delta, mu, eps_eff, mu_item[: len(X.edges)].copy(), leb)


def _box_pairs(lo, hi, chunk=1 << 20):
    """Index pairs ``i < j`` (in sweep order) whose boxes intersect."""
    order = np.argsort(lo[:, 0], kind="stable")
    stop = np.searchsorted(lo[order, 0], hi[order, 0], side="right")
    pos = np.arange(len(order))
    counts = np.maximum(stop - pos - 1, 0)
    start = 0
    while start < len(order):
        total = np.cumsum(counts[start:])
        end = start + max(1, int(np.searchsorted(total, chunk, side="right")))
        c = counts[start:end]
        I = np.repeat(pos[start:end], c)
        J = I + 1 + np.arange(int(c.sum())) - np.repeat(np.cumsum(c) - c, c)
        i, j = order[I], order[J]
        keep = np.all((lo[j] <= hi[i]) & (hi[j] >= lo[i]), axis=1)
        yield i[keep], j[keep]
        start = end


def _crossing_gap(Pa, Pb, Qa, Qb, Fa, Fb, Ga, Gb, tau):
    """Lower bound on ``|F(s) - G(t)|`` wherever the fixed parts come within ``tau``.

    ``P``/``Q`` are the fixed coordinates of two segments and ``F``/``G`` the
    coordinates the next engine is allowed to move.  Returns ``inf`` when the
    fixed parts stay more than ``tau`` apart.  Near-parallel pairs get
    ``-inf`` and are left to the caller.
    """
    A = Pb - Pa
    B = Qb - Qa
    c = Qa - Pa
    a = np.einsum("ij,ij->i", A, A)
    b = np.einsum("ij,ij->i", B, B)
    x = np.einsum("ij,ij->i", A, B)
    det = a * b - x * x
    lam_min = 0.5 * ((a + b) - np.sqrt((a - b) ** 2 + 4 * x * x))
    ok = lam_min > 1e-12 * np.maximum(a + b, 1e-300)
    Ac = np.einsum("ij,ij->i", A, c)
    Bc = np.einsum("ij,ij->i", B, c)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(ok, (b * Ac - x * Bc) / det, 0.0)
        t = np.where(ok, (x * Ac - a * Bc) / det, 0.0)
        rho = np.where(ok, tau / np.sqrt(lam_min), np.inf)
    resid = np.linalg.norm(s[:, None] * A - t[:, None] * B - c, axis=1)
    out_s = np.maximum(np.maximum(-s, s - 1), 0)
    out_t = np.maximum(np.maximum(-t, t - 1), 0)
    miss = (resid > tau) | (np.hypot(out_s, out_t) > rho)
    dF = Fb - Fa
    dG = Gb - Ga
    at = (Fa + s[:, None] * dF) - (Ga + t[:, None] * dG)
    lip = np.linalg.norm(dF, axis=1) + np.linalg.norm(dG, axis=1)
    gap = np.linalg.norm(at, axis=1) - lip * rho
    return np.where(~ok, -np.inf, np.where(miss, np.inf, gap))


def crossing_separation(fprime: PLMap, n_original: int, moving: slice) -> np.ndarray:
    """Per sub-edge room for moving the ``moving`` coordinates without collisions.

    Points of two sub-edges can only collide after the move if their other
    coordinates already coincide, so each pair only constrains the moving
    coordinates near such coincidences; near-parallel pairs fall back to the
    full segment distance.  Pairs on the same original edge (kept apart by
    the affine middle block) and pairs sharing an original vertex (kept apart
    by the local-embedding check) are skipped.  ``inf`` means unconstrained.
    """
    X = fprime.complex
    parent_idx, _, _ = fprime.carrier.edge_map
    E = X.edge_array
    P = fprime.images
    n = len(E)
    out = np.full(n, np.inf)
    if n < 2:
        return out
    cols = np.zeros(P.shape[1], dtype=bool)
    cols[moving] = True
    fixed, mov = P[:, ~cols], P[:, cols]
    diam = float(np.linalg.norm(P.max(axis=0) - P.min(axis=0)))
    tau = 1e-9 * (1.0 + diam)
    pa, pb = fixed[E[:, 0]], fixed[E[:, 1]]
    lo = np.minimum(pa, pb) - tau
    hi = np.maximum(pa, pb) + tau
    ends = np.where(E < n_original, E, -1)
    for i, j in _box_pairs(lo, hi):
        skip = parent_idx[i] == parent_idx[j]
        for x in (0, 1):
            for y in (0, 1):
                skip |= (ends[i, x] >= 0) & (ends[i, x] == ends[j, y])
        i, j = i[~skip], j[~skip]
        if i.size == 0:
            continue
        ia, ib, ja, jb = E[i, 0], E[i, 1], E[j, 0], E[j, 1]
        gap = _crossing_gap(pa[i], pb[i], pa[j], pb[j], mov[ia], mov[ib], mov[ja], mov[jb], tau)
        flat = gap == -np.inf
        if np.any(flat):
            gap[flat] = _closest_segment_distance(P[ia[flat]], P[ib[flat]], P[ja[flat]], P[jb[flat]])
        np.minimum.at(out, i, gap)
        np.minimum.at(out, j, gap)
    return out


# ---------------------------------------------------------------------------
# pipeline


@dataclass(frozen=True, eq=False)
class PipelineRequest:
    complex: SimplicialComplex
    metric: EdgeMetric
    f: PLMap
    base_vertex: int
    eps: tuple
    mode: str = "embed"
    seed: int = 0
    margin: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "eps", tuple(float(e) for e in self.eps))
        if not self.eps or any(e <= 0 for e in self.eps):
            raise ValueError("epsilon schedule must be a nonempty list of positive numbers")
        if self.mode not in ("embed", "isometry"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.complex.dimension > INTRINSIC_DIM:
            raise ValueError("only 1-dimensional complexes are supported")
        if self.f.complex != self.complex or self.metric.complex != self.complex:
            raise ValueError("metric and map must live on the request complex")
        self.complex.check_vertex(self.base_vertex)
        p, q = self.f.signature
        n = INTRINSIC_DIM
        if self.mode == "embed" and not (p >= n and q >= n and p + q >= 3 * n):
            raise ValueError(f"embedding needs p >= {n}, q >= {n}, p + q >= {3 * n}; got ({p}, {q})")
        if self.mode == "isometry" and not (p >= n and q >= n):
            raise ValueError(f"isometry needs p >= {n} and q >= {n}; got ({p}, {q})")


@dataclass
class PipelineReport:
    mode: str
    guard: EmbeddingGuard | None
    H: np.ndarray
    perturbed: bool
    stage_edges: list
    verification: VerificationReport
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "perturbed": self.perturbed,
            "stage_edges": list(self.stage_edges),
            "H": [float(x) for x in self.H],
            "verification": self.verification.to_dict(),
        }
        if self.guard is not None:
            out["guard"] = {
                "delta": [float(x) for x in self.guard.delta],
                "mu": [float(x) for x in self.guard.mu],
                "eps_eff": [float(x) for x in self.guard.eps_eff],
            }
        out.update(self.notes)
        return out


def _vertex_perturb_bound(X, shells, eps) -> np.ndarray:
    out = np.empty(X.n_vertices)
    for v in range(X.n_vertices):
        k = shells.shell_of((v,))
        out[v] = min(schedule_value(eps, k), schedule_value(eps, k + 1)) * PERTURB_SHARE
    return out


def _edge_shell_eps(X, shells, eps) -> np.ndarray:
    return np.array([schedule_value(eps, shells.shell_of(e)) for e in X.edges])


def _check_short(deficit, edges, what):
    bad = np.flatnonzero(deficit <= 0)
    if bad.size:
        raise PipelineError(
            f"{what} precondition violated",
            {"edges": [edges[i] for i in bad], "slack": [float(deficit[i]) for i in bad]},
        )


def isometric_embed(req: PipelineRequest) -> tuple:
    """PL isometric embedding ``h`` of ``(complex, metric)`` close to ``f`` shell by shell."""
    if req.mode != "embed":
        raise ValueError("isometric_embed needs mode='embed'")
    X, g, f0 = req.complex, req.metric, req.f
    shells = shell_decomposition(X, req.base_vertex)
    eps_edge = _edge_shell_eps(X, shells, req.eps)
    n0 = X.n_vertices

    # 1. general position: f embedded, f+ (+) f* locally embedded, f* nondegenerate on edges
    def pred_embed(m):
        return is_embedding(m)

    def pred_local(m):
        fp, fs, _ = split_coordinates(m)
        return is_local_embedding(PLMap(X, MinkowskiSignature(fp.signature.p + fs.signature.p, fs.signature.q), np.hstack([fp.images, fs.images])))

    def pred_star(m):
        return edges_nondegenerate(split_coordinates(m)[1])

    bound = _vertex_perturb_bound(X, shells, req.eps)
    f = perturb_general_position(f0, bound, req.seed, [pred_embed, pred_local, pred_star])
    f_plus, f_star, f_minus = split_coordinates(f)

    # 2. guard and H
    guard = compute_guard(X, f, req.base_vertex, req.eps, g)
    H = construct_H(g, induced_edge_energies(f), req.margin)
    E_plus = induced_edge_energies(f_plus).energies
    E_star = induced_edge_energies(f_star).energies
    E_minus = induced_edge_energies(f_minus).energies

    # 3. negative engine: G_h- = H - G_f+ - G_f*
    neg_target = H.energies - E_plus - E_star
    _check_short(E_minus - neg_target, X.edges, "negative engine")
    neg_acc = 0.9 * np.minimum(NEG_SHARE * eps_edge, guard.edge_mu / 3)
    neg = negative_engine(
        EngineRequest(X, EdgeMetric(X, neg_target), f_minus, req.base_vertex, req.eps, neg_acc, req.seed)
    )
    C1 = neg.carrier
    T1 = C1.child
    h_minus = neg.output
    star1 = lift(f_star, C1)
    plus1 = lift(f_plus, C1)
    parent1, t0, t1 = C1.edge_map
    frac1 = np.abs(t1 - t0)

    # 4. f* (+) h- locally embedded at original vertices, keeping the strict inequality
    g1 = frac1**2 * g.energies[parent1]

    def pos_slack(hm):
        e_star = induced_edge_energies(star1).energies
        e_minus = induced_edge_energies(hm).energies
        return g1 - e_star - e_minus - induced_edge_energies(plus1).energies

    def pred_local2(m):
        return is_local_embedding(
            PLMap(T1, MinkowskiSignature(f_star.signature.p, f_star.signature.q + 1), np.hstack([star1.images, m.images])),
            vertices=range(n0),
        )

    def pred_slack(m):
        return bool(np.all(pos_slack(m) > 0))

    movable = np.arange(T1.n_vertices) >= n0
    wiggle = np.zeros(T1.n_vertices)
    for k, (u, w) in enumerate(T1.edges):
        room = 0.1 * neg_acc[parent1[k]]
        for x in (u, w):
            wiggle[x] = room if wiggle[x] == 0 else min(wiggle[x], room)
    h_minus = perturb_general_position(
        h_minus, wiggle, req.seed + 1, [pred_local2, pred_slack], movable=movable
    )
    slack = pos_slack(h_minus)
    _check_short(slack, T1.edges, "positive engine")

    # 5. second guard on f' = f+ (+) f* (+) h- over the subdivision
    fprime = PLMap(
        T1,
        f.signature,
        np.hstack([plus1.images, star1.images, h_minus.images]),
        C1,
    )
    mu1 = crossing_separation(fprime, n0, slice(0, 1))
    if np.any(mu1 <= 0):
        raise PipelineError("intermediate map is not injective", {"sub_edges": np.flatnonzero(mu1 <= 0).tolist()})
    pos_acc = np.minimum(NEG_SHARE * eps_edge[parent1], mu1 / 3)

    # 6. positive engine: G_h+ = G - G_f* - G_h-
    pos_target = slack + induced_edge_energies(plus1).energies
    pos = positive_engine(
        EngineRequest(T1, EdgeMetric(T1, pos_target), plus1, req.base_vertex, req.eps, pos_acc, req.seed)
    )
    C2 = pos.carrier
    star2 = C2.evaluate(star1.images)
    minus2 = C2.evaluate(h_minus.images)
    h = PLMap(C2.child, f.signature, np.hstack([pos.output.images, star2, minus2]), pos.output.carrier)

    report = verify_all(h, g, f0, shells, req.eps, check_embedding=True)
    if not report.passed:
        raise VerificationError(report)
    rep = PipelineReport(
        "embed",
        guard,
        H.energies,
        f is not f0,
        [len(X.edges), len(T1.edges), len(h.complex.edges)],
        report,
        {"min_subdivision_separation": float(np.min(mu1)) if mu1.size else float("inf")},
    )
    return h, rep


def pl_isometry(req: PipelineRequest) -> tuple:
    """PL isometry (not necessarily injective) close to ``f`` shell by shell."""
    if req.mode != "isometry":
        raise ValueError("pl_isometry needs mode='isometry'")
    X, g, f = req.complex, req.metric, req.f
    p, q = f.signature
    shells = shell_decomposition(X, req.base_vertex)
    eps_edge = _edge_shell_eps(X, shells, req.eps)
    f_plus, f_minus = split_map(f, [(p, 0), (0, q)])

    H = construct_H(g, induced_edge_energies(f), req.margin)
    E_plus = induced_edge_energies(f_plus).energies
    E_minus = induced_edge_energies(f_minus).energies
    neg_target = H.energies - E_plus
    _check_short(E_minus - neg_target, X.edges, "negative engine")
    neg = negative_engine(
        EngineRequest(X, EdgeMetric(X, neg_target), f_minus, req.base_vertex, req.eps, ISO_SHARE * eps_edge, req.seed)
    )
    C1 = neg.carrier
    T1 = C1.child
    plus1 = lift(f_plus, C1)
    parent1, t0, t1 = C1.edge_map
    g1 = np.abs(t1 - t0) ** 2 * g.energies[parent1]
    pos_target = g1 - induced_edge_energies(neg.output).energies
    e_plus1 = induced_edge_energies(plus1).energies
    _check_short(pos_target - e_plus1, T1.edges, "positive engine")
    pos = positive_engine(
        EngineRequest(
            T1, EdgeMetric(T1, pos_target), plus1, req.base_vertex, req.eps, ISO_SHARE * eps_edge[parent1], req.seed
        )
    )
    C2 = pos.carrier
    h = PLMap(C2.child, f.signature, np.hstack([pos.output.images, C2.evaluate(neg.output.images)]), pos.output.carrier)
    report = verify_all(h, g, f, shells, req.eps, check_embedding=False)
    if not report.passed:
        raise VerificationError(report)
    rep = PipelineReport("isometry", None, H.energies, False, [len(X.edges), len(T1.edges), len(h.complex.edges)], report)
    return h, rep


def approximate(req: PipelineRequest) -> tuple:
    """Dispatch on ``req.mode``."""
    return isometric_embed(req) if req.mode == "embed" else pl_isometry(req)

"""Finite abstract simplicial complexes, stars, shells and edge subdivision.

Vertices are normalized to dense integers ``0..n-1`` on construction; the
caller's original ids are kept in ``SimplicialComplex.labels``.  Every
operation in the package takes normalized ids.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

Simplex = tuple  # sorted tuple of normalized vertex ids


class ComplexError(ValueError):
    """Malformed complex, unknown vertex, or unsupported subdivision."""


def _faces(simplex: Simplex) -> Iterable[Simplex]:
    for k in range(1, len(simplex) + 1):
        yield from combinations(simplex, k)


@dataclass(frozen=True)
class SimplicialComplex:
    labels: tuple
    simplices: frozenset

    @property
    def n_vertices(self) -> int:
        return len(self.labels)

    @cached_property
    def dimension(self) -> int:
        return max(len(s) for s in self.simplices) - 1

    @cached_property
    def edges(self) -> tuple:
        return tuple(sorted(s for s in self.simplices if len(s) == 2))

    @cached_property
    def edge_index(self) -> dict:
        return {e: i for i, e in enumerate(self.edges)}

    @cached_property
    def edge_array(self) -> np.ndarray:
        if not self.edges:
            return np.zeros((0, 2), dtype=int)
        return np.array(self.edges, dtype=int)

    @cached_property
    def incident(self) -> dict:
        """Vertex -> tuple of simplices containing it."""
        out: dict = {v: [] for v in range(self.n_vertices)}
        for s in self.simplices:
            for v in s:
                out[v].append(s)
        return {v: tuple(sorted(ss, key=lambda t: (len(t), t))) for v, ss in out.items()}

    @cached_property
    def neighbors(self) -> dict:
        out: dict = {v: set() for v in range(self.n_vertices)}
        for u, w in self.edges:
            out[u].add(w)
            out[w].add(u)
        return {v: tuple(sorted(n)) for v, n in out.items()}

    def simplices_of_dim(self, k: int) -> list:
        return sorted(s for s in self.simplices if len(s) == k + 1)

    def check_vertex(self, v: int) -> None:
        if not (isinstance(v, (int, np.integer)) and 0 <= v < self.n_vertices):
            raise ComplexError(f"unknown vertex id {v!r}")

    def relabeled_simplices(self) -> list:
        """Every simplex, in original labels, ordered by dimension."""
        return [[self.labels[i] for i in s] for s in sorted(self.simplices, key=lambda t: (len(t), t))]


def build_complex(vertices: Sequence, simplices: Iterable[Iterable]) -> SimplicialComplex:
    """Build a complex from vertex ids and a (not necessarily closed) simplex list.

    All faces are added, so the result is downward closed.  Vertex ids may be
    any hashable values; they are normalized to their position in ``vertices``.
    """
    vertices = list(vertices)
    simplices = [list(s) for s in simplices]
    if not simplices:
        raise ComplexError("simplex list is empty")
    index: dict = {}
    for i, v in enumerate(vertices):
        if v in index:
            raise ComplexError(f"duplicate vertex id {v!r}")
        index[v] = i
    closed: set = set()
    for s in simplices:
        if not s:
            raise ComplexError("empty simplex")
        try:
            ids = tuple(sorted({index[v] for v in s}))
        except KeyError as exc:
            raise ComplexError(f"simplex {s!r} references unknown vertex {exc.args[0]!r}") from None
        if len(ids) != len(s):
            raise ComplexError(f"simplex {s!r} repeats a vertex")
        closed.update(_faces(ids))
    # Every listed vertex is a 0-simplex, even if no simplex mentions it.
    closed.update((i,) for i in range(len(vertices)))
    return SimplicialComplex(tuple(vertices), frozenset(closed))


def closed_star(X: SimplicialComplex, v: int) -> frozenset:
    """All simplices containing ``v`` together with all of their faces."""
    X.check_vertex(v)
    out: set = set()
    for s in X.incident[v]:
        out.update(_faces(s))
    return frozenset(out)


def _star_of_set(X: SimplicialComplex, sub: frozenset) -> frozenset:
    verts = {s[0] for s in sub if len(s) == 1}
    out: set = set(sub)
    for u in verts:
        for s in X.incident[u]:
            out.update(_faces(s))
    return frozenset(out)


@dataclass(frozen=True)
class ShellDecomposition:
    base: int
    shells: tuple  # tuple of frozensets of simplices, shells[0] is the closed star

    def __len__(self) -> int:
        return len(self.shells)

    @cached_property
    def index(self) -> dict:
        return {s: k for k, shell in enumerate(self.shells) for s in shell}

    def shell_of(self, simplex: Simplex) -> int:
        """0-based shell index of a simplex."""
        return self.index[tuple(simplex)]


def shell_decomposition(X: SimplicialComplex, v: int) -> ShellDecomposition:
    """Shells about ``v``: ``Sh^1 = St(v)``, ``Sh^k = St^k(v) minus St^(k-1)(v)``.

    When the component of ``v`` is exhausted but ``X`` is disconnected, the
    growth restarts from the smallest uncovered vertex, so the shells always
    partition the whole complex.
    """
    X.check_vertex(v)
    everything = X.simplices
    covered = closed_star(X, v)
    shells = [covered]
    while covered != everything:
        grown = _star_of_set(X, covered)
        if grown == covered:
            seed = min(s[0] for s in everything - covered if len(s) == 1)
            grown = covered | closed_star(X, seed)
        shells.append(grown - covered)
        covered = grown
    return ShellDecomposition(v, tuple(shells))


def schedule_value(eps: Sequence[float], k: int) -> float:
    """Accuracy for 0-based shell ``k``; the last entry repeats past the end."""
    if len(eps) == 0:
        raise ValueError("empty epsilon schedule")
    return float(eps[min(k, len(eps) - 1)])


@dataclass(frozen=True, eq=False)
class CarrierMap:
    """Where each child vertex sits in the parent complex.

    Child vertex ``i`` is the point ``(1 - t[i]) * support[i, 0] + t[i] * support[i, 1]``
    of the parent; ``support[i]`` is either a parent edge (sorted) or a
    repeated parent vertex with ``t[i] == 0``.  Only edge subdivisions are
    representable, which is all this package produces.
    """

    parent: SimplicialComplex
    child: SimplicialComplex
    support: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.support, dtype=int).reshape(-1, 2)
        t = np.asarray(self.t, dtype=float).reshape(-1)
        object.__setattr__(self, "support", S)
        object.__setattr__(self, "t", t)
        if len(S) != self.child.n_vertices or len(t) != len(S):
            raise ComplexError("carrier must list every child vertex")
        if S.size and (S.min() < 0 or S.max() >= self.parent.n_vertices):
            raise ComplexError("carrier names unknown parent vertices")
        point = S[:, 0] == S[:, 1]
        if np.any(point & (t != 0)) or np.any(~point & ((t <= 0) | (t >= 1))):
            raise ComplexError("carrier parameters must lie in (0, 1) on edges and be 0 on vertices")
        if np.any(~point) and np.any(_edge_lookup(self.parent, S[~point]) < 0):
            raise ComplexError("carrier names a pair that is not a parent edge")

    @classmethod
    def identity(cls, X: SimplicialComplex) -> "CarrierMap":
        v = np.arange(X.n_vertices)
        return cls(X, X, np.stack([v, v], axis=1), np.zeros(X.n_vertices))

    @classmethod
    def from_entries(cls, parent: SimplicialComplex, child: SimplicialComplex, entries) -> "CarrierMap":
        """Build from ``(parent_simplex, barycentric_weights)`` pairs, one per child vertex."""
        S = np.empty((len(entries), 2), dtype=int)
        t = np.zeros(len(entries))
        for i, (simplex, weights) in enumerate(entries):
            simplex = tuple(int(x) for x in simplex)
            if len(simplex) != len(weights) or not 1 <= len(simplex) <= 2:
                raise ComplexError(f"bad carrier entry {simplex!r}, {weights!r}")
            if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-12:
                raise ComplexError(f"bad barycentric weights {weights!r}")
            if len(simplex) == 1:
                S[i] = simplex[0]
            else:
                if simplex[0] > simplex[1]:
                    simplex, weights = simplex[::-1], tuple(weights)[::-1]
                S[i] = simplex
                t[i] = float(weights[1])
        return cls(parent, child, S, t)

    @property
    def entries(self) -> list:
        """``(parent_simplex, weights)`` per child vertex."""
        out = []
        for (u, w), t in zip(self.support.tolist(), self.t.tolist()):
            out.append(((u,), (1.0,)) if u == w else ((u, w), (1.0 - t, t)))
        return out

    def weights_matrix(self) -> np.ndarray:
        """Dense (n_child, n_parent) matrix W with child point = W @ parent points."""
        W = np.zeros((self.child.n_vertices, self.parent.n_vertices))
        rows = np.arange(self.child.n_vertices)
        np.add.at(W, (rows, self.support[:, 0]), 1.0 - self.t)
        np.add.at(W, (rows, self.support[:, 1]), self.t)
        return W

    def evaluate(self, parent_images: np.ndarray) -> np.ndarray:
        """Images of child vertices under the parent's simplicial map."""
        P = np.asarray(parent_images, dtype=float)
        a, b = P[self.support[:, 0]], P[self.support[:, 1]]
        t = self.t.reshape((-1,) + (1,) * (P.ndim - 1))
        out = a + t * (b - a)
        point = self.support[:, 0] == self.support[:, 1]
        out[point] = a[point]
        return out

    @cached_property
    def edge_map(self) -> tuple:
        """Per child edge: parent edge index and the parameters of its endpoints.

        Parameters run from ``parent_edge[0]`` (0) to ``parent_edge[1]`` (1).
        """
        E = self.child.edge_array
        Sa, Sb = self.support[E[:, 0]], self.support[E[:, 1]]
        a_pt = Sa[:, 0] == Sa[:, 1]
        b_pt = Sb[:, 0] == Sb[:, 1]
        edge = np.where(~a_pt[:, None], Sa, np.where(~b_pt[:, None], Sb, np.stack([Sa[:, 0], Sb[:, 0]], axis=1)))
        edge = np.sort(edge, axis=1)
        # both endpoints must live on that edge
        ok_a = np.where(a_pt, (Sa[:, 0] == edge[:, 0]) | (Sa[:, 0] == edge[:, 1]), np.all(Sa == edge, axis=1))
        ok_b = np.where(b_pt, (Sb[:, 0] == edge[:, 0]) | (Sb[:, 0] == edge[:, 1]), np.all(Sb == edge, axis=1))
        parent_idx = _edge_lookup(self.parent, edge) if len(edge) else np.zeros(0, dtype=int)
        bad = ~(ok_a & ok_b) | (parent_idx < 0) | (edge[:, 0] == edge[:, 1])
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise ComplexError(f"child edge {tuple(E[k])} is not carried by a parent edge")
        t0 = np.where(a_pt, (Sa[:, 0] == edge[:, 1]).astype(float), self.t[E[:, 0]])
        t1 = np.where(b_pt, (Sb[:, 0] == edge[:, 1]).astype(float), self.t[E[:, 1]])
        return parent_idx, t0, t1

    def compose(self, outer: "CarrierMap") -> "CarrierMap":
        """Carrier from ``outer.child`` straight to ``self.parent``.

        ``outer.parent`` must be ``self.child``.
        """
        if outer.parent is not self.child and outer.parent != self.child:
            raise ComplexError("carriers do not chain")
        S = self.support[outer.support[:, 0]].copy()
        t = self.t[outer.support[:, 0]].copy()
        on_edge = outer.support[:, 0] != outer.support[:, 1]
        if np.any(on_edge):
            k = _edge_lookup(self.child, outer.support[on_edge])
            pidx, t0, t1 = self.edge_map
            tt = t0[k] + outer.t[on_edge] * (t1[k] - t0[k])
            pe = self.parent.edge_array[pidx[k]]
            Se = pe.copy()
            Se[tt <= 0.0] = pe[tt <= 0.0, :1]
            Se[tt >= 1.0] = pe[tt >= 1.0, 1:]
            tt = np.where((tt <= 0.0) | (tt >= 1.0), 0.0, tt)
            S[on_edge] = Se
            t[on_edge] = tt
        return CarrierMap(self.parent, outer.child, S, t)


def _edge_lookup(X: SimplicialComplex, pairs: np.ndarray) -> np.ndarray:
    """Index of each sorted vertex pair in ``X.edges``, or -1."""
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    E = X.edge_array
    if len(E) == 0:
        return np.full(len(pairs), -1)
    n = max(X.n_vertices, 1)
    keys = E[:, 0] * n + E[:, 1]  # sorted because edges are sorted
    q = pairs[:, 0] * n + pairs[:, 1]
    pos = np.clip(np.searchsorted(keys, q), 0, len(keys) - 1)
    return np.where(keys[pos] == q, pos, -1)


def _graph_complex(n: int, edges: np.ndarray, extra: Iterable = ()) -> SimplicialComplex:
    """Complex on vertices ``0..n-1`` with the given (sorted, unique) edges, built in bulk."""
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    edges = edges[order]
    as_tuples = tuple(map(tuple, edges.tolist()))
    simplices = frozenset([(v,) for v in range(n)]) | frozenset(as_tuples) | frozenset(extra)
    X = SimplicialComplex(tuple(range(n)), simplices)
    X.__dict__["edges"] = as_tuples
    X.__dict__["edge_array"] = edges
    return X


def subdivide_params(X: SimplicialComplex, params: Mapping) -> tuple:
    """Insert vertices on edges at the given interior parameters.

    ``params`` maps an edge (sorted id pair) to an increasing sequence of
    parameters in (0, 1), measured from ``edge[0]``.  New vertices are numbered
    after the parent vertices, edge by edge in sorted edge order.
    """
    counts = np.zeros(len(X.edges), dtype=int)
    chunks = {}
    for e, ts in params.items():
        ts = np.asarray(ts, dtype=float).reshape(-1)
        if ts.size == 0:
            continue
        key = tuple(sorted(e))
        if key not in X.edge_index:
            raise ComplexError(f"unknown edge {e}")
        if np.any(ts <= 0) or np.any(ts >= 1) or np.any(np.diff(ts) <= 0):
            raise ComplexError(f"break parameters for edge {key} must increase inside (0, 1)")
        k = X.edge_index[key]
        counts[k] = ts.size
        chunks[k] = ts
    flat = np.concatenate([chunks[k] for k in sorted(chunks)]) if chunks else np.zeros(0)
    return subdivide_counts(X, counts, flat)


def subdivide_counts(X: SimplicialComplex, counts: np.ndarray, params: np.ndarray) -> tuple:
    """Bulk form of :func:`subdivide_params`.

    ``counts[k]`` new vertices go on edge ``k``; ``params`` lists their
    parameters edge by edge.  Parameters are trusted to increase inside (0, 1).
    """
    counts = np.asarray(counts, dtype=int)
    params = np.asarray(params, dtype=float)
    if counts.shape != (len(X.edges),) or counts.sum() != params.size:
        raise ComplexError("counts and parameters do not match the edges")
    split = {X.edges[k] for k in np.flatnonzero(counts)}
    for s in X.simplices:
        if len(s) > 2 and any(e in split for e in combinations(s, 2)):
            raise ComplexError(f"simplex {s} has a split edge; only graphs can be subdivided")
    n0 = X.n_vertices
    n_new = int(counts.sum())
    E = X.edge_array
    owner = np.repeat(np.arange(len(E)), counts)
    ids = n0 + np.arange(n_new)
    first = np.ones(n_new, dtype=bool)
    first[1:] = owner[1:] != owner[:-1]
    last = np.ones(n_new, dtype=bool)
    last[:-1] = owner[:-1] != owner[1:]
    kept = E[counts == 0]
    inner = np.stack([ids[:-1][~last[:-1]], ids[1:][~last[:-1]]], axis=1) if n_new else np.zeros((0, 2), dtype=int)
    head = np.stack([E[owner[first], 0], ids[first]], axis=1)
    tail = np.stack([ids[last], E[owner[last], 1]], axis=1)
    child_edges = np.sort(np.concatenate([kept, head, inner, tail]), axis=1)
    others = [s for s in X.simplices if len(s) > 2]
    child = _graph_complex(n0 + n_new, child_edges, others)
    v = np.arange(n0)
    support = np.concatenate([np.stack([v, v], axis=1), E[owner]])
    t = np.concatenate([np.zeros(n0), params])
    return child, CarrierMap(X, child, support, t)


def subdivide_edges(X: SimplicialComplex, plan: Mapping) -> tuple:
    """Split each edge ``e`` into ``plan[e]`` equal pieces (default 1).

    Returns ``(child, carrier)``.
    """
    params = {}
    for e, m in plan.items():
        e = tuple(sorted(e))
        if e not in X.edge_index:
            raise ComplexError(f"unknown edge {e}")
        m = int(m)
        if m < 1:
            raise ComplexError(f"segment count for edge {e} must be >= 1")
        if m > 1:
            params[e] = [j / m for j in range(1, m)]
    return subdivide_params(X, params)

"""Signed energies, Gram matrices, signatures and the splitting law.

Metrics are stored as *energies* (signed squared lengths).  A signed length
``x`` converts to the energy ``signed_square(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .complex import CarrierMap, SimplicialComplex


def signed_square(x):
    """``x**2`` for ``x >= 0`` and ``-x**2`` otherwise."""
    return x * x if x >= 0 else -(x * x)


def signed_length(energy):
    """Inverse of :func:`signed_square`."""
    if energy >= 0:
        return float(np.sqrt(energy))
    return -float(np.sqrt(-energy))


@dataclass(frozen=True)
class MinkowskiSignature:
    p: int
    q: int

    def __post_init__(self):
        if self.p < 0 or self.q < 0 or self.p + self.q < 1:
            raise ValueError(f"invalid signature ({self.p}, {self.q})")

    @property
    def dim(self) -> int:
        return self.p + self.q

    @property
    def diag(self) -> np.ndarray:
        return np.concatenate([np.ones(self.p), -np.ones(self.q)])

    def __iter__(self):
        return iter((self.p, self.q))


def minkowski_energy(vec, sig: MinkowskiSignature) -> float:
    """``sum(v[:p]**2) - sum(v[p:]**2)``."""
    v = np.asarray(vec, dtype=float)
    if v.shape[-1] != sig.dim:
        raise ValueError(f"vector length {v.shape[-1]} does not match signature {tuple(sig)}")
    return np.sum(v[..., : sig.p] ** 2, axis=-1) - np.sum(v[..., sig.p :] ** 2, axis=-1)


@dataclass(frozen=True, eq=False)
class EdgeMetric:
    """One energy per edge of ``complex``, aligned with ``complex.edges``."""

    complex: SimplicialComplex
    energies: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        if e.shape != (len(self.complex.edges),):
            raise ValueError(f"expected {len(self.complex.edges)} energies, got shape {e.shape}")
        if not np.all(np.isfinite(e)):
            raise ValueError("energies must be finite")
        object.__setattr__(self, "energies", e)

    @classmethod
    def from_dict(cls, X: SimplicialComplex, energy: Mapping) -> "EdgeMetric":
        values = np.empty(len(X.edges))
        seen = set()
        for e, val in energy.items():
            key = tuple(sorted(e))
            if key not in X.edge_index:
                raise ValueError(f"metric names unknown edge {e!r}")
            values[X.edge_index[key]] = val
            seen.add(key)
        missing = [e for e in X.edges if e not in seen]
        if missing:
            raise ValueError(f"missing energy for edges {missing}")
        return cls(X, values)

    @classmethod
    def from_signed_lengths(cls, X: SimplicialComplex, lengths: Sequence[float]) -> "EdgeMetric":
        return cls(X, np.array([signed_square(float(x)) for x in lengths]))

    def energy(self, edge) -> float:
        return float(self.energies[self.complex.edge_index[tuple(sorted(edge))]])

    def as_dict(self) -> dict:
        return {e: float(x) for e, x in zip(self.complex.edges, self.energies)}


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    simplex: tuple
    gram: np.ndarray

    @property
    def size(self) -> int:
        return self.gram.shape[0]

    def energy_of(self, i: int, j: int):
        """Energy of the edge between simplex positions ``i`` and ``j``.

        Position 0 is the base vertex, so ``energy_of(0, i)`` is ``gram[i-1, i-1]``.
        """
        G = self.gram
        if i == j:
            return 0
        if i == 0 or j == 0:
            k = max(i, j) - 1
            return G[k, k]
        a, b = i - 1, j - 1
        return G[a, a] + G[b, b] - 2 * G[a, b]


@dataclass(frozen=True, eq=False)
class PLMap:
    """Vertex images of a map that is affine on every simplex of ``complex``.

    ``carrier`` links ``complex`` back to the original triangulation when the
    map lives on a subdivision.
    """

    complex: SimplicialComplex
    signature: MinkowskiSignature
    images: np.ndarray
    carrier: CarrierMap | None = None

    def __post_init__(self):
        img = np.asarray(self.images, dtype=float)
        if img.ndim == 1 and self.signature.dim == 1:
            img = img.reshape(-1, 1)
        if img.shape != (self.complex.n_vertices, self.signature.dim):
            raise ValueError(
                f"images must have shape ({self.complex.n_vertices}, {self.signature.dim}), got {img.shape}"
            )
        if not np.all(np.isfinite(img)):
            raise ValueError("images must be finite")
        object.__setattr__(self, "images", img)

    @property
    def root(self) -> SimplicialComplex:
        return self.carrier.parent if self.carrier is not None else self.complex

    def edge_vectors(self) -> np.ndarray:
        E = self.complex.edge_array
        return self.images[E[:, 1]] - self.images[E[:, 0]]


def _is_exact(x) -> bool:
    return isinstance(x, (Fraction, int)) and not isinstance(x, bool)


def gram_matrix(simplex: Sequence[int], metric) -> QuadraticForm:
    """Gram matrix of ``w_i = v_i - v_0`` by polarization.

    ``metric`` is an :class:`EdgeMetric` or a mapping from sorted edge tuples
    to energies.  Exact (``Fraction``/``int``) energies give an exact object
    matrix; floats give a float matrix.
    """
    simplex = tuple(simplex)
    lookup = metric.energy if isinstance(metric, EdgeMetric) else (lambda e: metric[tuple(sorted(e))])
    k = len(simplex) - 1
    try:
        base = [lookup((simplex[0], simplex[i])) for i in range(1, k + 1)]
        pair = {
            (i, j): lookup((simplex[i], simplex[j]))
            for i in range(1, k + 1)
            for j in range(i + 1, k + 1)
        }
    except KeyError as exc:
        raise KeyError(f"missing edge energy for {exc.args[0]!r}") from None
    values = base + list(pair.values())
    exact = bool(values) and all(_is_exact(v) for v in values)
    half = Fraction(1, 2) if exact else 0.5
    G = np.empty((k, k), dtype=object if exact else float)
    for i in range(k):
        G[i, i] = base[i]
    for (i, j), e_ij in pair.items():
        G[i - 1, j - 1] = G[j - 1, i - 1] = half * (base[i - 1] + base[j - 1] - e_ij)
    return QuadraticForm(simplex, G)


def default_tol(gram: np.ndarray) -> float:
    scale = float(np.max(np.abs(np.asarray(gram, dtype=float)))) if gram.size else 0.0
    return 1e-9 * (1.0 + scale)


def signature(form: QuadraticForm, tol: float | None = None) -> tuple:
    """``(n_plus, n_zero, n_minus)`` eigenvalue counts; ``|lambda| <= tol`` is zero."""
    G = np.asarray(form.gram, dtype=float)
    if tol is None:
        tol = default_tol(G)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if G.size == 0:
        return (0, 0, 0)
    lam = np.linalg.eigvalsh(G)
    return (int(np.sum(lam > tol)), int(np.sum(np.abs(lam) <= tol)), int(np.sum(lam < -tol)))


def induced_edge_energies(f: PLMap) -> EdgeMetric:
    """Minkowski energy of each edge image."""
    if not f.complex.edges:
        return EdgeMetric(f.complex, np.zeros(0))
    return EdgeMetric(f.complex, minkowski_energy(f.edge_vectors(), f.signature))


def is_short(G_f: QuadraticForm, G: QuadraticForm, strict: bool = False, tol: float | None = None) -> bool:
    """True iff ``G - G_f`` is positive semidefinite (definite when ``strict``)."""
    A = np.asarray(G.gram, dtype=float)
    B = np.asarray(G_f.gram, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    if tuple(G.simplex) != tuple(G_f.simplex):
        raise ValueError("forms live on different simplices or vertex orders")
    D = A - B
    if tol is None:
        tol = 1e-9 * (1.0 + max(np.max(np.abs(A), initial=0.0), np.max(np.abs(B), initial=0.0)))
    if D.size == 0:
        return not strict
    lam = np.linalg.eigvalsh(D)
    return bool(np.all(lam > tol)) if strict else bool(np.all(lam >= -tol))


def sum_forms(a: QuadraticForm, b: QuadraticForm) -> QuadraticForm:
    if tuple(a.simplex) != tuple(b.simplex):
        raise ValueError("forms live on different simplices or vertex orders")
    if a.gram.shape != b.gram.shape:
        raise ValueError(f"shape mismatch {a.gram.shape} vs {b.gram.shape}")
    return QuadraticForm(a.simplex, a.gram + b.gram)


def induced_form(f: PLMap, simplex: Sequence[int]) -> QuadraticForm:
    return gram_matrix(simplex, induced_edge_energies(f))


def split_map(f: PLMap, blocks: Sequence[tuple]) -> list:
    """Split ``f`` into consecutive coordinate blocks.

    ``blocks`` lists ``(p_i, q_i)`` pairs.  Each block takes ``p_i``
    coordinates from the positive part and ``q_i`` from the negative part, in
    order; blocks must consume positive coordinates before any block reaches
    into the negative part (a block may straddle the boundary).
    """
    p, q = f.signature
    if sum(b[0] for b in blocks) != p or sum(b[1] for b in blocks) != q:
        raise ValueError(f"blocks {list(blocks)} do not partition signature ({p}, {q})")
    used_p = 0
    for bp, bq in blocks:
        if bp < 0 or bq < 0 or bp + bq == 0:
            raise ValueError(f"invalid block ({bp}, {bq})")
        if bq > 0 and used_p + bp != p:
            raise ValueError("a block reaches negative coordinates before the positive ones are used up")
        used_p += bp
    result = []
    offset = 0
    for bp, bq in blocks:
        n = bp + bq
        result.append(
            PLMap(f.complex, MinkowskiSignature(bp, bq), f.images[:, offset : offset + n], f.carrier)
        )
        offset += n
    return result


def concat_maps(parts: Sequence[PLMap]) -> PLMap:
    """Inverse of :func:`split_map` for blocks whose signs stay in order."""
    first = parts[0]
    p = sum(m.signature.p for m in parts)
    q = sum(m.signature.q for m in parts)
    images = np.concatenate([m.images for m in parts], axis=1)
    return PLMap(first.complex, MinkowskiSignature(p, q), images, first.carrier)


def lift(f: PLMap, carrier: CarrierMap) -> PLMap:
    """Restate ``f`` on ``carrier.child``; ``f`` must live on ``carrier.parent``."""
    root = f.carrier.compose(carrier) if f.carrier is not None else carrier
    return PLMap(carrier.child, f.signature, carrier.evaluate(f.images), root)

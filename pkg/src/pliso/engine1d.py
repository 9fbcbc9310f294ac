"""Short maps of metric graphs to exact path isometries.

Every edge whose image is shorter than its prescribed length is replaced by
a longer polyline that stays close to the original straight image: a planar
sawtooth when the target has two or more dimensions, and a back-and-forth
fold on the line otherwise.  Each new sub-edge is traversed at constant
speed, so the result is affine and isometric on every piece of the
subdivision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .complex import (
    CarrierMap,
    ShellDecomposition,
    SimplicialComplex,
    schedule_value,
    shell_decomposition,
    subdivide_counts,
)
from .forms import EdgeMetric, PLMap

ORTHO_TOL = 1e-12
ISOMETRIC_RTOL = 1e-12


class NotShortError(ValueError):
    """Some edge image is already longer than its prescribed length."""

    def __init__(self, violations):
        self.violations = list(violations)
        detail = ", ".join(f"edge {e}: deficit {d:.3g}" for e, d in self.violations)
        super().__init__(f"input map is not short: {detail}")


@dataclass(frozen=True)
class Polyline:
    params: np.ndarray  # increasing, params[0] == 0, params[-1] == 1
    points: np.ndarray  # (len(params), N)
    deviation: float  # sup distance to the affine parametrization of the chord
    teeth: int = 0

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.points, axis=0), axis=1)

    @property
    def length(self) -> float:
        return float(self.segment_lengths.sum())


def pick_normal(direction, used: Sequence = (), seed: int = 0) -> np.ndarray:
    """Unit vector orthogonal to ``direction``.

    The lowest-index basis vector that is not parallel to ``direction`` is
    orthogonalized against it.  Only when that choice collides with a vector
    in ``used`` does ``seed`` pick a random alternative.
    """
    d = np.asarray(direction, dtype=float)
    dim = d.shape[0]
    if dim < 2:
        raise ValueError("a normal needs an ambient dimension of at least 2")
    norm = np.linalg.norm(d)
    if norm == 0:
        d = np.eye(dim)[0]
    else:
        d = d / norm
    normal = None
    for i in range(dim):
        e = np.eye(dim)[i]
        if abs(e @ d) < 1.0 - 1e-9:
            v = e - (e @ d) * d
            normal = v / np.linalg.norm(v)
            break

    def collides(n):
        return any(abs(float(n @ np.asarray(u, dtype=float))) > 1.0 - 1e-9 for u in used)

    if used and collides(normal):
        rng = np.random.default_rng(seed)
        for _ in range(16):
            v = rng.standard_normal(dim)
            v -= (v @ d) * d
            nv = np.linalg.norm(v)
            if nv > 1e-6 and not collides(v / nv):
                return v / nv
    return normal


def sawtooth_amplitude(target_length: float, chord: float, m: int) -> float:
    return math.sqrt(max(target_length**2 - chord**2, 0.0)) / (2 * m)


def tooth_count(target_length: float, chord: float, eps: float) -> int:
    """Least ``m`` with ``amplitude + chord/m < eps``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    budget = math.sqrt(max(target_length**2 - chord**2, 0.0)) / 2 + chord
    m = max(1, int(math.floor(budget / eps)) + 1)
    while m > 1 and budget / (m - 1) < eps:
        m -= 1
    while budget / m >= eps:
        m += 1
    return m


def sawtooth_edge(a, b, target_length: float, m: int, normal) -> Polyline:
    """Zigzag from ``a`` to ``b`` with ``2m`` equal segments of total ``target_length``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    u = np.asarray(normal, dtype=float)
    if a.shape[0] < 2:
        raise ValueError("sawtooth needs at least two dimensions; use fold_edge_1d")
    if m < 1:
        raise ValueError("tooth count must be >= 1")
    nu = np.linalg.norm(u)
    if nu == 0:
        raise ValueError("zero normal")
    u = u / nu
    chord = float(np.linalg.norm(b - a))
    if abs(u @ (b - a)) > ORTHO_TOL * max(1.0, chord):
        raise ValueError("normal is not orthogonal to the chord")
    if target_length < chord * (1 - ISOMETRIC_RTOL):
        raise NotShortError([((0, 1), chord - target_length)])
    amp = sawtooth_amplitude(target_length, chord, m)
    params = np.arange(2 * m + 1) / (2 * m)
    points = a + params[:, None] * (b - a)
    points[1::2] += amp * u
    points[0], points[-1] = a, b
    return Polyline(params, points, amp, m)


def fold_edge_1d(a, b, target_length: float, eps: float) -> Polyline:
    """Path on the line from ``a`` to ``b`` of total length ``target_length``.

    The domain is cut into ``k = ceil((T - L) / (2 eps))`` equal blocks; each
    block runs forward, back by ``(T - L) / (2k)`` and forward again, at the
    constant speed ``T``.  The sup deviation from the affine chord is
    ``(T**2 - L**2) / (4 k T)``, which never exceeds ``eps``.
    """
    a = float(np.ravel(a)[0])
    b = float(np.ravel(b)[0])
    T = float(target_length)
    if eps <= 0:
        raise ValueError("eps must be positive")
    L = abs(b - a)
    if T < L * (1 - ISOMETRIC_RTOL):
        raise NotShortError([((0, 1), L - T)])
    extra = T - L
    if extra <= ISOMETRIC_RTOL * max(T, L) or T == 0:
        return Polyline(np.array([0.0, 1.0]), np.array([[a], [b]]), 0.0, 0)
    counts, params, points, dev, blocks = _fold_batch(np.array([a]), np.array([b]), np.array([T]), np.array([eps]))
    params = np.concatenate([[0.0], params, [1.0]])
    points = np.concatenate([[a], points, [b]])
    return Polyline(params, points[:, None], float(dev[0]), int(blocks[0]))


def _fold_batch(a, b, T, eps):
    """Vectorized fold for many edges on the line (all with ``T > |b - a|``).

    Returns interior-point counts, their parameters and positions (edge by
    edge), the deviation per edge and the block count per edge.
    """
    L = np.abs(b - a)
    extra = T - L
    k = np.maximum(np.ceil(extra / (2 * eps)), 1).astype(int)
    d = L / k
    e = extra / (2 * k)
    half = (d + e) / 2
    sign = np.where(b >= a, 1.0, -1.0)
    n_pts = 3 * k - 1
    owner = np.repeat(np.arange(len(a)), n_pts)
    start = np.repeat(np.cumsum(n_pts) - n_pts, n_pts)
    q = np.arange(owner.size) - start
    j, r = q // 3, q % 3
    ko, do, eo, ho, To = k[owner], d[owner], e[owner], half[owner], T[owner]
    # closed form per block keeps rounding independent of k
    offset = np.choose(r, [j * do + ho, j * do + ho - eo, (j + 1) * do])
    param = np.choose(r, [j / ko + ho / To, j / ko + (ho + eo) / To, (j + 1) / ko])
    points = a[owner] + sign[owner] * offset
    dev = (T * T - L * L) / (4 * k * T)
    return n_pts, param, points, dev, k


def _normals(direction):
    """Row-wise version of :func:`pick_normal` without collision handling."""
    n, dim = direction.shape
    norm = np.linalg.norm(direction, axis=1)
    d = np.where(norm[:, None] > 0, direction / np.where(norm > 0, norm, 1.0)[:, None], np.eye(dim)[0])
    i = np.where(np.abs(d[:, 0]) < 1.0 - 1e-9, 0, 1)
    e = np.eye(dim)[i]
    v = e - np.einsum("ij,ij->i", e, d)[:, None] * d
    return v / np.linalg.norm(v, axis=1)[:, None]


def _tooth_counts(T, L, eps):
    budget = np.sqrt(np.maximum(T * T - L * L, 0.0)) / 2 + L
    m = np.maximum(np.floor(budget / eps).astype(int) + 1, 1)
    m = np.where((m > 1) & (budget / np.maximum(m - 1, 1) < eps), m - 1, m)
    m = np.where(budget / m >= eps, m + 1, m)
    return m


def _sawtooth_batch(a, b, T, eps):
    """Vectorized sawtooth for many edges with ambient dimension >= 2."""
    chord = b - a
    L = np.linalg.norm(chord, axis=1)
    m = _tooth_counts(T, L, eps)
    amp = np.sqrt(np.maximum(T * T - L * L, 0.0)) / (2 * m)
    normal = _normals(chord)
    n_pts = 2 * m - 1
    owner = np.repeat(np.arange(len(a)), n_pts)
    start = np.repeat(np.cumsum(n_pts) - n_pts, n_pts)
    i = np.arange(owner.size) - start + 1
    param = i / (2 * m[owner])
    points = a[owner] + param[:, None] * chord[owner]
    odd = (i % 2) == 1
    points[odd] += amp[owner][odd, None] * normal[owner][odd]
    return n_pts, param, points, amp, m


@dataclass(frozen=True, eq=False)
class EngineRequest:
    """Input to :func:`positive_engine` / :func:`negative_engine`.

    ``input_map.carrier`` (if set) ties ``graph`` to an original complex; shells
    and ``base_vertex`` then refer to that original complex.  ``edge_eps``
    optionally caps the accuracy per edge of ``graph``.
    """

    graph: SimplicialComplex
    targets: EdgeMetric
    input_map: PLMap
    base_vertex: int
    eps: tuple
    edge_eps: np.ndarray | None = None
    seed: int = 0
    rtol: float = 1e-9


@dataclass(frozen=True, eq=False)
class EngineResult:
    output: PLMap  # carrier composed all the way to the original complex
    carrier: CarrierMap  # output.complex -> request graph
    achieved: EdgeMetric  # on output.complex
    shell_deviation: list
    edge_deviation: np.ndarray  # per request-graph edge
    shells: ShellDecomposition = field(repr=False)


def edge_accuracy(req: EngineRequest) -> tuple:
    """Per-edge accuracy for ``req.graph`` and the shell index of each edge."""
    f = req.input_map
    root = f.root
    shells = shell_decomposition(root, req.base_vertex)
    if f.carrier is not None:
        parent_idx, _, _ = f.carrier.edge_map
        shell_idx = np.array([shells.shell_of(root.edges[i]) for i in parent_idx], dtype=int)
    else:
        shell_idx = np.array([shells.shell_of(e) for e in req.graph.edges], dtype=int)
    eps = np.array([schedule_value(req.eps, k) for k in shell_idx])
    if req.edge_eps is not None:
        eps = np.minimum(eps, np.asarray(req.edge_eps, dtype=float))
    if np.any(eps <= 0):
        raise ValueError("accuracies must be positive")
    return eps, shell_idx, shells


def _corrugate(req: EngineRequest, target_lengths: np.ndarray) -> tuple:
    if len(req.eps) == 0:
        raise ValueError("empty epsilon schedule")
    f = req.input_map
    if f.complex != req.graph:
        raise ValueError("input map must live on the request graph")
    if req.graph.dimension > 1:
        raise ValueError("engines handle 1-dimensional complexes only")
    eps, shell_idx, shells = edge_accuracy(req)
    images = f.images
    N = images.shape[1]
    E = req.graph.edge_array
    a, b = images[E[:, 0]], images[E[:, 1]]
    chord = np.linalg.norm(b - a, axis=1)
    T = np.asarray(target_lengths, dtype=float)
    bad = np.flatnonzero(chord > T * (1 + req.rtol) + 1e-300)
    if bad.size:
        raise NotShortError([(req.graph.edges[k], float(chord[k] - T[k])) for k in bad])

    grow = np.flatnonzero(T - chord > ISOMETRIC_RTOL * T)
    counts = np.zeros(len(E), dtype=int)
    edge_dev = np.zeros(len(E))
    if grow.size:
        if N == 1:
            n_pts, params, points, dev, _ = _fold_batch(a[grow, 0], b[grow, 0], T[grow], eps[grow])
            points = points[:, None]
        else:
            n_pts, params, points, dev, _ = _sawtooth_batch(a[grow], b[grow], T[grow], eps[grow])
        counts[grow] = n_pts
        edge_dev[grow] = dev
    else:
        params, points = np.zeros(0), np.zeros((0, N))
    child, carrier = subdivide_counts(req.graph, counts, params)
    out_images = np.concatenate([images, points], axis=0)
    shell_dev = [0.0] * len(shells)
    for k in np.flatnonzero(edge_dev):
        s = shell_idx[k]
        shell_dev[s] = max(shell_dev[s], float(edge_dev[k]))
    root_carrier = f.carrier.compose(carrier) if f.carrier is not None else carrier
    achieved = np.sum(np.diff(out_images[child.edge_array], axis=1)[:, 0] ** 2, axis=1) if child.edges else np.zeros(0)
    return child, carrier, root_carrier, out_images, achieved, shell_dev, edge_dev, shells


def positive_engine(req: EngineRequest) -> EngineResult:
    """Exact path isometry of a Euclidean metric graph near a short input map."""
    sig = req.input_map.signature
    if sig.q != 0:
        raise ValueError("positive engine needs a Euclidean target (signature (N, 0))")
    E = req.targets.energies
    if np.any(E <= 0):
        bad = [req.graph.edges[i] for i in np.flatnonzero(E <= 0)]
        raise ValueError(f"positive engine needs positive target energies; offending edges {bad}")
    child, carrier, root, img, achieved, shell_dev, edge_dev, shells = _corrugate(req, np.sqrt(E))
    out = PLMap(child, sig, img, root)
    return EngineResult(out, carrier, EdgeMetric(child, achieved), shell_dev, edge_dev, shells)


def negative_engine(req: EngineRequest) -> EngineResult:
    """Mirror of :func:`positive_engine` for non-positive energies in ``R^{0,N}``."""
    sig = req.input_map.signature
    if sig.p != 0:
        raise ValueError("negative engine needs a negative-definite target (signature (0, N))")
    E = req.targets.energies
    if np.any(E > 0):
        bad = [req.graph.edges[i] for i in np.flatnonzero(E > 0)]
        raise ValueError(f"negative engine needs non-positive target energies; offending edges {bad}")
    child, carrier, root, img, achieved, shell_dev, edge_dev, shells = _corrugate(req, np.sqrt(-E))
    out = PLMap(child, sig, img, root)
    return EngineResult(out, carrier, EdgeMetric(child, -achieved), shell_dev, edge_dev, shells)

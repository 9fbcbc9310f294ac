"""JSON documents for complexes, metrics, maps, schedules and results.

A document looks like::

    {
      "format": "pliso/1",
      "vertices": ["a", "b"],
      "simplices": [["a", "b"]],
      "metric": [{"edge": ["a", "b"], "value": -3, "unit": "signed_length"}],
      "map": {"signature": [1, 2], "images": [[0, 0, 0], [1, 0, 0]]},
      "schedule": {"base_vertex": "a", "eps": [0.5], "seed": 7}
    }

``map`` and ``schedule`` are optional; ``images`` follow the order of
``vertices``.  Written documents always store energies (``unit: "energy"``),
list simplices sorted, and carry an optional ``result`` block with the
subdivision, its carrier and the output images.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .complex import CarrierMap, ComplexError, SimplicialComplex, _graph_complex, build_complex
from .forms import EdgeMetric, MinkowskiSignature, PLMap, signed_square

FORMAT = "pliso/1"
UNITS = ("energy", "signed_length")


class DocumentError(ValueError):
    """Malformed or inconsistent document.

    ``line``/``column`` locate syntax errors; ``where`` names the offending
    entity for semantic errors.
    """

    def __init__(self, message, line=None, column=None, where=None):
        self.message, self.line, self.column, self.where = message, line, column, where
        loc = f" (line {line}, column {column})" if line is not None else ""
        at = f" at {where}" if where else ""
        super().__init__(f"{message}{at}{loc}")

    def to_dict(self) -> dict:
        out = {"error": self.message}
        if self.line is not None:
            out.update(line=self.line, column=self.column)
        if self.where:
            out["where"] = self.where
        return out


@dataclass(frozen=True)
class Schedule:
    base_vertex: int  # normalized id
    eps: tuple
    seed: int = 0


@dataclass(frozen=True, eq=False)
class Result:
    h: PLMap  # carrier points at the document complex
    mode: str = ""
    report: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class PolyhedronDocument:
    complex: SimplicialComplex
    metric: EdgeMetric
    f: PLMap | None = None
    schedule: Schedule | None = None
    result: Result | None = None

    def label(self, v: int):
        return self.complex.labels[v]

    def vertex_id(self, label) -> int:
        try:
            return self.complex.labels.index(label)
        except ValueError:
            raise DocumentError(f"unknown vertex {label!r}") from None


# ---------------------------------------------------------------------------
# reading


def _need(cond, message, where):
    if not cond:
        raise DocumentError(message, where=where)


def _number(x, where) -> float:
    _need(isinstance(x, (int, float)) and not isinstance(x, bool), "expected a number", where)
    _need(np.isfinite(x), "expected a finite number", where)
    return x


def _matrix(rows, n_rows, n_cols, where) -> np.ndarray:
    _need(isinstance(rows, list) and len(rows) == n_rows, f"expected {n_rows} rows", where)
    out = np.empty((n_rows, n_cols))
    for i, row in enumerate(rows):
        _need(isinstance(row, list) and len(row) == n_cols, f"expected {n_cols} coordinates", f"{where}[{i}]")
        for j, x in enumerate(row):
            out[i, j] = _number(x, f"{where}[{i}][{j}]")
    return out


def _check_closed(simplices: list, labels: list):
    listed = {frozenset(s) for s in simplices} | {frozenset([v]) for v in labels}
    for i, s in enumerate(simplices):
        for k in range(2, len(s)):
            for face in combinations(s, k):
                if frozenset(face) not in listed:
                    raise DocumentError(f"face {list(face)!r} is not listed; simplices must be downward closed", where=f"simplices[{i}]")


def parse(text: str) -> PolyhedronDocument:
    """Parse document text; see the module docstring for the layout."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(exc.msg, line=exc.lineno, column=exc.colno) from None
    return from_dict(raw)


def from_dict(raw) -> PolyhedronDocument:
    _need(isinstance(raw, dict), "document must be an object", "$")
    _need(raw.get("format") == FORMAT, f"format must be {FORMAT!r}", "format")
    labels = raw.get("vertices")
    _need(isinstance(labels, list) and labels, "vertices must be a nonempty list", "vertices")
    for i, v in enumerate(labels):
        _need(isinstance(v, (int, str)) and not isinstance(v, bool), "vertex ids are integers or strings", f"vertices[{i}]")
    simplices = raw.get("simplices")
    _need(isinstance(simplices, list) and simplices, "simplices must be a nonempty list", "simplices")
    for i, s in enumerate(simplices):
        _need(isinstance(s, list) and s, "each simplex is a nonempty list of vertex ids", f"simplices[{i}]")
    _check_closed(simplices, labels)
    try:
        X = build_complex(labels, simplices)
    except ComplexError as exc:
        raise DocumentError(str(exc), where="simplices") from None
    index = {v: i for i, v in enumerate(labels)}

    entries = raw.get("metric")
    _need(isinstance(entries, list), "metric must be a list", "metric")
    energies: dict = {}
    for i, m in enumerate(entries):
        where = f"metric[{i}]"
        _need(isinstance(m, dict), "metric entries are objects", where)
        edge = m.get("edge")
        _need(isinstance(edge, list) and len(edge) == 2, "edge must list two vertex ids", where)
        _need(all(v in index for v in edge), f"edge {edge!r} names an unknown vertex", where)
        key = tuple(sorted(index[v] for v in edge))
        _need(key in X.edge_index, f"edge {edge!r} is not a simplex", where)
        _need(key not in energies, f"edge {edge!r} appears twice", where)
        unit = m.get("unit", "energy")
        _need(unit in UNITS, f"unit must be one of {UNITS}", where)
        value = _number(m.get("value"), where)
        energies[key] = value if unit == "energy" else signed_square(value)
    missing = [[labels[a], labels[b]] for a, b in X.edges if (a, b) not in energies]
    _need(not missing, f"no metric value for edges {missing}", "metric")
    g = EdgeMetric.from_dict(X, energies)

    f = None
    if "map" in raw:
        block = raw["map"]
        _need(isinstance(block, dict), "map must be an object", "map")
        sig = block.get("signature")
        _need(isinstance(sig, list) and len(sig) == 2 and all(isinstance(x, int) for x in sig), "signature is [p, q]", "map.signature")
        try:
            sig = MinkowskiSignature(*sig)
        except ValueError as exc:
            raise DocumentError(str(exc), where="map.signature") from None
        f = PLMap(X, sig, _matrix(block.get("images"), X.n_vertices, sig.dim, "map.images"))

    schedule = None
    if "schedule" in raw:
        block = raw["schedule"]
        _need(isinstance(block, dict), "schedule must be an object", "schedule")
        base = block.get("base_vertex", labels[0])
        _need(base in index, f"unknown base vertex {base!r}", "schedule.base_vertex")
        eps = block.get("eps")
        if not isinstance(eps, list):
            eps = [eps]
        _need(eps and all(_number(e, "schedule.eps") > 0 for e in eps), "eps must be positive", "schedule.eps")
        seed = block.get("seed", 0)
        _need(isinstance(seed, int) and not isinstance(seed, bool), "seed must be an integer", "schedule.seed")
        schedule = Schedule(index[base], tuple(float(e) for e in eps), seed)

    result = None
    if "result" in raw:
        result = _read_result(raw["result"], X, index)
    return PolyhedronDocument(X, g, f, schedule, result)


def _read_result(block, X, index) -> Result:
    _need(isinstance(block, dict), "result must be an object", "result")
    sig = block.get("signature")
    _need(isinstance(sig, list) and len(sig) == 2, "signature is [p, q]", "result.signature")
    sig = MinkowskiSignature(*sig)
    sub = block.get("subdivision")
    _need(isinstance(sub, dict), "subdivision must be an object", "result.subdivision")
    n = sub.get("n_vertices")
    _need(isinstance(n, int) and n >= X.n_vertices, "n_vertices must be an integer", "result.subdivision.n_vertices")
    edges = sub.get("edges")
    _need(isinstance(edges, list), "edges must be a list", "result.subdivision.edges")
    E = np.array(edges, dtype=int).reshape(-1, 2) if edges else np.zeros((0, 2), dtype=int)
    _need(E.size == 0 or (E.min() >= 0 and E.max() < n and np.all(E[:, 0] < E[:, 1])), "edges must be sorted id pairs", "result.subdivision.edges")
    others = [s for s in X.simplices if len(s) > 2]
    child = _graph_complex(n, E, others)
    rows = block.get("carrier")
    _need(isinstance(rows, list) and len(rows) == n, f"carrier needs {n} rows", "result.carrier")
    support = np.empty((n, 2), dtype=int)
    t = np.empty(n)
    for i, row in enumerate(rows):
        where = f"result.carrier[{i}]"
        _need(isinstance(row, list) and len(row) == 3, "carrier rows are [u, w, t]", where)
        _need(row[0] in index and row[1] in index, "carrier names an unknown vertex", where)
        support[i] = index[row[0]], index[row[1]]
        t[i] = _number(row[2], where)
    try:
        carrier = CarrierMap(X, child, support, t)
        carrier.edge_map
    except ComplexError as exc:
        raise DocumentError(str(exc), where="result.carrier") from None
    h = PLMap(child, sig, _matrix(block.get("images"), n, sig.dim, "result.images"), carrier)
    report = block.get("report", {})
    _need(isinstance(report, dict), "report must be an object", "result.report")
    return Result(h, str(block.get("mode", "")), report)


def load(path) -> PolyhedronDocument:
    return parse(Path(path).read_text())


# ---------------------------------------------------------------------------
# writing


def _clean(x):
    """Plain JSON types with floats kept exact (repr round-trips)."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        if x.dtype.kind in "iu":
            return x.tolist()
        if x.dtype.kind == "f" and np.all(np.isfinite(x)):
            return np.where(x == 0, 0.0, x).tolist()
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not np.isfinite(x):
            return None if np.isnan(x) else ("inf" if x > 0 else "-inf")
        return 0.0 if x == 0 else x
    if x is None or isinstance(x, (str, _Rows)):
        return x
    return str(x)


class _Rows:
    """A long list of flat rows, pre-encoded one JSON string per row."""

    def __init__(self, rows: list):
        self.lines = _encode_rows(rows)


def _encode_rows(rows: list) -> list:
    if not rows:
        return []
    if any(isinstance(v, str) and "]" in v for row in rows for v in row):
        return [json.dumps(row, ensure_ascii=False) for row in rows]
    # one C-level encode, then cut at the row boundaries
    parts = json.dumps(rows, ensure_ascii=False)[1:-1].split("], [")
    parts[0], parts[-1] = parts[0][1:], parts[-1][:-1]
    return ["[" + p + "]" for p in parts]


def _float_rows(a) -> list:
    a = np.asarray(a, dtype=float)
    return np.where(a == 0, 0.0, a).tolist()


def _layout(doc: PolyhedronDocument, rows: bool) -> dict:
    X = doc.complex
    L = list(X.labels)
    wrap = _Rows if rows else (lambda r: r)
    simplices = sorted((s for s in X.simplices if len(s) > 1), key=lambda s: (len(s), s))
    out = {
        "format": FORMAT,
        "vertices": L,
        "simplices": [[L[i] for i in s] for s in simplices],
        "metric": [
            {"edge": [L[a], L[b]], "value": float(e), "unit": "energy"}
            for (a, b), e in zip(X.edges, doc.metric.energies)
        ],
    }
    if doc.f is not None:
        out["map"] = {"signature": list(doc.f.signature), "images": wrap(_float_rows(doc.f.images))}
    if doc.schedule is not None:
        s = doc.schedule
        out["schedule"] = {"base_vertex": L[s.base_vertex], "eps": list(s.eps), "seed": s.seed}
    if doc.result is not None:
        h = doc.result.h
        carrier = h.carrier if h.carrier is not None else CarrierMap.identity(X)
        t = _float_rows(carrier.t)
        out["result"] = {
            "mode": doc.result.mode,
            "signature": list(h.signature),
            "subdivision": {"n_vertices": h.complex.n_vertices, "edges": wrap(h.complex.edge_array.tolist())},
            "carrier": wrap([[L[u], L[w], x] for (u, w), x in zip(carrier.support.tolist(), t)]),
            "images": wrap(_float_rows(h.images)),
            "report": doc.result.report,
        }
    return out


def to_dict(doc: PolyhedronDocument) -> dict:
    return _clean(_layout(doc, rows=False))


_SLOT = re.compile(r'(?m)^( *)(.*?)"\\u0000([LR])(\d+)"')


def dumps(doc: PolyhedronDocument) -> str:
    """Normalized text: two-space indentation, innermost arrays on one line."""
    leaves: list = []
    blocks: list = []

    def mark(x):
        # flat arrays and row blocks become placeholders; the indenting encoder
        # is pure Python and slow on large documents
        if isinstance(x, _Rows):
            blocks.append(x.lines)
            return f"\x00R{len(blocks) - 1}"
        if isinstance(x, dict):
            return {k: mark(v) for k, v in x.items()}
        if isinstance(x, list):
            if all(not isinstance(v, (list, dict, _Rows)) for v in x):
                leaves.append(x)
                return f"\x00L{len(leaves) - 1}"
            return [mark(v) for v in x]
        return x

    def fill(m):
        indent, head, kind, k = m.group(1), m.group(2), m.group(3), int(m.group(4))
        if kind == "L":
            return indent + head + json.dumps(leaves[k], ensure_ascii=False)
        lines = blocks[k]
        if not lines:
            return indent + head + "[]"
        inner = indent + "  "
        return indent + head + "[\n" + ",\n".join(inner + r for r in lines) + "\n" + indent + "]"

    text = json.dumps(mark(_clean(_layout(doc, rows=True))), indent=2, ensure_ascii=False)
    return _SLOT.sub(fill, text) + "\n"


def save(doc: PolyhedronDocument, path) -> None:
    Path(path).write_text(dumps(doc))

"""Command line: ``pliso validate|signature|shells|approximate|verify|plot``.

Exit codes: 0 success, 1 validation or verification failure, 2 usage error.
Failures print a JSON object with an ``error`` key on standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io
from .complex import shell_decomposition
from .engine1d import NotShortError
from .forms import gram_matrix, signature
from .pipeline import PipelineError, PipelineRequest, approximate
from .plot import render_svg
from .verify import verify_all, verify_embedding, verify_isometry

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class Failure(Exception):
    def __init__(self, payload: dict, code: int = EXIT_FAIL):
        super().__init__(payload.get("error", ""))
        self.payload, self.code = payload, code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise Failure({"error": message, "kind": "usage"}, EXIT_USAGE)


def _emit(obj) -> None:
    print(json.dumps(io._clean(obj), indent=2, ensure_ascii=False))


def _load(path) -> io.PolyhedronDocument:
    try:
        return io.load(path)
    except FileNotFoundError:
        raise Failure({"error": f"no such file: {path}", "kind": "io"}, EXIT_USAGE) from None
    except io.DocumentError as exc:
        raise Failure({**exc.to_dict(), "kind": "document", "file": str(path)}) from None


def _vertex(doc, text):
    """Resolve a vertex given on the command line against the document labels."""
    for lab in doc.complex.labels:
        if str(lab) == text:
            return doc.complex.labels.index(lab)
    raise Failure({"error": f"unknown vertex {text!r}", "kind": "usage"}, EXIT_USAGE)


def _eps(text):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise Failure({"error": f"bad eps list {text!r}", "kind": "usage"}, EXIT_USAGE) from None
    if not vals or any(not v > 0 for v in vals):
        raise Failure({"error": "eps values must be positive", "kind": "usage"}, EXIT_USAGE)
    return tuple(vals)


def _pair(text):
    try:
        i, j = (int(x) for x in text.split(","))
    except ValueError:
        raise Failure({"error": f"--project needs two integers, got {text!r}", "kind": "usage"}, EXIT_USAGE) from None
    return i, j


# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    doc = _load(args.file)
    X = doc.complex
    summary = {
        "valid": True,
        "vertices": X.n_vertices,
        "edges": len(X.edges),
        "dimension": X.dimension,
        "map": None if doc.f is None else list(doc.f.signature),
        "schedule": doc.schedule is not None,
        "result": doc.result is not None,
    }
    _emit(summary)
    return EXIT_OK


def cmd_signature(args) -> int:
    doc = _load(args.file)
    X = doc.complex
    L = X.labels
    rows = []
    for s in sorted((s for s in X.simplices if len(s) > 1), key=lambda s: (len(s), s)):
        plus, zero, minus = signature(gram_matrix(s, doc.metric))
        rows.append({"simplex": [L[v] for v in s], "plus": plus, "zero": zero, "minus": minus})
    if args.json:
        _emit(rows)
    else:
        width = max(len(" ".join(map(str, r["simplex"]))) for r in rows)
        print(f"{'simplex':<{width}}  +  0  -")
        for r in rows:
            print(f"{' '.join(map(str, r['simplex'])):<{width}} {r['plus']:2d} {r['zero']:2d} {r['minus']:2d}")
    return EXIT_OK


def cmd_shells(args) -> int:
    doc = _load(args.file)
    X = doc.complex
    v = _vertex(doc, args.vertex)
    shells = shell_decomposition(X, v)
    L = X.labels
    out = []
    for k, shell in enumerate(shells.shells, start=1):
        items = sorted(shell, key=lambda s: (len(s), s))
        out.append({"shell": k, "simplices": [[L[i] for i in s] for s in items]})
    if args.json:
        _emit(out)
    else:
        for row in out:
            print(f"shell {row['shell']}: " + ", ".join("{" + " ".join(map(str, s)) + "}" for s in row["simplices"]))
    return EXIT_OK


def cmd_approximate(args) -> int:
    doc = _load(args.file)
    if doc.f is None:
        raise Failure({"error": "document has no map block to approximate", "kind": "document"})
    sched = doc.schedule
    eps = _eps(args.eps) if args.eps is not None else (sched.eps if sched else None)
    if eps is None:
        raise Failure({"error": "no eps given and the document has no schedule", "kind": "usage"}, EXIT_USAGE)
    seed = args.seed if args.seed is not None else (sched.seed if sched else 0)
    if args.vertex is not None:
        base = _vertex(doc, args.vertex)
    else:
        base = sched.base_vertex if sched else 0
    try:
        req = PipelineRequest(doc.complex, doc.metric, doc.f, base, eps, args.mode, seed, args.margin)
        h, report = approximate(req)
    except (PipelineError, NotShortError) as exc:
        raise Failure({"error": str(exc).split(":")[0], "kind": "pipeline", "details": getattr(exc, "details", {})}) from None
    except ValueError as exc:
        raise Failure({"error": str(exc), "kind": "request"}) from None
    out = io.PolyhedronDocument(
        doc.complex, doc.metric, doc.f, io.Schedule(base, tuple(eps), seed), io.Result(h, args.mode, report.to_dict())
    )
    text = io.dumps(out)
    if args.out:
        Path(args.out).write_text(text)
        v = report.verification
        _emit({"passed": v.passed, "sub_edges": len(h.complex.edges), "max_rel_energy_error": v.max_rel_energy_error, "shell_deviation": v.shell_deviation, "eps": v.eps})
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    doc = _load(args.file)
    ref = _load(args.against) if args.against else doc
    if doc.complex != ref.complex:
        raise Failure({"error": "the two documents describe different complexes", "kind": "document"})
    if doc.result is not None:
        h = doc.result.h
        mode = doc.result.mode
    elif doc.f is not None:
        h, mode = doc.f, ""
    else:
        raise Failure({"error": "document has neither a result nor a map", "kind": "document"})
    check_embedding = args.embedding if args.embedding is not None else mode != "isometry"
    # closeness needs an original map to compare with
    f = (ref.f if ref.f is not None else doc.f) if doc.result is not None else None
    sched = doc.schedule or ref.schedule
    g = ref.metric
    if f is not None and sched is not None:
        shells = shell_decomposition(doc.complex, sched.base_vertex)
        rep = verify_all(h, g, f, shells, sched.eps, check_embedding=check_embedding)
        payload = rep.to_dict()
        passed = rep.passed
    else:
        iso = verify_isometry(h, g)
        emb = verify_embedding(h) if check_embedding else None
        payload = {
            "max_rel_energy_error": iso.max_rel_error,
            "worst_edge": iso.worst_parent_edge,
            "isometry_passed": iso.passed,
            "embedding_passed": None if emb is None else emb.passed,
            "offending_pair": None if emb is None else emb.offending_pair,
            "closeness_passed": None,
        }
        passed = iso.passed and (emb is None or emb.passed)
        payload["passed"] = passed
    _emit(payload)
    if not passed:
        print(json.dumps({"error": "verification failed", "kind": "verification"}), file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_plot(args) -> int:
    doc = _load(args.file)
    i, j = _pair(args.project)
    maps = []
    if doc.f is not None:
        maps.append((doc.f, "dashed"))
    if doc.result is not None:
        maps.append((doc.result.h, "solid"))
    if not maps:
        raise Failure({"error": "document has no map or result to plot", "kind": "document"})
    try:
        svg = render_svg(maps, (i, j))
    except ValueError as exc:
        raise Failure({"error": str(exc), "kind": "usage"}, EXIT_USAGE) from None
    Path(args.out).write_text(svg)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pliso", description="PL isometric embeddings of indefinite metric graphs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", help="structural and invariant checks")
    s.add_argument("file")
    s.set_defaults(run=cmd_validate)

    s = sub.add_parser("signature", help="signature of the form on every simplex")
    s.add_argument("file")
    s.add_argument("--json", action="store_true")
    s.set_defaults(run=cmd_signature)

    s = sub.add_parser("shells", help="shells around a vertex")
    s.add_argument("file")
    s.add_argument("--vertex", required=True)
    s.add_argument("--json", action="store_true")
    s.set_defaults(run=cmd_shells)

    s = sub.add_parser("approximate", help="run the pipeline and write h with its report")
    s.add_argument("file")
    s.add_argument("--mode", choices=("embed", "isometry"), default="embed")
    s.add_argument("--eps", help="scalar or comma-separated list, one per shell")
    s.add_argument("--seed", type=int)
    s.add_argument("--vertex", help="base vertex (default: schedule, else the first vertex)")
    s.add_argument("--margin", type=float, default=1.0)
    s.add_argument("--out", help="output document (default: standard output)")
    s.set_defaults(run=cmd_approximate)

    s = sub.add_parser("verify", help="energy, injectivity and closeness checks")
    s.add_argument("file")
    s.add_argument("--against", help="document holding the metric (and the original map)")
    s.add_argument("--embedding", action=argparse.BooleanOptionalAction, default=None)
    s.set_defaults(run=cmd_verify)

    s = sub.add_parser("plot", help="SVG projection: input map dashed, output solid")
    s.add_argument("file")
    s.add_argument("--out", required=True)
    s.add_argument("--project", default="0,1")
    s.set_defaults(run=cmd_plot)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.run(args)
    except Failure as exc:
        print(json.dumps(io._clean(exc.payload), ensure_ascii=False), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())

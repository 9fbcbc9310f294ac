import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from instances import embed_corpus, sawtooth_document
from pliso import approximate
from pliso.cli import main
from pliso.io import DocumentError, PolyhedronDocument, Result, Schedule, dumps, load, parse, save
from pliso.plot import edge_polylines

ONE_EDGE = {
    "format": "pliso/1",
    "vertices": ["a", "b"],
    "simplices": [["a", "b"]],
    "metric": [{"edge": ["a", "b"], "value": -9, "unit": "energy"}],
    "map": {"signature": [1, 2], "images": [[0, 0, 0], [0, 0, 0]]},
}


def write(tmp_path, obj, name="doc.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return path


def cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestDocuments:
    def test_minimal(self):
        doc = parse(json.dumps(ONE_EDGE))
        assert doc.metric.energies.tolist() == [-9.0]
        assert doc.complex.labels == ("a", "b")
        assert tuple(doc.f.signature) == (1, 2)
        assert doc.schedule is None and doc.result is None

    def test_signed_length_unit(self):
        raw = dict(ONE_EDGE, metric=[{"edge": ["a", "b"], "value": -3, "unit": "signed_length"}])
        assert parse(json.dumps(raw)).metric.energies.tolist() == [-9.0]

    def test_parse_error_position(self):
        with pytest.raises(DocumentError) as info:
            parse('{\n  "format": "pliso/1",\n  "vertices": [0, 1,]\n}')
        assert (info.value.line, info.value.column) == (3, 21)
        assert info.value.to_dict()["line"] == 3

    @pytest.mark.parametrize(
        "change, where",
        [
            ({"format": "other"}, "format"),
            ({"simplices": [["a", "c"]]}, "simplices"),
            ({"metric": []}, "metric"),
            ({"metric": [{"edge": ["a", "b"], "value": 1, "unit": "feet"}]}, "metric[0]"),
            ({"map": {"signature": [1, 2], "images": [[0, 0, 0]]}}, "map.images"),
            ({"schedule": {"eps": [0.5, -1]}}, "schedule.eps"),
        ],
    )
    def test_semantic_errors(self, change, where):
        with pytest.raises(DocumentError) as info:
            parse(json.dumps(dict(ONE_EDGE, **change)))
        assert info.value.where.startswith(where.split("[")[0])

    def test_not_closed(self):
        raw = {"format": "pliso/1", "vertices": [0, 1, 2], "simplices": [[0, 1, 2]], "metric": []}
        with pytest.raises(DocumentError):
            parse(json.dumps(raw))

    def test_round_trip_corpus(self, tmp_path):
        for req in embed_corpus(count=6):
            h, rep = approximate(req)
            if h.complex.n_vertices > 50_000:
                continue
            doc = PolyhedronDocument(
                req.complex, req.metric, req.f, Schedule(req.base_vertex, req.eps, req.seed), Result(h, req.mode, rep.to_dict())
            )
            text = dumps(doc)
            save(doc, tmp_path / "a.json")
            again = load(tmp_path / "a.json")
            assert dumps(again) == text
            assert np.array_equal(again.result.h.images, h.images)
            assert np.array_equal(again.metric.energies, req.metric.energies)

    def test_sawtooth_document(self):
        doc, _ = sawtooth_document()
        again = parse(dumps(doc))
        assert np.array_equal(again.result.h.images, doc.result.h.images)
        chain = edge_polylines(again.result.h)[0]
        assert chain.tolist() == [[0, 0], [0.75, 1], [1.5, 0], [2.25, 1], [3, 0]]


class TestCommands:
    def test_validate(self, tmp_path, capsys):
        code, out, _ = cli(capsys, "validate", write(tmp_path, ONE_EDGE))
        assert code == 0
        assert json.loads(out)["edges"] == 1

    def test_validate_not_closed(self, tmp_path, capsys):
        raw = {"format": "pliso/1", "vertices": [0, 1, 2], "simplices": [[0, 1, 2]], "metric": []}
        code, _, err = cli(capsys, "validate", write(tmp_path, raw))
        assert code == 1
        assert json.loads(err)["kind"] == "document"

    def test_validate_syntax_error(self, tmp_path, capsys):
        code, _, err = cli(capsys, "validate", write(tmp_path, "{\n oops"))
        assert code == 1
        assert json.loads(err)["line"] == 2

    def test_signature(self, tmp_path, capsys):
        raw = {
            "format": "pliso/1",
            "vertices": [0, 1, 2],
            "simplices": [[0, 1, 2], [0, 1], [0, 2], [1, 2], [0], [1], [2]],
            "metric": [
                {"edge": [0, 1], "value": 1},
                {"edge": [0, 2], "value": -1},
                {"edge": [1, 2], "value": 1},
            ],
        }
        code, out, _ = cli(capsys, "signature", write(tmp_path, raw), "--json")
        assert code == 0
        rows = json.loads(out)
        assert rows[-1] == {"simplex": [0, 1, 2], "plus": 1, "zero": 0, "minus": 1}
        code, out, _ = cli(capsys, "signature", write(tmp_path, raw))
        assert out.splitlines()[0].split() == ["simplex", "+", "0", "-"]

    def test_shells(self, tmp_path, capsys):
        raw = {
            "format": "pliso/1",
            "vertices": [0, 1, 2, 3],
            "simplices": [[0, 1], [1, 2], [2, 3]],
            "metric": [{"edge": [i, i + 1], "value": 1} for i in range(3)],
        }
        code, out, _ = cli(capsys, "shells", write(tmp_path, raw), "--vertex", 0, "--json")
        assert code == 0
        assert [s["simplices"] for s in json.loads(out)] == [[[0], [1], [0, 1]], [[2], [1, 2]], [[3], [2, 3]]]
        code, out, _ = cli(capsys, "shells", write(tmp_path, raw), "--vertex", 0)
        assert out.splitlines()[1] == "shell 2: {2}, {1 2}"
        code, _, _ = cli(capsys, "shells", write(tmp_path, raw), "--vertex", 9)
        assert code == 2

    def test_approximate_then_verify(self, tmp_path, capsys):
        src = write(tmp_path, ONE_EDGE)
        out_path = tmp_path / "h.json"
        code, out, _ = cli(capsys, "approximate", src, "--mode", "embed", "--eps", "0.5", "--seed", 7, "--out", out_path)
        assert code == 0 and json.loads(out)["passed"]
        code, out, _ = cli(capsys, "verify", out_path, "--against", src)
        assert code == 0
        report = json.loads(out)
        assert report["passed"] and report["embedding_passed"] and report["closeness_passed"]
        first = out_path.read_bytes()
        cli(capsys, "approximate", src, "--eps", "0.5", "--seed", 7, "--out", out_path)
        assert out_path.read_bytes() == first

    def test_approximate_to_stdout(self, tmp_path, capsys):
        raw = dict(ONE_EDGE, map={"signature": [1, 1], "images": [[0, 0], [0, 0]]})
        code, out, _ = cli(capsys, "approximate", write(tmp_path, raw), "--mode", "isometry", "--eps", "0.5,0.25")
        assert code == 0
        doc = parse(out)
        assert doc.result.mode == "isometry"
        assert doc.schedule.eps == (0.5, 0.25)

    def test_approximate_failures(self, tmp_path, capsys):
        src = write(tmp_path, ONE_EDGE)
        assert cli(capsys, "approximate", src, "--eps", "-1")[0] == 2
        assert cli(capsys, "approximate", src)[0] == 2
        assert cli(capsys, "approximate", src, "--eps", "0.5", "--mode", "isometry")[0] == 0
        nomap = {k: v for k, v in ONE_EDGE.items() if k != "map"}
        assert cli(capsys, "approximate", write(tmp_path, nomap, "n.json"), "--eps", "0.5")[0] == 1
        bad_sig = dict(ONE_EDGE, map={"signature": [1, 1], "images": [[0, 0], [0, 0]]})
        code, _, err = cli(capsys, "approximate", write(tmp_path, bad_sig, "b.json"), "--eps", "0.5")
        assert code == 1 and json.loads(err)["kind"] == "request"

    def test_verify_failure(self, tmp_path, capsys):
        doc, _ = sawtooth_document()
        bad = json.loads(dumps(doc))
        bad["result"]["images"][2][1] += 1e-3
        code, out, err = cli(capsys, "verify", write(tmp_path, bad))
        assert code == 1
        assert not json.loads(out)["isometry_passed"]
        assert json.loads(err)["kind"] == "verification"

    def test_verify_plain_map(self, tmp_path, capsys):
        raw = dict(ONE_EDGE, map={"signature": [1, 2], "images": [[0, 0, 0], [0, 3, 0]]})
        code, out, _ = cli(capsys, "verify", write(tmp_path, raw))
        assert code == 0 and json.loads(out)["closeness_passed"] is None

    def test_plot_sawtooth(self, tmp_path, capsys):
        doc, _ = sawtooth_document()
        src = tmp_path / "saw.json"
        save(doc, src)
        svg_path = tmp_path / "saw.svg"
        code, _, _ = cli(capsys, "plot", src, "--out", svg_path, "--project", "0,1")
        assert code == 0
        root = ET.fromstring(svg_path.read_text())
        ns = "{http://www.w3.org/2000/svg}"
        lines = root.findall(f"{ns}polyline")
        solid = [p for p in lines if p.get("class") == "h"]
        dashed = [p for p in lines if p.get("class") == "f"]
        assert len(solid) == 1 and len(dashed) == 1
        assert len(solid[0].get("points").split()) - 1 == 4
        assert dashed[0].get("stroke-dasharray")

    def test_plot_one_polyline_per_edge(self, tmp_path, capsys):
        src = tmp_path / "h.json"
        cli(capsys, "approximate", write(tmp_path, ONE_EDGE), "--eps", "0.5", "--out", src)
        svg_path = tmp_path / "h.svg"
        assert cli(capsys, "plot", src, "--out", svg_path, "--project", "0,2")[0] == 0
        assert len(ET.fromstring(svg_path.read_text()).findall("{http://www.w3.org/2000/svg}polyline")) == 2
        assert cli(capsys, "plot", src, "--out", svg_path, "--project", "0,5")[0] == 2
        assert cli(capsys, "plot", src, "--out", svg_path, "--project", "x")[0] == 2

    def test_usage_errors(self, tmp_path, capsys):
        assert cli(capsys, "frobnicate")[0] == 2
        code, _, err = cli(capsys)
        assert code == 2 and json.loads(err)["kind"] == "usage"
        assert cli(capsys, "validate", tmp_path / "missing.json")[0] == 2

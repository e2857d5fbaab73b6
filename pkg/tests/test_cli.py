import csv
import io
import json
from importlib import resources

import jsonschema
import pytest

from contactlab import cli
from contactlab.cli import Settings, dumps_report, emit_plot_data, main, run_scene, strip_wall_clock
from contactlab.errors import NumericallyIndeterminate, SceneParseError, SelectorNotFound
from contactlab.scene import BUILTIN_SCENES, load_scene, parse_scene

SCHEMA = json.loads((resources.files("contactlab") / "schema" / "report.schema.json").read_text())
FAST = [s for s in BUILTIN_SCENES if s not in ("s3_bourgeois",)]


def _run(argv, tmp_path):
    out = tmp_path / "r.json"
    code = main([*argv, "--report", str(out)])
    return code, json.loads(out.read_text())


@pytest.mark.parametrize("name", FAST)
def test_builtin_scene_reports_are_schema_valid(name):
    sc = load_scene(name)
    rep, code = run_scene(name, sc.data["default_command"])
    jsonschema.validate(rep, SCHEMA)
    assert rep["exit_code"] == code
    assert code == (1 if name == "t3_dtheta" else 0)
    json.loads(dumps_report(rep))


def test_exit_codes(tmp_path):
    assert _run(["check-contact", "t3_alpha1"], tmp_path)[0] == 0
    code, rep = _run(["check-contact", "t3_dtheta"], tmp_path)
    assert code == 1 and rep["status"] == "fail"
    code, rep = _run(["frobnicate", "t3_alpha1"], tmp_path)
    assert code == 2 and rep["error"]["name"] == "UnknownCommand"
    code, rep = _run(["check-contact", "no_such_scene"], tmp_path)
    assert code == 2 and rep["error"]["name"] == "SceneParseError"
    code, rep = _run(["check-contact", "t3_alpha1", "--tol", "bogus=1"], tmp_path)
    assert code == 2


def test_indeterminate_maps_to_exit_three(monkeypatch):
    def boom(sc, st):
        raise NumericallyIndeterminate("sampling disagrees", {"tau": 1.0})

    monkeypatch.setitem(cli.COMMANDS, "check-weak", boom)
    rep, code = run_scene("t3_alpha1", "check-weak")
    assert code == 3 and rep["status"] == "indeterminate"
    jsonschema.validate(rep, SCHEMA)


def test_flags_override_scene_values(tmp_path):
    code, rep = _run(["check-contact", "t3_alpha1", "--grid", "8"], tmp_path)
    assert rep["results"]["contact"]["count"] == 512
    code, rep = _run(["check-contact", "t3_alpha1"], tmp_path)
    assert rep["results"]["contact"]["count"] == 16**3
    assert _run(["check-contact", "t3_alpha1", "--tol", "2.0"], tmp_path)[0] == 1
    assert _run(["check-contact", "t3_alpha1", "--tol", "pos=0.5"], tmp_path)[0] == 0


def test_scene_tolerances_override_defaults():
    text = load_scene("t3_alpha1").source.replace("[grid]", "[tolerances]\npos = 2.0\n\n[grid]")
    rep, code = run_scene(parse_scene(text, "t3_strict"), "check-contact")
    assert code == 1


def test_scene_syntax_error_has_an_offset():
    with pytest.raises(SceneParseError) as ei:
        parse_scene('format = 1\nname = "x"\n[manifold\n')
    assert ei.value.witness["offset"] is not None


def test_bad_expression_in_scene_is_located():
    text = load_scene("t3_alpha1").source.replace('"cos(theta)"', '"cos(theta"', 1)
    with pytest.raises(SceneParseError) as ei:
        parse_scene(text)
    assert ei.value.witness["at"] == "forms.alpha"
    assert "offset" in ei.value.witness


def test_unknown_form_reference():
    text = load_scene("t3_alpha1").source.replace("[reeb]", '[reeb]\nform = "beta"')
    with pytest.raises(SceneParseError):
        parse_scene(text)


def test_scene_hash_tracks_the_source():
    a = load_scene("t3_alpha1")
    b = parse_scene(a.source + "\n# comment\n")
    assert a.hash != b.hash and len(a.hash) == 64


def test_margins_csv(tmp_path):
    path = tmp_path / "m.csv"
    code = main(["check-contact", "t3_alpha1", "--grid", "4", "--csv", f"margins={path}",
                 "--report", str(tmp_path / "r.json")])
    assert code == 0
    rows = list(csv.reader(io.StringIO(path.read_text())))
    assert rows[0] == ["index", "x", "y", "theta", "margin"]
    assert len(rows) == 1 + 64


def test_empty_orbit_table_gives_header_only():
    rep, code = run_scene("t3_alpha1", "orbits", Settings(seeds=0))
    assert code == 0
    text = emit_plot_data(rep, "orbits")
    lines = text.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("seed_index")


def test_unknown_selector():
    rep, _ = run_scene("t3_alpha1", "check-contact")
    with pytest.raises(SelectorNotFound):
        emit_plot_data(rep, "nope")


def test_strip_wall_clock_ignores_only_the_clock():
    rep, _ = run_scene("t3_alpha1", "check-contact")
    a = dumps_report(rep)
    rep["wall_clock"] = 123.0
    assert strip_wall_clock(a) == strip_wall_clock(dumps_report(rep))
    assert "threads" not in a

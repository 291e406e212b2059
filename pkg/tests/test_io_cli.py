import csv
import json
import math

import numpy as np
import pytest

from modwave import io
from modwave.chain import ChainSpec
from modwave.cli import UsageError, main, parse_cli, parse_range, resolve_spec


def run(argv):
    return main([str(a) for a in argv])


# -- emitters ------------------------------------------------------------------


def test_empty_csv_is_header_only(tmp_path):
    path = tmp_path / "e.csv"
    io.emit_csv(path, ["a", "b"], [])
    assert path.read_bytes() == b"a,b\n"


def test_single_point_csv(tmp_path):
    path = tmp_path / "p.csv"
    io.emit_csv(path, ["x", "ok", "n"], [[0.1, True, np.int64(3)]])
    assert path.read_text() == "x,ok,n\n0.1,true,3\n"


def test_csv_floats_round_trip(tmp_path, rng):
    values = rng.normal(size=50) * 10.0 ** rng.integers(-12, 12, size=50)
    path = tmp_path / "r.csv"
    io.emit_csv(path, ["v"], [[v] for v in values])
    with open(path) as fh:
        back = [float(r["v"]) for r in csv.DictReader(fh)]
    assert back == values.tolist()


def test_identical_data_gives_identical_bytes(tmp_path):
    rows = [[i, i * 0.5, math.pi * i] for i in range(10)]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    io.emit_csv(a, ["i", "h", "p"], rows)
    io.emit_csv(b, ["i", "h", "p"], rows)
    assert a.read_bytes() == b.read_bytes()
    data = {"z": [1, 2], "a": np.float64(0.25), "c": complex(1, -2), "f": np.bool_(True)}
    io.emit_json(tmp_path / "a.json", data)
    io.emit_json(tmp_path / "b.json", dict(reversed(list(data.items()))))
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_json_round_trip(tmp_path):
    data = {"m": np.arange(4).reshape(2, 2), "x": np.float32(1.5), "s": "naïve"}
    io.emit_json(tmp_path / "d.json", data)
    assert json.loads((tmp_path / "d.json").read_text(encoding="utf-8")) == {
        "m": [[0, 1], [2, 3]], "x": 1.5, "s": "naïve"}


def test_json_rejects_unknown_objects(tmp_path):
    with pytest.raises(TypeError):
        io.dumps({"o": object()})


def test_unwritable_path_raises_emit_error(tmp_path):
    with pytest.raises(io.EmitError):
        io.emit_csv(tmp_path / "missing" / "x.csv", ["a"], [])


def test_spec_json_round_trip(tmp_path):
    spec = ChainSpec(z=3, cells=5, k0=1.2, m0=0.8, dk=0.1, dm=0.2, nu=0.7)
    io.emit_json(tmp_path / "s.json", spec.to_dict())
    assert ChainSpec.from_dict(json.loads((tmp_path / "s.json").read_text())) == spec


def test_svg_outputs_are_well_formed(tmp_path):
    import xml.etree.ElementTree as ET

    io.emit_svg_scatter(tmp_path / "s.svg", [0, 1, 2], [1, 0, 1], [0.1, 1, 0.5], title="a<b",
                        lines=[np.array([[0, 0], [2, 1]])])
    io.emit_svg_heatmap(tmp_path / "h.svg", np.array([[0, 1], [np.nan, 3]]), (0, 1), (0, 1))
    for name in ("s.svg", "h.svg"):
        root = ET.parse(tmp_path / name).getroot()
        assert root.tag.endswith("svg")


def test_manifest_write_read(tmp_path):
    out = tmp_path / "o.csv"
    io.emit_csv(out, ["a"], [[1]])
    man = io.RunManifest("demo", {"x": 1}, "0.0", seed=3)
    man.add_output(str(out))
    man.write(tmp_path / "m.json")
    back = io.RunManifest.read(tmp_path / "m.json")
    assert back.command == "demo" and back.seed == 3 and back.params == {"x": 1}
    assert back.finished is not None
    import hashlib

    assert back.outputs == {"o.csv": hashlib.sha256(out.read_bytes()).hexdigest()}


# -- argument handling -----------------------------------------------------------


def test_parse_range():
    assert parse_range("0:8") == (0.0, 8.0, None)
    assert parse_range("0:8:5") == (0.0, 8.0, 5)
    assert parse_range("1:2", 7) == (1.0, 2.0, 7)
    for bad in ("1", "1:2:3:4", "a:b", "0:inf", "0:1:1", "0:1:x"):
        with pytest.raises(UsageError):
            parse_range(bad)


def test_count_conflict_is_usage_error():
    with pytest.raises(UsageError):
        parse_cli(["mathieu-chart", "--delta", "0:8:10", "--nd", "12", "--out", "x.csv"])
    args = parse_cli(["mathieu-chart", "--delta", "0:8:10", "--nd", "10", "--out", "x.csv"])
    assert args.delta_range == (0.0, 8.0, 10)
    assert parse_cli(["mathieu-chart", "--out", "x.csv"]).eps_range == (0.0, 6.0, 80)


def test_flags_override_spec_file(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"z": 3, "cells": 4, "dk": 0.1, "nu": 0.5}))
    args = parse_cli(["monodromy", "--spec", str(path), "--cells", "6", "--nu", "0.9", "--out", "o.json"])
    spec = resolve_spec(args)
    assert (spec.z, spec.cells, spec.dk, spec.nu) == (3, 6, 0.1, 0.9)


def test_missing_chain_size_is_usage_error():
    with pytest.raises(UsageError):
        resolve_spec(parse_cli(["monodromy", "--z", "3", "--out", "o.json"]))


def test_exit_codes(tmp_path):
    out = tmp_path / "o.json"
    assert run(["monodromy", "--z", 0, "--cells", 2, "--nu", 1, "--out", out]) == 4
    assert run(["monodromy", "--z", 2, "--cells", 2, "--bogus", "--out", out]) == 2
    assert run(["monodromy", "--z", 2, "--cells", 2, "--Q-index", 1, "--out", out]) == 2
    assert run(["mathieu-chart", "--nd", 5, "--delta", "0:1:6", "--out", out]) == 2
    assert run(["monodromy", "--z", 2, "--cells", 2, "--nu", 0, "--out", out]) == 4
    assert run(["monodromy", "--spec", tmp_path / "none.json", "--out", out]) == 2
    # sonic line: modulation speed equal to the local wave speed
    assert run(["continuum", "--c", 1.0, "--dk", 0.5, "--drho", 0.5, "--out", tmp_path / "c.csv"]) == 4
    assert run(["simulate", "--z", 2, "--cells", 2, "--nu", 1, "--ic", "what:1", "--t-end", 1,
                "--out", tmp_path / "f.csv"]) == 2
    assert run(["simulate", "--z", 2, "--cells", 2, "--nu", 1, "--ic", "dirac:0", "--t-end", "xT",
                "--out", tmp_path / "f.csv"]) == 2
    short = ["simulate", "--z", 2, "--cells", 3, "--nu", 0.5, "--ic", "dirac:3", "--t-end", "4T",
             "--out", tmp_path / "f.csv", "--metrics", tmp_path / "m.json"]
    assert run(short) == 2
    assert not out.exists()


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "modwave" in capsys.readouterr().out


# -- commands ----------------------------------------------------------------------


def test_monodromy_command(tmp_path):
    out, man = tmp_path / "m.json", tmp_path / "man.json"
    assert run(["monodromy", "--z", 2, "--cells", 3, "--dk", 0.2, "--nu", 0.5, "--out", out,
                "--manifest", man]) == 0
    data = json.loads(out.read_text())
    assert len(data["multipliers"]) == 12
    assert data["symplectic_deviation"] < 1e-9
    assert json.loads(man.read_text())["outputs"]["m.json"] == io.sha256(out)
    cell = tmp_path / "c.json"
    assert run(["monodromy", "--z", 2, "--cells", 3, "--dk", 0.2, "--nu", 0.5, "--cell", "--Q-index", 1,
                "--out", cell]) == 0
    assert len(json.loads(cell.read_text())["multipliers"]) == 4


def test_dispersion_command(tmp_path):
    out, svg = tmp_path / "d.csv", tmp_path / "d.svg"
    assert run(["dispersion", "--z", 2, "--cells", 4, "--dk", 0.2, "--nu", 0.5, "--out", out, "--svg", svg]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert rows and set(rows[0]) == {"q", "omega", "weight", "branch"}
    assert all(-math.pi - 1e-9 <= float(r["q"]) <= math.pi + 1e-9 for r in rows)
    assert svg.exists()


def test_simulate_command(tmp_path):
    out, metrics = tmp_path / "f.csv", tmp_path / "m.json"
    argv = ["simulate", "--z", 2, "--cells", 40, "--dk", 0.2, "--dm", 0.1, "--nu", 0.5, "--ic", "dirac:40",
            "--t-end", "2T", "--out", out, "--metrics", metrics]
    assert run(argv) == 0
    m = json.loads(metrics.read_text())
    assert "center_of_energy_velocity" in m
    first = out.read_bytes()
    assert run(argv) == 0
    assert out.read_bytes() == first
    with open(out) as fh:
        header = next(csv.reader(fh))
    assert header == ["t", "n", "abs_u", "energy"]


def test_continuum_command(tmp_path, capsys):
    out, rep = tmp_path / "c.csv", tmp_path / "r.json"
    assert run(["continuum", "--c", 0.6, "--k0", 1, "--dk", 0.95, "--rho0", 1, "--drho", 0.95,
                "--omega", "0:2:5", "--critical", "--group-velocities", "--out", out, "--report", rep]) == 0
    report = json.loads(rep.read_text())
    assert report["one_way"] is True
    assert report["critical_speed"] == pytest.approx(0.558793, abs=1e-6)
    assert json.loads(capsys.readouterr().out) == report


def test_continuum_without_root_reports_none(tmp_path):
    rep = tmp_path / "r.json"
    assert run(["continuum", "--c", 0.3, "--out", tmp_path / "c.csv", "--critical", "--report", rep]) == 0
    assert json.loads(rep.read_text())["critical_speed"] is None


def test_mathieu_chart_command(tmp_path, capsys):
    out, con = tmp_path / "t.csv", tmp_path / "c.json"
    assert run(["mathieu-chart", "--delta", "0:3:31", "--epsilon", "0:2:11", "--out", out,
                "--contours", con]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["failures"] == 0
    with open(out) as fh:
        assert sum(1 for _ in fh) == 31 * 11 + 1
    assert isinstance(json.loads(con.read_text()), list)


def test_reproduce_fig2_quick_is_byte_stable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["reproduce", "fig2", "--quick", "--out-dir", a]) == 0
    assert run(["reproduce", "fig2", "--quick", "--out-dir", b]) == 0
    man_a = json.loads((a / "manifest.json").read_text())
    man_b = json.loads((b / "manifest.json").read_text())
    assert set(man_a["outputs"]) == {"chart.csv", "contours.json", "chart.svg"}
    assert man_a["outputs"] == man_b["outputs"]
    for name in man_a["outputs"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()


@pytest.mark.slow
def test_reproduce_fig3_and_fig4_quick(tmp_path, capsys):
    assert run(["reproduce", "fig3", "--quick", "--out-dir", tmp_path / "f3"]) == 0
    assert "defaults for unstated parameters" in capsys.readouterr().out
    man = json.loads((tmp_path / "f3" / "manifest.json").read_text())
    assert man["seed"] == 1 and "field_modulated_random.csv" in man["outputs"]
    assert run(["reproduce", "fig4", "--quick", "--out-dir", tmp_path / "f4"]) == 0
    vel = json.loads((tmp_path / "f4" / "velocities.json").read_text())
    assert vel["one_way"] is True and vel["center_of_energy_velocity"] > 0

from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from lowlying import cli


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_unknown_flag_and_command_exit_2(capsys):
    assert cli.main(["density", "--bogus"]) == 2
    assert cli.main(["nonsense"]) == 2
    assert cli.main(["density", "--k", "13"]) == 2
    assert cli.main(["expansion", "--J", "9"]) == 2


def test_unknown_config_key_exit_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert cli.main(["density", "--config", str(cfg)]) == 2
    cfg.write_text("[1, 2]")
    assert cli.main(["density", "--config", str(cfg)]) == 2
    assert cli.main(["density", "--config", str(tmp_path / "missing.json")]) == 2


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"precision": 40, "k": [12], "sigma": 0.5}))
    args = cli.build_parser().parse_args(["density", "--config", str(cfg), "--precision", "35"])
    rc = cli.build_config(args)
    assert rc.precision == 35 and rc.k == [12] and rc.sigma == 0.5


def test_empty_weight_list_gives_header_only(tmp_path):
    out = tmp_path / "d.csv"
    assert cli.main(["density", "--k", "", "--out", str(out), "--no-plot"]) == 0
    text = out.read_text()
    assert text == ",".join(cli.DENSITY_COLUMNS) + "\n"


def test_budget_exceeded_exit_3(tmp_path):
    assert cli.main(["averaged-density", "--K", "100000", "--out", str(tmp_path / "a.csv")]) == 3


def test_density_rows_csv_and_json(tmp_path):
    out = tmp_path / "d.csv"
    assert cli.main(["density", "--k", "12,14,24", "--out", str(out), "--cache", str(tmp_path / "cache")]) == 0
    rows = _read_csv(out)
    assert [r["k"] for r in rows] == ["12", "14", "24"]
    assert (tmp_path / "d.png").exists()
    out_json = tmp_path / "d.json"
    assert cli.main(["density", "--k", "12,24", "--format", "json", "--out", str(out_json),
                     "--cache", str(tmp_path / "cache")]) == 0
    doc = json.loads(out_json.read_text())
    assert doc["columns"] == cli.DENSITY_COLUMNS
    for r_csv, r_json in zip([rows[0], rows[2]], doc["rows"]):
        assert float(r_csv["total"]) == r_json["total"]


def test_corrupted_cache_is_rebuilt(tmp_path):
    from lowlying.modforms import cache_path

    cache = tmp_path / "cache"
    out = tmp_path / "d.csv"
    assert cli.main(["density", "--k", "24", "--out", str(out), "--cache", str(cache), "--no-plot"]) == 0
    first = out.read_text()
    for p in cache.iterdir():
        p.write_text("garbage")
    assert cli.main(["density", "--k", "24", "--out", str(out), "--cache", str(cache), "--no-plot"]) == 0
    assert out.read_text() == first


def test_outputs_are_deterministic(tmp_path):
    texts, pngs = [], []
    for i in range(2):
        out = tmp_path / f"run{i}" / "v.csv"
        out.parent.mkdir()
        assert cli.main(["verify-petersson", "--k", "14,24", "--m-max", "8", "--out", str(out)]) == 0
        texts.append(out.read_text() + (out.parent / "v_survey.csv").read_text())
        pngs.append((out.parent / "v.png").read_bytes())
    assert texts[0] == texts[1]
    assert pngs[0] == pngs[1]


def test_verify_petersson_rows(tmp_path):
    out = tmp_path / "v.csv"
    assert cli.main(["verify-petersson", "--k", "24,14", "--m-max", "6", "--out", str(out), "--no-plot"]) == 0
    rows = _read_csv(out)
    assert rows[1]["status"] == "empty space" and rows[1]["dimension"] == "0"
    assert float(rows[0]["max_identity_residual"]) < cli.IDENTITY_TOL
    assert rows[0]["band_asserted"] == "false"


def test_bessel_check_small(tmp_path):
    out = tmp_path / "b.csv"
    code = cli.main(["bessel-check", "--samples", "200", "--K", "20,40", "--precision", "20", "--out", str(out)])
    rows = _read_csv(out)
    checks = {r["check"]: r for r in rows}
    assert checks["bound_certificate"]["passed"] == "true"
    assert checks["recurrence_residual"]["passed"] == "true"
    assert "averaged_even_slope" in checks
    assert code == (1 if "false" in {r["passed"] for r in rows} else 0)


def test_expansion_plot_data(tmp_path):
    out = tmp_path / "e.csv"
    cli.main(["expansion", "--K", "30,40", "--signs", "+,mixed", "--J", "2", "--out", str(out)])
    rows = _read_csv(out)
    assert [(r["K"], r["sign"]) for r in rows] == [("30", "+"), ("30", "mixed"), ("40", "+"), ("40", "mixed")]
    plot_rows = _read_csv(tmp_path / "e_plotdata.csv")
    assert len(plot_rows) == 4 and set(plot_rows[0]) == {"K", "sign", "scaled_difference"}
    for r in rows:
        assert float(r["difference"]) == pytest.approx(float(r["direct"]) - float(r["expansion"]), abs=1e-13)


def test_expansion_passes_logic():
    rows = [{"K": 1, "sign": "+", "difference": 0.04}, {"K": 2, "sign": "+", "difference": -0.03}]
    assert cli.expansion_passes(rows)
    rows[1]["difference"] = 0.045
    assert not cli.expansion_passes(rows)


def test_csv_formatting():
    text = cli.rows_to_csv([{"a": 1, "b": 0.1 + 0.2, "c": None, "d": True}], ["a", "b", "c", "d"])
    assert text == "a,b,c,d\n1,0.3,,true\n"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "lowlying", "density", "--k", ""], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("k,X,")

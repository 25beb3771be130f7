import json

import pytest
from click.testing import CliRunner

from layerstab.cli import main
from layerstab.report import read_scan_csv

TOY = '{"system": "toy", "a": 0.5, "c_bar": 0.3}'
TOY_STABLE = '{"system": "toy", "a": 0.0, "c_bar": 0.3}'
TOY_UNSTABLE = '{"system": "toy", "a": 0.8, "c_bar": -4.791287847477920}'
MHD = '{"system": "mhd", "rho": 1, "u": [0.1, 0.2, 1.5], "H": [0.3, 0.4, 0.8]}'


def _run(*args):
    return CliRunner().invoke(main, list(args))


def _json(res):
    return json.loads(res.stdout[res.stdout.index("{"):])


@pytest.mark.parametrize("desc", [TOY, MHD])
def test_check_passes(desc):
    res = _run("check", "--system", desc)
    assert res.exit_code == 0, res.output
    assert _json(res)["passed"]


def test_malformed_descriptor_is_input_error():
    assert _run("check", "--system", "{not json").exit_code == 2
    assert _run("check", "--system", '{"a": 1}').exit_code == 2
    assert _run("check", "--system", '{"system": "toy", "a": 2}').exit_code == 2


def test_characteristic_state_is_numeric_failure():
    desc = '{"system": "mhd", "rho": 1, "u": [0.1, 0.2, 0.0], "H": [0.3, 0.4, 0.8]}'
    assert _run("check", "--system", desc).exit_code == 3


def test_classify_reports(tmp_path):
    res = _run("classify", "--system", MHD, "--out", str(tmp_path))
    assert res.exit_code == 0
    data = json.loads((tmp_path / "classify.json").read_text())
    assert data["schema"] == 1 and sorted(r["m"] for r in data["roots"]) == [2, 2, 5]
    res = _run("classify", "--system", TOY)
    roots = _json(res)["roots"]
    assert roots[0]["glancing"] == "nonglancing_mixed" and roots[0]["decoupled"] is False
    assert _run("classify", "--system", TOY, "--xi", "1,2,3").exit_code == 2


def test_stable_scan(tmp_path):
    res = _run("scan", "--system", TOY_STABLE, "--grid", "n=32", "--out", str(tmp_path))
    assert res.exit_code == 0, res.output
    rows = read_scan_csv(tmp_path / "scan.csv")
    assert len(rows) == 32 and min(r["D"] for r in rows) > 0
    summ = json.loads((tmp_path / "summary.json").read_text())
    assert summ["low_freq_uniform"] and summ["diagnostics"]["lopatinski_homogeneity"] < 1e-9
    assert (tmp_path / "scan.svg").read_text().startswith("<svg")


def test_unstable_scan_exits_one(tmp_path):
    res = _run("scan", "--system", TOY_UNSTABLE, "--grid", "n=128,rmax=1", "--out", str(tmp_path))
    assert res.exit_code == 1
    assert json.loads((tmp_path / "summary.json").read_text())["zeros_confirmed"]


def test_scan_variants_and_bad_options(tmp_path):
    for v in ("lop", "red", "sc"):
        assert _run("scan", "--system", TOY_STABLE, "--grid", "n=16", "--variant", v,
                    "--out", str(tmp_path / v)).exit_code == 0
    assert _run("scan", "--system", TOY, "--variant", "bogus").exit_code == 2
    assert _run("scan", "--system", TOY, "--grid", "n=1").exit_code == 2
    assert _run("scan", "--system", TOY, "--tol", "threshold=abc").exit_code == 2


def test_profile_command(tmp_path):
    desc = '{"system": "toy", "a": 0.5, "c_bar": 0.5, "manifold_coords": [0.1]}'
    res = _run("profile", "--system", desc, "--out", str(tmp_path))
    assert res.exit_code == 0, res.output
    info = json.loads((tmp_path / "profile.json").read_text())
    assert not info["constant"] and info["transversality"]["transversal"]
    assert (tmp_path / "profile.csv").exists()


@pytest.mark.parametrize("name", ["toy-window", "eminus-limits", "toy-instability", "mhd-report"])
def test_demos(name, tmp_path):
    res = _run("demo", name, "--out", str(tmp_path))
    assert res.exit_code == 0, res.output

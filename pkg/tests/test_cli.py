import csv
import json

import numpy as np
import pytest

from gquasi.cli import TIMESTAMP_KEYS, RunConfig, main, resolve_potential, run
from gquasi.potentials import involution


def run_cli(tmp_path, *argv, name="report.json"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def strip_times(report):
    return {k: v for k, v in report.items() if k not in TIMESTAMP_KEYS}


@pytest.mark.parametrize("argv,code", [
    (["sl2-system", "--group", "sl", "--potential", "sl2:1,0,0,0,0", "--samples", "200"], 0),
    (["check-rankone", "--group", "so", "--n", "3", "--potential", "frobenius_sq"], 0),
    (["check-rankone", "--group", "gl", "--potential", "neg:frobenius_sq", "--samples", "50"], 1),
    (["probe-qc", "--group", "gl+", "--potential", "neg_log_abs_det", "--samples", "40"], 0),
    (["probe-qc", "--group", "gl", "--potential", "neg:frobenius_sq", "--samples", "20"], 1),
    (["check-affine", "--group", "gl", "--n", "3", "--potential", "det", "--samples", "200"], 0),
    (["check-ellipticity", "--potential", "frobenius_sq", "--samples", "100"], 0),
])
def test_exit_codes(tmp_path, argv, code):
    got, report = run_cli(tmp_path, *argv)
    assert got == code
    assert report["verdict"] in ("pass", "fail", "vacuous")
    assert (report["verdict"] == "fail") == (code == 1)


def test_vacuous_group_reports_vacuous(tmp_path):
    _, report = run_cli(tmp_path, "check-rankone", "--group", "so", "--n", "3",
                        "--potential", "frobenius_sq")
    assert report["verdict"] == "vacuous"
    assert report["result"]["samples_run"] == 0


@pytest.mark.parametrize("argv", [
    ["check-rankone", "--potential", "no_such_potential"],
    ["check-rankone", "--group", "sp", "--n", "3"],
    ["check-rankone", "--n", "7"],
    ["check-rankone", "--potential", "sl2:1,2"],
])
def test_bad_input_exits_with_two(tmp_path, argv, capsys):
    assert main(argv) == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_command_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "check-rankone", "group": "gl", "n": 3,
                               "potential": "frobenius_sq", "samples": 30}))
    code, report = run_cli(tmp_path, "--config", str(cfg), "--seed", "4")
    assert code == 0
    assert report["config"]["n"] == 3 and report["config"]["seed"] == 4
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"command": "check-rankone", "colour": "red"}))
    assert main(["--config", str(bad)]) == 2


def test_reports_are_deterministic(tmp_path):
    argv = ["probe-qc", "--group", "gl+", "--potential", "iso:log_sum_inv", "--samples", "30",
            "--seed", "9", "--dump-witnesses"]
    _, r1 = run_cli(tmp_path, *argv)
    _, r2 = run_cli(tmp_path, *argv)
    assert json.dumps(strip_times(r1), sort_keys=True) == json.dumps(strip_times(r2), sort_keys=True)
    assert set(r1) == {"command", "verdict", "config", "version", "result", *TIMESTAMP_KEYS}
    assert r1["version"].startswith("gquasi ")


def test_stdout_report(capsys):
    assert main(["check-rankone", "--potential", "det", "--samples", "20"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["config"]["potential_name"] == "det"
    assert report["config"]["fd_scheme"]["order"] == "central4"


def test_probe_field_dump_and_reload(tmp_path):
    field = tmp_path / "worst.json"
    code, report = run_cli(tmp_path, "probe-qc", "--group", "gl", "--potential", "neg:frobenius_sq",
                           "--samples", "20", "--dump-field", str(field))
    assert code == 1 and field.exists()
    worst = report["result"]["worst_margin"]
    cfg = RunConfig(command="probe-qc", group="gl", potential="neg:frobenius_sq",
                    options={"field": str(field)})
    code, again = run(cfg)
    assert code == 1
    assert again["result"]["gap"] == pytest.approx(worst, rel=1e-9, abs=1e-12)


def test_lsc_writes_csv(tmp_path):
    cfg = tmp_path / "lsc.json"
    cfg.write_text(json.dumps({"command": "lsc", "group": "gl+", "potential": "frobenius_sq",
                               "options": {"sequence": {"scales": [4, 8, 16]},
                                           "F0": [[1.0, 0.1], [0.0, 1.2]]}}))
    code, report = run_cli(tmp_path, "--config", str(cfg))
    assert code == 0
    rows = list(csv.reader(open(tmp_path / "report.csv")))
    assert [int(float(r[0])) for r in rows[1:]] == [4, 8, 16]
    assert report["result"]["verdict"] == "pass"


def test_lsc_rejects_unknown_generator(tmp_path):
    cfg = tmp_path / "lsc.json"
    cfg.write_text(json.dumps({"command": "lsc", "options": {"sequence": {"generator": "spiral"}}}))
    assert main(["--config", str(cfg)]) == 2


def test_transform_involution_and_conjugation():
    code, rep = run(RunConfig(command="transform", potential="neg_log_abs_det", samples=50,
                              options={"points": [[[2.0, 0.0], [0.0, 1.0]]]}))
    assert code == 0
    assert rep["result"]["max_roundtrip_error"] <= 1e-10
    w = resolve_potential("neg_log_abs_det")
    assert rep["result"]["values"][0] == pytest.approx(float(involution(w)(np.diag([2.0, 1.0]))))
    code, rep = run(RunConfig(command="transform", group="sl", potential="frobenius_sq",
                              options={"kind": "conjugate", "U": [[2.0, 0.0], [0.0, 0.5]]}))
    assert code == 0 and rep["result"]["kind"] == "conjugate"
    with pytest.raises(ValueError):
        run(RunConfig(command="transform", options={"kind": "twist"}))

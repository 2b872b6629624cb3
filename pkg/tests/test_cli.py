import csv
import json

import pytest

from rhpemm.cli import EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_VERIFY_FAILED, main


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    code = main(["solve", "--problem", "known_kkt", "--seed", "0", "--delta", "1e-6",
                 "--eps", "1e-6", "--out", str(out)])
    return code, out


def test_solve_converges_within_budget(solved):
    code, out = solved
    assert code == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] and report["termination"] in ("pointwise", "ergodic")
    assert report["iterations"]["total"] <= report["budgets"]["M"]
    rows = list(csv.DictReader((out / "trace.csv").open()))
    assert len(rows) == report["iterations"]["A"] + report["iterations"]["B"]


def test_report_numbers_are_full_precision(solved):
    report = json.loads((solved[1] / "report.json").read_text())
    assert report["lambda1"].count("e") == 1 and len(report["lambda1"].split("e")[0]) >= 19


def test_solve_is_deterministic(solved, tmp_path):
    main(["solve", "--problem", "known_kkt", "--seed", "0", "--delta", "1e-6",
          "--eps", "1e-6", "--out", str(tmp_path)])
    assert (tmp_path / "report.json").read_bytes() == (solved[1] / "report.json").read_bytes()


def test_iteration_cap_gives_partial_report(tmp_path):
    code = main(["solve", "--problem", "quad_softplus", "--params", '{"n": 3, "m": 2}',
                 "--max-iters", "2", "--out", str(tmp_path)])
    assert code == EXIT_NOT_CONVERGED
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["termination"] == "max_iters" and report["pointwise"] is not None


def test_problem_file_and_config_file(tmp_path):
    prob = tmp_path / "p.json"
    prob.write_text(json.dumps({"family": "known_kkt", "params": {"seed": 2}}))
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"delta": 1e-5, "eps": 1e-5}))
    assert main(["solve", "--problem", str(prob), "--config", str(cfg),
                 "--out", str(tmp_path / "o")]) == EXIT_OK


def test_malformed_problem_file(tmp_path, capsys):
    prob = tmp_path / "bad.json"
    prob.write_text('{"family": "known_kkt",\n "params": {"n": }}')
    assert main(["solve", "--problem", str(prob), "--out", str(tmp_path)]) == EXIT_ERROR
    assert "line 2" in capsys.readouterr().err


def test_problem_missing_field(tmp_path, capsys):
    prob = tmp_path / "p.json"
    prob.write_text(json.dumps({"params": {}}))
    assert main(["solve", "--problem", str(prob), "--out", str(tmp_path)]) == EXIT_ERROR
    assert "'family'" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    assert main(["solve", "--problem", "known_kkt", "--config", '{"gamma": 1}',
                 "--out", str(tmp_path)]) == EXIT_ERROR
    assert "gamma" in capsys.readouterr().err


def test_verify_round_trip(solved, capsys):
    assert main(["verify", str(solved[1] / "report.json")]) == EXIT_OK
    assert "pointwise: ok" in capsys.readouterr().out


def test_verify_perturbed_stationarity(solved, tmp_path, capsys):
    report = json.loads((solved[1] / "report.json").read_text())
    cert = report["pointwise"]
    cert["p"][0] = format(float(cert["p"][0]) + 1e-3, ".17e")
    path = tmp_path / "cert.json"
    path.write_text(json.dumps(cert))
    assert main(["verify", str(path), "--problem", "known_kkt", "--seed", "0"]) == EXIT_VERIFY_FAILED
    assert "stationarity" in capsys.readouterr().out


def test_verify_wrong_problem(solved):
    assert main(["verify", str(solved[1] / "report.json"), "--problem", "known_kkt",
                 "--seed", "1"]) == EXIT_VERIFY_FAILED


def test_bench_default_suite(tmp_path):
    assert main(["bench", "--out", str(tmp_path)]) == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "bench.csv").open()))
    assert len(rows) == 3
    for row in rows:
        assert row["converged"] == "True" and int(row["iterations"]) <= int(row["M"])


def test_bench_empty_suite(tmp_path):
    assert main(["bench", "--suite", "[]", "--out", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "bench.csv").read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("problem,")


def test_bench_registry_miss(tmp_path, capsys):
    assert main(["bench", "--suite", '["nope"]', "--out", str(tmp_path)]) == EXIT_ERROR
    assert "nope" in capsys.readouterr().err

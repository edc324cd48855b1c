import csv
import io
import json

import pytest

from wlanmatch.cli import main
from wlanmatch.config import fixture_path


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_two_user_fixture(capsys):
    code, out, _ = run(capsys, "run", "--scenario", str(fixture_path("two_users_three_aps")), "--trace")
    assert code == 0
    d = json.loads(out)
    assert d["unemployment_rate"] == 0.0
    assert d["trace"][0] == {"event": "propose", "round": 1, "iteration": 0, "user": "w1", "ap": "f1"}


def test_run_writes_file(tmp_path, capsys):
    out = tmp_path / "report.json"
    code, _, _ = run(capsys, "run", "--scenario", str(fixture_path("campus")), "--out", str(out))
    assert code == 0
    assert json.loads(out.read_text())["proposal_count"] > 0


def test_run_twice_identical(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"control": {"family": "gaussian", "sigma": 0.2}}))
    a = run(capsys, "run", "--scenario", str(fixture_path("campus")), "--config", str(cfg))[1]
    b = run(capsys, "run", "--scenario", str(fixture_path("campus")), "--config", str(cfg))[1]
    assert a == b


def test_generate_then_compare(tmp_path, capsys):
    sc = tmp_path / "sc.json"
    assert run(capsys, "generate", "--seed", "4", "--users", "6", "--aps", "2", "--area", "150",
               "--out", str(sc))[0] == 0
    code, out, _ = run(capsys, "compare", "--scenario", str(sc))
    assert code == 0
    d = json.loads(out)
    assert set(d) == {"bdaa", "best_rssi", "optimum", "warning"}
    assert d["optimum"] is not None


def test_generate_is_deterministic(capsys):
    a = run(capsys, "generate", "--seed", "1")[1]
    b = run(capsys, "generate", "--seed", "1")[1]
    assert a == b


def test_sweep_csv(capsys):
    code, out, _ = run(capsys, "sweep", "--runs", "3", "--users", "5", "--aps", "2", "--area", "120",
                       "--workers", "1")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 5


def test_sweep_warns_above_limit(capsys):
    code, _, err = run(capsys, "sweep", "--runs", "1", "--users", "13", "--aps", "2", "--area", "100",
                       "--format", "json")
    assert code == 0
    assert "warning" in err


def test_check_stability(capsys):
    code, out, _ = run(capsys, "check-stability", "--scenario", str(fixture_path("two_users_three_aps")))
    assert code == 0
    d = json.loads(out)
    assert d["core_member"] and d["weak_core_member"] and d["is_pairwise_stable"]


@pytest.mark.parametrize("argv", [
    ["run", "--scenario", "/nonexistent.json"],
    ["generate", "--area", "0"],
    ["sweep", "--runs", "0"],
    ["compare", "--scenario", "TWO"],
])
def test_errors_exit_nonzero(argv, capsys):
    argv = [str(fixture_path("two_users_three_aps")) if a == "TWO" else a for a in argv]
    code, _, err = run(capsys, *argv)
    assert code != 0
    assert err.startswith("error:")


def test_unknown_config_field(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"control": {"sigmaa": 1}}))
    code, _, err = run(capsys, "run", "--scenario", str(fixture_path("campus")), "--config", str(cfg))
    assert code == 2
    assert "sigmaa" in err

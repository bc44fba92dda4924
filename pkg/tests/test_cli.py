from __future__ import annotations
import json

import pytest

from modexp.channel import make_bsc, validate_channel, write_channel
from modexp.main import EXIT_BUDGET, EXIT_ERROR, EXIT_NONCONVERGENCE, EXIT_OK, main
from tests.conftest import BSC01_CAPACITY, LN2

FAST = ["--order-grid", "0.001:1000:40:log"]


@pytest.fixture()
def bsc_file(tmp_path):
    path = tmp_path / "bsc01.json"
    write_channel(make_bsc(0.1), path)
    return str(path)


def test_profile_json(bsc_file, capsys):
    assert main(["profile", "--channel", bsc_file, *FAST]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["capacity"] == pytest.approx(BSC01_CAPACITY, abs=1e-6)
    assert out["q"] == pytest.approx([0.5, 0.5])


def test_profile_in_bits(bsc_file, capsys):
    assert main(["profile", "--channel", bsc_file, "--bits", *FAST]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["capacity"] == pytest.approx(BSC01_CAPACITY / LN2, abs=1e-6)


def test_bounds_table(bsc_file, capsys):
    assert main(["bounds", "--channel", bsc_file, "--rho-grid", "0.1:10:5:log", *FAST]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "rho,lower,upper,rate,branch"
    assert len(lines) == 6
    for line in lines[1:]:
        _, lower, upper, _, _ = line.split(",")
        assert float(lower) <= float(upper) + 1e-9


def test_bounds_are_deterministic(bsc_file, tmp_path):
    outputs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        argv = ["bounds", "--channel", bsc_file, "--rho-grid", "0.5:5:3:log", "-o", str(path), *FAST]
        assert main(argv) == EXIT_OK
        outputs.append(path.read_text())
    assert outputs[0] == outputs[1]


def test_exponents_csv(bsc_file, capsys):
    argv = ["exponents", "--channel", bsc_file, "--rho-grid", "0.5:2:3:log", "--rate-points", "4", *FAST]
    assert main(argv) == EXIT_OK
    kinds = {line.rsplit(",", 1)[1] for line in capsys.readouterr().out.splitlines()[1:]}
    assert kinds == {"e0", "uce_e0", "e_sp", "e_r", "e_ex", "straight_line"}


def test_simulate_exact(bsc_file, capsys):
    argv = ["simulate", "--channel", bsc_file, "--rho", "1", "--rate", "0.7", "--n-list", "2,4",
            "--exact", "--seeds", "2", *FAST]
    assert main(argv) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n,moment,stderr,exact"
    assert [line.split(",")[0] for line in lines[1:]] == ["2", "4"]


def test_dpt_and_multidim(bsc_file, capsys):
    assert main(["dpt", "--channel", bsc_file, "--rho", "1", "--kmax", "2", "--starts", "2", *FAST]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["best_k"] == 2
    assert main(["multidim", "--channel", bsc_file, "--d", "2", "--rho-grid", "0.5:2:3:log", *FAST]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4 and lines[1].endswith(",multidim_d2")


def test_selftest_cli(capsys):
    assert main(["selftest", "--channels", "1", *FAST]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[-1] == "5/5 passed"


def test_error_exit_codes(bsc_file, tmp_path):
    assert main(["bounds", "--channel", bsc_file, "--rho-grid", "1:0:5"]) == EXIT_ERROR
    assert main(["profile", "--channel", str(tmp_path / "nope.json")]) == EXIT_ERROR
    assert main(["dpt", "--channel", bsc_file, *FAST]) == EXIT_ERROR
    assert main(["profile", *FAST]) == EXIT_ERROR


def test_budget_exit_code(bsc_file):
    argv = ["simulate", "--channel", bsc_file, "--rho", "1", "--rate", "1.0", "--n-list", "30", "--exact", *FAST]
    assert main(argv) == EXIT_BUDGET


def test_nonconvergence_exit_code(tmp_path, capsys):
    path = tmp_path / "skew.json"
    write_channel(validate_channel([[0.9, 0.1], [0.3, 0.7]]), path)
    argv = ["profile", "--channel", str(path), "--max-iters", "1", "--tolerance", "1e-15"]
    assert main(argv) == EXIT_NONCONVERGENCE
    err = capsys.readouterr().err
    assert '"diagnostics"' in err
    assert '"gap"' in err


def test_yaml_config(bsc_file, tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("rho-grid: 0.5:2:3:log\nformat: json\norder_grid: 0.001:1000:40:log\n")
    assert main(["bounds", "--config", str(cfg), "--channel", bsc_file]) == EXIT_OK
    rows = json.loads(capsys.readouterr().out)
    assert [r["rho"] for r in rows] == pytest.approx([0.5, 1.0, 2.0])


def test_config_rejects_unknown_keys(bsc_file, tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("bogus: 1\n")
    assert main(["profile", "--config", str(cfg), "--channel", bsc_file]) == EXIT_ERROR

from __future__ import annotations

import json
import subprocess
import sys

import pytest

from rmm_lab.cli import main
from rmm_lab.lending import read_surface_csv
from rmm_lab.vault import EpochReport


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr().out


def test_price_table_and_json(capsys):
    code, out = run(["price", "--S", "2000", "--K", "2000"], capsys)
    assert code == 0 and out.splitlines()[0].startswith("lpt_value")
    code, out = run(["price", "--S", "2000", "--K", "2000", "--k", "5", "--json"], capsys)
    values = {k: float(v) for k, v in json.loads(out).items()}
    assert values["lpt_value"] == pytest.approx(values["covered_call"] + 5.0)
    assert values["conc"] + values["conp"] == 1.0


def test_price_requires_strike(capsys):
    with pytest.raises(SystemExit) as info:
        main(["price", "--S", "1"])
    assert info.value.code == 2


def test_price_invalid_domain(capsys):
    assert main(["price", "--S", "-1", "--K", "1"]) == 2


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"S": 1500, "K": 2000, "sigma": 0.5}))
    _, from_cfg = run(["price", "--config", str(cfg), "--json"], capsys)
    _, flagged = run(["price", "--config", str(cfg), "--sigma", "0.85", "--json"], capsys)
    _, direct = run(["price", "--S", "1500", "--K", "2000", "--sigma", "0.85", "--json"], capsys)
    assert flagged == direct != from_cfg


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"S": 1, "K": 1, "strike": 3}))
    with pytest.raises(SystemExit) as info:
        main(["price", "--config", str(cfg)])
    assert info.value.code == 2


@pytest.mark.parametrize("name", ["long-call", "long-put", "split-binaries", "short-binary", "straddle", "future"])
def test_construct(name, capsys, tmp_path):
    code, out = run(["construct", name, "--grid", "5", "--out", str(tmp_path)], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["construction"] == name and len(report["payoff_table"]) == 5
    assert (tmp_path / f"construct_{name}.json").read_text() == out


def test_construct_long_call_payoff_is_call(capsys):
    _, out = run(["construct", "long-call", "--grid", "3", "--grid-lo", "0.5", "--grid-hi", "2"], capsys)
    rows = json.loads(out)["payoff_table"]
    assert [float(r["net"]) for r in rows] == pytest.approx([0.0, 1 - 1 / 1.25, 0.5], abs=1e-12)


def test_construct_future_is_one_unit(capsys):
    _, out = run(["construct", "future", "--grid", "4"], capsys)
    report = json.loads(out)
    assert float(report["future"]["net_cost"]) == pytest.approx(1.0, abs=1e-12)


def test_construct_bad_grid(capsys):
    with pytest.raises(SystemExit) as info:
        main(["construct", "future", "--grid", "1"])
    assert info.value.code == 2


def test_hedge_surface(tmp_path, capsys):
    code, out = run(["hedge-surface", "--points", "50", "--out", str(tmp_path)], capsys)
    assert code == 0
    summary = json.loads(out)
    assert [row["strike"] for row in summary["put"]] == ["0.7", "0.8", "0.9", "1.0"]
    for name in ("alpha_curve", "beta_curve", "alpha_surface", "beta_surface"):
        table = read_surface_csv(tmp_path / f"{name}.csv")
        assert table.shape[0] == (50 if "curve" in name else 200)
    alpha = read_surface_csv(tmp_path / "alpha_curve.csv")
    assert (alpha[:, 0] < 1).all() and (alpha[:, 2] <= 1).all()


def test_hedge_surface_points_validation(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["hedge-surface", "--points", "1", "--out", str(tmp_path)])
    assert info.value.code == 2


def test_simulate_vault(capsys, tmp_path):
    argv = ["simulate-vault", "--n-seeds", "3", "--steps", "32", "--seed", "10", "--out", str(tmp_path)]
    code, out = run(argv, capsys)
    assert code == 0
    lines = out.splitlines()
    reports = [EpochReport.from_json(line) for line in lines[:3]]
    assert [r.seed for r in reports] == [10, 11, 12]
    summary = json.loads(lines[3])["summary"]
    assert summary["seeds"] == 3 and len(summary["rollover"]) == 3
    _, again = run(argv + ["--jobs", "2"], capsys)
    assert again == out


def test_simulate_vault_horizon_conflict():
    with pytest.raises(SystemExit) as info:
        main(["simulate-vault", "--horizon", "1.0", "--T", "0.5"])
    assert info.value.code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "rmm_lab", "price", "--S", "1", "--K", "1", "--json"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "covered_call" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "rmm_lab", "price"], capture_output=True, text=True, check=False)
    assert proc.returncode == 2


def test_runtime_failure_exit_code(capsys):
    assert main(["construct", "straddle", "--k", "3000"]) == 1
    assert "non-positive" in capsys.readouterr().err

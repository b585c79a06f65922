"""CLI tests: exit codes, outputs on disk, template bundle integrity."""

import csv
import json
import subprocess
import sys

import pytest

from relayrace.cli import EXIT_INVALID, EXIT_NO_QUIESCENCE, EXIT_OK, TEMPLATES, main


def test_list_templates_names_exactly_eight(capsys):
    assert main(["list-templates"]) == EXIT_OK
    lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
    assert len(lines) == 8
    names = {line.split()[0] for line in lines}
    assert names == set(TEMPLATES)


def test_every_template_validates_cleanly(capsys):
    for name in TEMPLATES:
        assert main(["validate", name]) == EXIT_OK, name


def test_every_template_runs_to_exit_zero(tmp_path):
    for name in TEMPLATES:
        out = tmp_path / name
        code = main(["run", name, "--out", str(out), "--no-figures"])
        assert code == EXIT_OK, name
        for filename in ("claims.csv", "events.csv", "balances.csv", "latency.csv",
                         "summary.json"):
            assert (out / filename).exists(), (name, filename)


def test_run_line3_claims_csv_has_three_forwarder_claims(tmp_path):
    out = tmp_path / "line3"
    assert main(["run", "double_incentive_line3", "--out", str(out), "--no-figures"]) == EXIT_OK
    with open(out / "claims.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    accepted = [r for r in rows if r["result"] == "accepted"]
    assert [(r["block_index"], r["claimant"]) for r in accepted] == [
        ("0", "f1"), ("1", "f2"), ("2", "f3"),
    ]


def test_run_renders_figures_by_default(tmp_path):
    out = tmp_path / "figs"
    assert main(["run", "cracker_race_sweep", "--out", str(out)]) == EXIT_OK
    figures = sorted(p.name for p in (out / "figures").glob("*.png"))
    assert "claims.png" in figures and "latency.png" in figures


def test_malformed_scenario_exits_2_and_names_the_field(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(
        """
        [scenario]
        name = "bad"
        [[nodes]]
        id = "a"
        role = "sender"
        [[links]]
        a = "a"
        b = "missing-node"
        kind = "isp_backhaul"
        bandwidth = 1000
        propagation_delay = 0.001
        """
    )
    assert main(["run", str(bad), "--out", str(tmp_path / "out")]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert "missing-node" in err and "links[0]" in err


def test_validate_lists_every_violation(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(
        """
        [scenario]
        name = "bad"
        [[nodes]]
        id = "x"
        role = "cracker"
        [[chains]]
        id = "c0"
        iterations = 0
        values = []
        """
    )
    assert main(["validate", str(bad)]) == EXIT_INVALID
    out = capsys.readouterr().out
    assert "hash_rate" in out
    assert "iterations" in out
    assert "values" in out


def test_unknown_scenario_argument_exits_2(capsys):
    assert main(["validate", "no-such-file.toml"]) == EXIT_INVALID


def test_seed_override_is_recorded_in_summary(tmp_path):
    out = tmp_path / "seeded"
    assert main(["run", "isp_vs_edge", "--seed", "777", "--out", str(out),
                 "--no-figures"]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 777


def test_horizon_override_can_force_exit_3_with_partial_outputs(tmp_path):
    out = tmp_path / "cut"
    code = main(["run", "double_incentive_withholding", "--horizon", "0.001",
                 "--out", str(out), "--no-figures"])
    assert code == EXIT_NO_QUIESCENCE
    assert (out / "claims.csv").exists()  # partial outputs still flushed
    summary = json.loads((out / "summary.json").read_text())
    assert summary["quiescent"] is False


def test_concurrent_seeds_flag_isolates_runs(tmp_path):
    out = tmp_path / "multi"
    code = main(["run", "isp_vs_edge", "--seeds", "1,2", "--out", str(out), "--no-figures"])
    assert code == EXIT_OK
    assert (out / "seed-1" / "summary.json").exists()
    assert (out / "seed-2" / "summary.json").exists()
    assert json.loads((out / "seed-1" / "summary.json").read_text())["seed"] == 1


def test_console_entry_point_runs():
    result = subprocess.run(
        [sys.executable, "-m", "relayrace.cli", "list-templates"],
        capture_output=True, text=True,
    )
    assert result.returncode == 0
    assert "double_incentive_line3" in result.stdout

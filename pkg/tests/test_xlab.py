"""Command-line harness: exit codes, CSV determinism, config handling,
and the SVG round trip."""

import subprocess
import sys

import numpy as np
import pytest

from cwlab import cli
from cwlab.config import as_float, as_int, dump_config, parse_config
from cwlab.errors import CsvParseError, DomainError
from cwlab.experiments import (
    CSV_HEADER, ExperimentSpec, load_expected, run_experiment, write_csv,
)
from cwlab.plotsvg import parse_embedded, read_rows


def run(*argv):
    return cli.main(list(argv))


def test_console_script_installed():
    out = subprocess.run(["xlab", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "experiment" in out.stdout


def test_no_command_is_usage_error(capsys):
    assert run() == 2


def test_dump_config(capsys):
    assert run("--dump-config") == 0
    text = capsys.readouterr().out
    values = parse_config(text)
    assert as_int(values, "n", -1) == 100
    assert as_float(values, "beta", -1.0) == 1.2


def test_spectrum_command(capsys):
    assert run("spectrum", "--n", "100") == 0
    out = capsys.readouterr().out
    assert "b_n =" in out


def test_spectrum_rejects_subcritical(capsys):
    assert run("spectrum", "--n", "100", "--beta", "0.8") == 2


def test_evolve_and_simulate(tmp_path, capsys):
    out = tmp_path / "law.txt"
    assert run("evolve", "--n", "100", "--m0", "0.9", "--t", "1.0",
               "--out", str(out)) == 0
    assert out.exists()
    assert run("simulate", "--n", "50", "--m0", "0.48", "--t", "0.5",
               "--replicas", "50") == 0
    txt = capsys.readouterr().out
    assert "empirical mean" in txt


def test_ode_command(capsys):
    assert run("ode", "--m0", "0.2", "--t", "5.0") == 0
    assert run("ode", "--n", "100", "--m0", "0.0", "--t", "5.0",
               "--modified") == 0


def test_ode_step_failure_exit_code(capsys):
    assert run("ode", "--m0", "0.2", "--t", "4.0", "--step", "0.5") == 3


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfgf = tmp_path / "lab.cfg"
    cfgf.write_text("n = 40\nbeta = 1.3\n")
    assert run("spectrum", "--config", str(cfgf), "--n", "60") == 0
    out = capsys.readouterr().out
    assert "n = 60" in out            # flag wins
    assert "beta = 1.3" in out        # file fills the rest


def test_config_parse_errors(tmp_path):
    with pytest.raises(CsvParseError):
        parse_config("this line has no equals sign")
    bad = tmp_path / "bad.cfg"
    bad.write_text("n 40\n")
    assert run("spectrum", "--config", str(bad)) == 2
    assert run("spectrum", "--config", str(tmp_path / "missing.cfg")) == 2


def test_config_round_trip():
    values = {"b": "2", "a": "1.5", "name": "x"}
    assert parse_config(dump_config(values)) == values


def test_experiment_unknown_override(capsys):
    assert run("experiment", "bn-scaling", "--set", "bogus=1") == 2


def test_experiment_spec_validation():
    with pytest.raises(DomainError):
        ExperimentSpec(name="not-an-experiment")
    with pytest.raises(DomainError):
        ExperimentSpec(name="bn-scaling", params={"replicas": "many"})


def test_experiment_cli_writes_artifacts(tmp_path, capsys):
    code = run("experiment", "bn-scaling", "--out", str(tmp_path),
               "--set", "n_list=50 100 200")
    assert code == 0
    csv = tmp_path / "bn-scaling" / "bn-scaling.csv"
    assert csv.exists()
    assert (tmp_path / "bn-scaling" / "summary.txt").exists()
    first = csv.read_text().splitlines()[0]
    assert first == CSV_HEADER


def test_experiment_csv_byte_identical(tmp_path):
    expected = load_expected()
    outs = []
    for tag in ("a", "b"):
        spec = ExperimentSpec("bn-scaling", {"n_list": "50 100"},
                              out_dir=str(tmp_path / tag))
        run_experiment(spec, expected)
        outs.append((tmp_path / tag / "bn-scaling.csv").read_bytes())
    assert outs[0] == outs[1]


def test_csv_reader_and_plot_round_trip(tmp_path):
    rows = [
        {"experiment": "demo", "n": 100, "beta": 1.2, "epsilon": 0.1,
         "t": float(t), "quantity": "value_of_interest",
         "value": float(np.exp(-t)), "stderr": 0.0}
        for t in (1.0, 2.0, 4.0, 8.0)
    ]
    csv = tmp_path / "demo.csv"
    write_csv(rows, csv)
    parsed = read_rows(csv)
    assert len(parsed) == 4
    assert parsed[0]["quantity"] == "value_of_interest"
    assert float(parsed[2]["value"]) == pytest.approx(np.exp(-4.0))

    svg = tmp_path / "demo.svg"
    assert run("plot", str(csv), str(svg), "--logy") == 0
    text = svg.read_text()
    assert text.startswith("<svg") or "<svg" in text
    # The rendered file embeds its own data and reproduces the CSV rows.
    back = parse_embedded(svg)
    assert back == parsed


def test_csv_reader_rejects_malformed(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text(CSV_HEADER + "\ndemo,100,1.2,0.1,1.0,q,not_a_number,0\n")
    with pytest.raises(CsvParseError) as err:
        read_rows(bad)
    assert err.value.line_number == 2
    worse = tmp_path / "worse.csv"
    worse.write_text("wrong,header\n")
    with pytest.raises(CsvParseError):
        read_rows(worse)


def test_plot_missing_file_exit_code(tmp_path, capsys):
    assert run("plot", str(tmp_path / "nope.csv"), str(tmp_path / "o.svg")) == 2

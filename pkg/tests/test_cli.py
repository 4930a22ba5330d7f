"""Tests for the command-line interface."""

import json

import pytest
from click.testing import CliRunner

from addtwist import __version__
from addtwist.cli import cli
from addtwist.report import Report


@pytest.fixture
def runner():
    return CliRunner()


def test_version(runner):
    """Test the version command."""
    result = runner.invoke(cli, ["version"])

    assert result.exit_code == 0
    assert f"addtwist version {__version__}" in result.output


def test_sums_passes(runner):
    """Test the character and Kloosterman checks on small ranges."""
    result = runner.invoke(cli, ["sums", "--r-max", "12", "--c-max", "30", "--mn-max", "4"])

    assert result.exit_code == 0, result.output
    lines = result.output.strip().splitlines()
    assert lines[0] == "check,cases,worst,tolerance,passed"
    assert len(lines) == 5
    assert all(line.endswith(",true") for line in lines[1:])


@pytest.mark.slow
def test_sums_default_ranges(runner):
    """Test the character and Kloosterman checks over their default ranges."""
    result = runner.invoke(cli, ["sums"])

    assert result.exit_code == 0, result.output
    assert all(line.endswith(",true") for line in result.output.strip().splitlines()[1:])


def test_hecke_json(runner):
    """Test the Hecke command with JSON output."""
    result = runner.invoke(cli, ["hecke", "--N", "2000", "--format", "json"])

    assert result.exit_code == 0, result.output
    data = json.loads(result.output)
    assert data["name"] == "hecke"
    assert data["metadata"]["level"] == 11
    assert all(row[2] == 0 for row in data["rows"])


def test_verify_fe_writes_report(runner, tmp_path):
    """Test the functional equation sweep writing to a file."""
    out = tmp_path / "fe.csv"
    result = runner.invoke(cli, ["verify-fe", "--d-max", "2", "--s-list", "1.0", "--out", str(out)])

    assert result.exit_code == 0, result.output
    report = Report.load(str(out))
    assert len(report) == 2
    assert max(report.column("abs_diff")) < 1e-6


def test_verify_fe_reports_failures(runner):
    """Test exit status 1 when no row can meet the tolerance."""
    result = runner.invoke(cli, ["verify-fe", "--d-max", "1", "--s-list", "1.0", "--tol", "1e-300"])

    assert result.exit_code == 1
    assert "exceed tolerance" in result.output


def test_verify_fe_rejects_corrupted_file(runner, coeff_file, f11):
    """Test that a coefficient file violating the Hecke relations is refused."""
    values = list(f11.series(200).a[1:])
    values[5] += 1
    path = coeff_file(values, label="broken")

    result = runner.invoke(cli, ["verify-fe", "--form", f"file:{path}", "--d-max", "1"])

    assert result.exit_code == 2
    assert "Error: Hecke check failed for broken" in result.output
    assert "coprime" in result.output


def test_malformed_character_header(runner, tmp_path):
    """Test that a bad character line in a coefficient file exits with status 2."""
    path = tmp_path / "bad.txt"
    path.write_text("# newform bad\nlevel 11\nweight 2\ncharacter 3\ncoeffs\n1 1\n2 -2\n", encoding="utf-8")

    result = runner.invoke(cli, ["hecke", "--form", f"file:{path}"])

    assert result.exit_code == 2
    assert "Error:" in result.output
    assert "line 4" in result.output


def test_unknown_form(runner):
    """Test that an unknown bundled form is reported as an error."""
    result = runner.invoke(cli, ["hecke", "--form", "bundled:37a"])

    assert result.exit_code == 2
    assert "Error:" in result.output


def test_converge_rejects_empty_list(runner):
    """Test that an empty M-list is a usage error."""
    result = runner.invoke(cli, ["converge", "--x", "1/2", "--M-list", ""])

    assert result.exit_code == 2
    assert "must not be empty" in result.output


def test_converge_accepts_fractions(runner):
    """Test that x = 1/2 and x = 0.5 give the same table."""
    args = ["--M-list", "2,4,8", "--limit-terms", "1000"]
    half = runner.invoke(cli, ["converge", "--x", "1/2", *args])
    decimal = runner.invoke(cli, ["converge", "--x", "0.5", *args])

    assert half.exit_code == 0, half.output
    assert half.output == decimal.output
    assert len(half.output.strip().splitlines()) == 4


def test_converge_single_modulus(runner):
    """Test --M with the limit series metadata in the JSON report."""
    result = runner.invoke(
        cli, ["converge", "--x", "1/3", "--M", "8", "--limit-terms", "1000", "--format", "json"]
    )

    assert result.exit_code == 0, result.output
    data = json.loads(result.output)
    assert len(data["rows"]) == 1
    assert data["rows"][0][0] == 8
    assert data["metadata"]["limit_terms"] == 1000
    assert data["metadata"]["limit_tail_minus"] == pytest.approx(2 * data["metadata"]["limit_tail_plus"])


def test_converge_needs_exactly_one_modulus_option(runner):
    """Test that --M and --M-list are exclusive and that one of them is required."""
    both = runner.invoke(cli, ["converge", "--x", "1/2", "--M", "8", "--M-list", "2,4"])
    assert both.exit_code == 2
    assert "not both" in both.output

    neither = runner.invoke(cli, ["converge", "--x", "1/2", "--limit-terms", "100"])
    assert neither.exit_code == 2
    assert "Error: a modulus M or an M-list is required" in neither.output


def test_tolerance_from_environment(runner):
    """Test that ADDTWIST_TOL sets the default tolerance and --tol overrides it."""
    args = ["verify-fe", "--d-max", "1", "--s-list", "1.0"]
    strict = runner.invoke(cli, args, env={"ADDTWIST_TOL": "1e-300"})
    assert strict.exit_code == 1
    assert "exceed tolerance 1e-300" in strict.output

    relaxed = runner.invoke(cli, [*args, "--tol", "1e-6"], env={"ADDTWIST_TOL": "1e-300"})
    assert relaxed.exit_code == 0, relaxed.output


def test_modsym(runner, tmp_path):
    """Test the symbol table and the bound report."""
    bounds = tmp_path / "bounds.json"
    result = runner.invoke(cli, ["modsym", "--d-max", "4", "--bounds-out", str(bounds), "--format", "json"])

    assert result.exit_code == 0, result.output
    assert "shape ratio" in result.output
    assert len(Report.load(str(bounds))) == 4


def test_atkin_lehner(runner):
    """Test W_11 on the level-11 form."""
    result = runner.invoke(cli, ["al", "--R", "11", "--M-out", "10"])

    assert result.exit_code == 0, result.output
    (line,) = [line for line in result.output.splitlines() if line.startswith("b(1) =")]
    assert float(line.split()[2]) == pytest.approx(-1, abs=1e-6)


def test_atkin_lehner_bad_divisor(runner):
    """Test that a divisor that is not exact is rejected."""
    result = runner.invoke(cli, ["al", "--form", "27a", "--R", "3"])

    assert result.exit_code == 2
    assert "exact divisor" in result.output

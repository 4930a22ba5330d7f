"""Tests for coefficient sources, files, Hecke checks and evaluation."""

import json

import numpy as np
import pytest

from addtwist.arith import divisor_counts
from addtwist.errors import DataError, DomainError, SpecError, TruncationError
from addtwist.forms import (
    EtaForm,
    bundled_form,
    divisor_bound_constant,
    eta_quotient_coeffs,
    evaluate_form,
    evaluate_many,
    load_coeffs,
    parse_eta_spec,
    parse_form,
    required_terms,
    tail_bound,
    verify_hecke,
)

A11 = [1, -2, -1, 2, 1, 2, -2, 0, -2, -2, 1, -2, 4]
A27 = [1, 0, 0, -2, 0, 0, -1, 0, 0, 0, 0, 0, 5, 0, 0, 4, 0, 0, -7]


def test_parse_eta_spec():
    """Test parsing of eta quotient specs."""
    spec = parse_eta_spec("1^2,11^2@11")
    assert spec.components == ((1, 2), (11, 2))
    assert spec.level == 11
    assert spec.weight == 2
    assert spec.offset == 1
    assert str(spec) == "1^2,11^2@11"


@pytest.mark.parametrize("text", ["1^2,11^2", "1^2,11^x@11", "1^3@11", "1^2,11^2@10", "1^-2,11^4@11"])
def test_parse_eta_spec_errors(text):
    """Test that malformed or non-cuspidal specs are rejected."""
    with pytest.raises(SpecError):
        parse_eta_spec(text)


def test_level_11_coefficients(f11):
    """Test the first coefficients of the level-11 form."""
    assert list(f11.series(13).a[1:]) == A11


def test_level_27_coefficients(f27):
    """Test the first coefficients of the level-27 form."""
    assert list(f27.series(19).a[1:]) == A27


def test_ramanujan_delta():
    """Test tau(n) from eta(z)^24."""
    series = eta_quotient_coeffs(parse_eta_spec("1^24@1"), 5)
    assert series.weight == 12
    assert list(series.a[1:]) == [1, -24, 252, -1472, 4830]


def test_eta_form_extends_and_caps():
    """Test that EtaForm extends its cache and honours max_terms."""
    form = EtaForm(parse_eta_spec("1^2,11^2@11"), label="11a", max_terms=500)
    short = form.series(10)
    longer = form.series(300)
    assert list(longer.a[:11]) == list(short.a)
    with pytest.raises(TruncationError) as info:
        form.series(501)
    assert info.value.required == 501


def test_hecke_relations(f11, f27):
    """Test the Hecke relations and the Deligne bound for both bundled eta quotients."""
    for form in (f11, f27):
        report = verify_hecke(form.series(10_000))
        assert report.ok, report.summary()
    report = verify_hecke(f27.series(2000))
    assert report.checks["square_vanishing"].passed == 1
    assert all(f27.series(3**6).a[3**j] == 0 for j in range(1, 7))


def test_bundled_twist_matches_27a(f27, f27_chi3):
    """Test that the stored twist data equals the level-27 form, as 27a has CM by Q(sqrt(-3))."""
    assert f27_chi3.length == 1000
    assert f27_chi3.level == 27
    assert f27_chi3.nebentypus().modulus == 1
    assert np.array_equal(f27_chi3.a, f27.series(1000).a)


def test_load_text_file(coeff_file):
    """Test loading the text format."""
    path = coeff_file(A11, label="11a")
    series = load_coeffs(path)
    assert series.label == "11a"
    assert series.level == 11
    assert series.exact
    assert list(series.a[1:]) == A11
    with pytest.raises(TruncationError):
        series.series(20)


def test_load_float_file(coeff_file):
    """Test that non-integral coefficients load as floats."""
    series = load_coeffs(coeff_file([1.0, -2.5, 0.25]))
    assert not series.exact
    assert series.a[2] == -2.5


def test_load_json_file(tmp_path):
    """Test loading the JSON format."""
    path = tmp_path / "form.json"
    path.write_text(json.dumps({"label": "11a", "level": 11, "weight": 2, "coeffs": A11}), encoding="utf-8")
    series = load_coeffs(path, fmt="auto")
    assert list(series.a[1:]) == A11


def test_load_errors(coeff_file, tmp_path):
    """Test DataError on missing files, gaps and malformed headers."""
    with pytest.raises(DataError):
        load_coeffs(tmp_path / "missing.txt")

    path = tmp_path / "gap.txt"
    path.write_text("# newform x\nlevel 11\nweight 2\ncoeffs\n1 1\n3 -1\n", encoding="utf-8")
    with pytest.raises(DataError) as info:
        load_coeffs(path)
    assert info.value.line == 6

    path = tmp_path / "header.txt"
    path.write_text("# newform x\nlevel 11\ncolour red\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_coeffs(path)

    path = tmp_path / "character.txt"
    path.write_text("# newform x\nlevel 11\nweight 2\ncharacter three\ncoeffs\n1 1\n", encoding="utf-8")
    with pytest.raises(DataError) as info:
        load_coeffs(path)
    assert info.value.line == 4


def test_corrupted_file_fails_hecke(coeff_file, f11):
    """Test that a single wrong coefficient breaks the Hecke relations."""
    values = list(f11.series(200).a[1:])
    values[5] += 1  # a(6)
    series = load_coeffs(coeff_file(values))
    report = verify_hecke(series)
    assert not report.ok
    assert "coprime" in report.failed_relations()


def test_parse_form(coeff_file):
    """Test the form source grammar."""
    assert parse_form("bundled:11a").label == "11a"
    assert parse_form("27a").level == 27
    assert parse_form("eta:3^2,9^2@27").level == 27
    assert parse_form(f"file:{coeff_file(A11)}").length == len(A11)
    with pytest.raises(SpecError):
        parse_form("bundled:37a")
    with pytest.raises(SpecError):
        parse_form("lmfdb:11.2.a.a")
    assert bundled_form("27a_chi3").length == 1000


def test_divisor_bound_constant():
    """Test sigma_0(n) <= C n^eps."""
    for eps in (0.25, 0.5):
        const = divisor_bound_constant(eps)
        n = np.arange(1, 20_001)
        assert np.all(divisor_counts(20_000)[1:] <= const * n**eps * (1 + 1e-12))
    with pytest.raises(DomainError):
        divisor_bound_constant(0)


def test_required_terms():
    """Test that the truncation meets the tail bound and is minimal."""
    for y in (0.01, 0.1, 1.0):
        N = required_terms(y, 2, 1e-12)
        assert tail_bound(N, y, 2) < 1e-12
        assert N == 1 or tail_bound(N - 1, y, 2) >= 1e-12
    with pytest.raises(DomainError):
        required_terms(0.0, 2, 1e-12)


def test_atkin_lehner_symmetry_of_values(f11):
    """Test f(i/(11y)) = 11 y^2 f(iy), the W_11 eigenvalue -1 of the level-11 form."""
    for y in (0.2, 0.35):
        left, _ = evaluate_form(f11, 1j / (11 * y))
        right, _ = evaluate_form(f11, 1j * y)
        assert abs(left - 11 * y**2 * right) < 1e-10


def test_evaluate_many_matches_single(f11):
    """Test the vectorized evaluation against single points."""
    zs = np.array([0.1 + 0.05j, 0.3 + 0.2j, -0.4 + 1.0j])
    values, bounds = evaluate_many(f11, zs)
    for z, value, bound in zip(zs, values, bounds):
        single, _ = evaluate_form(f11, z)
        assert abs(value - single) < 1e-11
        assert bound < 1e-12
    with pytest.raises(DomainError):
        evaluate_form(f11, 0.5 - 0.1j)

"""Tests for additive twists, the functional equation and the approximate functional equation."""

import math

import numpy as np
import pytest

from addtwist.errors import DependencyError, DomainError
from addtwist.ltwist import (
    SymbolTable,
    additive_twist,
    approx_L1,
    bound_shape,
    fe_lhs,
    fe_sweep,
    fe_terms,
    functional_equation_rhs,
    lambda_direct,
    modsym_bound_report,
    modular_symbol,
    symbol_rows,
)
from addtwist.special import SmoothingKernel

L1_11A = 0.25384186085591068


@pytest.fixture(scope="module")
def table11(f11):
    return SymbolTable(f11)


def test_additive_twist_reduces():
    """Test reduction of the numerator and the CRT residues."""
    assert additive_twist(11, -1, 5).a == 4
    for a in (1, 5, 7, 11):
        tw = additive_twist(27, a, 12)
        split = tw.split
        assert (split.M_d, split.r_d) == (4, 3)
        assert (tw.a1 * split.r_d + tw.a2 * split.M_d) % 12 == a


def test_additive_twist_errors():
    """Test that unreduced fractions and bad denominators are rejected."""
    with pytest.raises(DomainError):
        additive_twist(11, 2, 4)
    with pytest.raises(DomainError):
        additive_twist(11, 1, 0)


def test_dual_point():
    """Test beta = -(R' a1)^-1 / M_d mod 1."""
    tw = additive_twist(11, 2, 5)
    assert tw.dual_numerator == 2
    assert tw.beta == pytest.approx(0.4)
    assert additive_twist(11, 0, 1).beta == 0


def test_fe_terms_level_11():
    """Test the single weight -1 for denominators prime to 11."""
    for a, d in ((0, 1), (1, 2), (2, 5)):
        (term,) = fe_terms(additive_twist(11, a, d))
        assert term.key == (1, 0)
        assert term.weight == pytest.approx(-1)


def test_central_value_level_11(f11):
    """Test L(1, f) for the level-11 form."""
    value = approx_L1(f11, additive_twist(11, 0, 1))
    assert abs(value - L1_11A) < 1e-9


def test_balance_parameter_is_irrelevant(f11):
    """Test that the approximate functional equation does not depend on X."""
    tw = additive_twist(11, 2, 5)
    reference = approx_L1(f11, tw, X=1.0)
    for X in (0.5, 2.0):
        assert abs(approx_L1(f11, tw, X=X) - reference) < 1e-9
    with pytest.raises(DomainError):
        approx_L1(f11, tw, X=0)


def test_afe_matches_quadrature(f11):
    """Test L(1, f, a/d) = 2 pi Lambda(1, f, a/d) against direct quadrature."""
    tw = additive_twist(11, 2, 5)
    assert abs(approx_L1(f11, tw) - 2 * math.pi * lambda_direct(f11, 1.0, tw)) < 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("a, d", [(1, 3), (2, 9), (5, 12), (1, 6), (3, 10)])
def test_afe_matches_quadrature_level_27(f27, a, d):
    """Test L(1, f, a/d) against direct quadrature for the level-27 form."""
    tw = additive_twist(27, a, d)
    assert abs(approx_L1(f27, tw) - 2 * math.pi * lambda_direct(f27, 1.0, tw)) < 1e-6


def test_direct_quadrature_domain(f11):
    """Test that Re s <= 0 is rejected by the quadrature."""
    with pytest.raises(DomainError):
        lambda_direct(f11, 0.0, additive_twist(11, 1, 3))


def test_functional_equation_level_11(f11):
    """Test both sides of the functional equation for small denominators."""
    for a, d in ((0, 1), (1, 2), (1, 3), (2, 3)):
        tw = additive_twist(11, a, d)
        s = np.array([0.7, 1.0, 1.3])
        lhs = fe_lhs(f11, s, tw)
        rhs = functional_equation_rhs(f11, s, tw)
        assert np.max(np.abs(lhs - rhs)) < 1e-6, (a, d)


def test_functional_equation_scalar(f11):
    """Test that a scalar s gives a scalar result."""
    value = functional_equation_rhs(f11, 1.0, additive_twist(11, 1, 4))
    assert isinstance(value, complex)


def test_missing_contragredient(f11):
    """Test DependencyError when a dual series is absent."""
    with pytest.raises(DependencyError):
        functional_equation_rhs(f11, 1.0, additive_twist(11, 1, 3), contragredients={})


def test_fe_sweep_report(f11):
    """Test the sweep report over d <= 3."""
    report = fe_sweep(f11, 3, s_list=(0.7, 1.3), tol=1e-6)
    assert len(report) == (1 + 1 + 2) * 2
    assert report.columns == ["d", "a", "s", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "abs_diff"]
    assert report.get_metadata("failures") == 0
    assert report.get_metadata("max_abs_diff") < 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("form", ["f11", "f27"])
def test_fe_sweep_slow(request, form):
    """Test the functional equation for every reduced a/d with d <= 12."""
    f = request.getfixturevalue(form)
    report = fe_sweep(f, 12, s_list=(0.7, 1.0, 1.3), tol=1e-6)
    assert report.get_metadata("failures") == 0


def test_symbol_conjugate_symmetry(table11):
    """Test L(1, f, -a/d) = conj L(1, f, a/d) for real coefficients."""
    for d in (5, 7, 12):
        for a in range(1, d):
            if math.gcd(a, d) == 1:
                assert abs(table11.L(d - a, d) - np.conj(table11.L(a, d))) < 1e-9


def test_symbols_small_denominators(table11):
    """Test that the minus part vanishes for d <= 2."""
    for a, d in ((0, 1), (1, 2)):
        pair = table11.symbol(a, d)
        assert pair.minus == 0
    assert table11.symbol(0, 1).plus == pytest.approx(L1_11A, abs=1e-9)


@pytest.mark.parametrize("p", [2, 3, 5, 7, 11])
def test_hecke_sum_over_numerators(table11, f11, p):
    """Test sum_(a mod p) L(1, f, a/p) = (a(p) - 1) L(1, f), or a(p) L(1, f) when p divides the level."""
    ap = int(f11.series(p).a[p])
    values = table11.values(p)
    total = L1_11A + sum(values[a] for a in range(1, p))
    expected = ap * L1_11A if 11 % p == 0 else (ap - 1) * L1_11A
    assert abs(total - expected) < 1e-8


def test_table_matches_single_symbol(table11, f11):
    """Test the batched table against one-off evaluation."""
    for a, d in ((1, 7), (5, 12), (3, 22)):
        pair = modular_symbol(f11, a, d)
        expected = table11.symbol(a, d)
        assert pair.plus == pytest.approx(expected.plus, abs=1e-9)
        assert pair.minus_im == pytest.approx(expected.minus_im, abs=1e-9)


def test_table_reduces_fractions(table11):
    """Test that L(1, f, 2/10) is looked up as 1/5."""
    assert table11.L(2, 10) == table11.L(1, 5)
    assert table11.symbol(2, 10).d == 5
    assert np.isnan(table11.values(6)[2])


def test_bound_shape():
    """Test d^(1/2) q^(1/4) with the extra factor at primes below the level's exponent."""
    assert bound_shape(4, 11) == pytest.approx(2 * 11**0.25)
    assert bound_shape(3, 27) == pytest.approx(3**0.5 * 27**0.25 * 3**0.25)
    assert bound_shape(27, 27) == pytest.approx(27**0.5 * 27**0.25)


def test_modsym_reports(f11, table11):
    """Test the bound report and the symbol rows."""
    report = modsym_bound_report(f11, 8, table11)
    assert len(report) == 8
    assert report.get_metadata("max_ratio") == max(report.column("ratio"))
    assert report.column("max_abs_lambda")[0] == pytest.approx(L1_11A / (2 * math.pi), abs=1e-9)

    rows = symbol_rows(f11, 5, table11)
    assert len(rows) == 1 + 1 + 2 + 2 + 4
    assert rows.columns == ["d", "a", "plus", "minus_im", "lambda_abs"]
    for record in rows.records():
        if record["d"] <= 2:
            assert record["minus_im"] == 0
    with pytest.raises(DomainError):
        modsym_bound_report(f11, 0, table11)


def test_afe_with_wide_kernel(f11):
    """Test the approximate functional equation with G(u) = exp(u^2)."""
    tw = additive_twist(11, 2, 5)
    value = approx_L1(f11, tw, kernel=SmoothingKernel(width=1.0))
    assert abs(value - 2 * math.pi * lambda_direct(f11, 1.0, tw)) < 1e-6


@pytest.mark.slow
@pytest.mark.parametrize("form", ["f11", "f27"])
def test_modsym_ratio_settles(request, form):
    """Test that the running maximum of the bound ratio moves by less than 2x over d = 30..60."""
    f = request.getfixturevalue(form)
    report = modsym_bound_report(f, 60)
    ratios = report.column("ratio")
    assert len(ratios) == 60
    assert all(math.isfinite(r) and r > 0 for r in ratios)
    assert report.get_metadata("upper_half_spread") < 2
    assert max(ratios) < 2 * max(ratios[:30])

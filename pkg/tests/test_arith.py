"""Tests for the elementary number theory layer."""

import pytest

from addtwist.arith import (
    crt_split,
    divisor_counts,
    divisors,
    euler_phi,
    factorize,
    is_squarefree,
    level_split,
    mod_inv,
    moebius,
    ord_p,
    primary_part,
    sigma_real,
    smallest_prime_factors,
)
from addtwist.errors import DomainError, NonInvertibleError


def test_factorize():
    """Test prime factorization and exponents."""
    fac = factorize(360)
    assert fac.factors == ((2, 3), (3, 2), (5, 1))
    assert fac.primes == (2, 3, 5)
    assert fac.ord(3) == 2
    assert fac.ord(7) == 0
    assert factorize(1).factors == ()


def test_factorize_rejects_nonpositive():
    """Test that factorize refuses zero."""
    with pytest.raises(DomainError):
        factorize(0)


def test_multiplicative_functions():
    """Test Moebius, Euler phi and divisors on small values."""
    assert [moebius(n) for n in range(1, 11)] == [1, -1, -1, 0, -1, 1, -1, 0, 0, 1]
    assert [euler_phi(n) for n in range(1, 11)] == [1, 1, 2, 2, 4, 2, 6, 4, 6, 4]
    assert divisors(12) == [1, 2, 3, 4, 6, 12]
    assert divisors(1) == [1]
    assert is_squarefree(30)
    assert not is_squarefree(18)


def test_ord_p():
    """Test p-adic valuations."""
    assert ord_p(48, 2) == 4
    assert ord_p(-27, 3) == 3
    with pytest.raises(DomainError):
        ord_p(0, 5)


def test_sigma_real():
    """Test divisor power sums."""
    assert sigma_real(0, 12) == 6
    assert sigma_real(1, 6) == pytest.approx(12)
    assert sigma_real(-1, 6) == pytest.approx(2)


def test_mod_inv():
    """Test modular inverses and the non-invertible case."""
    assert mod_inv(3, 7) == 5
    assert mod_inv(10, 1) == 0
    with pytest.raises(NonInvertibleError):
        mod_inv(6, 9)


def test_sieves():
    """Test the smallest-prime-factor and divisor-count sieves."""
    assert list(smallest_prime_factors(10)) == [0, 1, 2, 3, 2, 5, 2, 7, 2, 3, 2]
    counts = divisor_counts(100)
    assert all(counts[n] == len(divisors(n)) for n in range(1, 101))


def test_level_split_coprime_denominator():
    """Test the split when d is coprime to the level."""
    split = level_split(11, 5)
    assert (split.M_d, split.r_d, split.R_d, split.R_d_prime) == (5, 1, 11, 11)
    assert split.conductor == 275
    assert split.dual_level == 11
    split.check()


def test_level_split_partial_prime():
    """Test the split when d only partly reaches the level at a prime."""
    split = level_split(27, 9)
    assert (split.M_d, split.r_d, split.R_d, split.R_d_prime) == (1, 9, 27, 81)
    assert split.conductor == 81
    assert split.dual_level == 81
    split.check()


def test_level_split_full_prime():
    """Test the split when d is divisible by the level."""
    split = level_split(11, 22)
    assert (split.M_d, split.r_d, split.R_d, split.R_d_prime) == (22, 1, 1, 1)
    assert split.conductor == 484
    split.check()


def test_level_split_invariants_hold_everywhere():
    """Test the split invariants on a grid of levels and denominators."""
    for q in (11, 27, 36, 44, 50):
        for d in range(1, 60):
            level_split(q, d).check()


def test_crt_split():
    """Test that the CRT residues reassemble a."""
    split = level_split(27, 18)
    assert (split.M_d, split.r_d) == (2, 9)
    for a in (1, 5, 7, 11, 13, 17):
        a1, a2 = crt_split(a, split)
        assert (a1 * split.r_d + a2 * split.M_d) % 18 == a
    with pytest.raises(DomainError):
        crt_split(3, split)


def test_primary_part():
    """Test the m-primary factor."""
    assert primary_part(72, 6) == 72
    assert primary_part(72, 3) == 9
    assert primary_part(72, 5) == 1

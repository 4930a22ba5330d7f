"""Elementary number theory: factorization, multiplicative functions, level splitting."""

from dataclasses import dataclass
from functools import lru_cache
from math import gcd, lcm, prod

import numpy as np
from sympy import factorint

from addtwist.errors import DomainError, NonInvertibleError


@dataclass(frozen=True)
class Factorization:
    """Prime factorization n = prod p^e with primes in increasing order."""

    n: int
    factors: tuple[tuple[int, int], ...]

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.factors)

    def ord(self, p: int) -> int:
        """Exponent of p in n."""
        for prime, e in self.factors:
            if prime == p:
                return e
        return 0


@lru_cache(maxsize=4096)
def factorize(n: int) -> Factorization:
    """Factor a positive integer."""
    if n < 1:
        raise DomainError(f"cannot factor {n}: a positive integer is required")
    return Factorization(n, tuple(sorted(factorint(n).items())))


def ord_p(n: int, p: int) -> int:
    """p-adic valuation of a nonzero integer."""
    if n == 0:
        raise DomainError("ord_p(0) is undefined")
    n = abs(n)
    e = 0
    while n % p == 0:
        n //= p
        e += 1
    return e


def moebius(n: int) -> int:
    """Moebius function."""
    fac = factorize(n)
    if any(e > 1 for _, e in fac.factors):
        return 0
    return -1 if len(fac.factors) % 2 else 1


def euler_phi(n: int) -> int:
    """Euler's totient."""
    return prod(p ** (e - 1) * (p - 1) for p, e in factorize(n).factors)


def divisors(n: int) -> list[int]:
    """Sorted positive divisors of n."""
    divs = [1]
    for p, e in factorize(n).factors:
        divs = [d * p**j for d in divs for j in range(e + 1)]
    return sorted(divs)


def sigma_real(s: float, n: int) -> float:
    """Divisor power sum sum_{l | n} l^s."""
    if s == 0:
        return float(len(divisors(n)))
    return float(sum(float(d) ** s for d in divisors(n)))


def is_squarefree(n: int) -> bool:
    return moebius(n) != 0


def mod_inv(a: int, m: int) -> int:
    """Inverse of a modulo m as a residue in [0, m)."""
    if m < 1:
        raise DomainError(f"modulus must be positive, got {m}")
    try:
        return pow(a, -1, m)
    except ValueError:
        raise NonInvertibleError(a, m) from None


def smallest_prime_factors(n_max: int) -> np.ndarray:
    """Sieve of smallest prime factors for 0..n_max (entries 0 and 1 are 0 and 1)."""
    spf = np.arange(n_max + 1, dtype=np.int64)
    for p in range(2, int(n_max**0.5) + 1):
        if spf[p] == p:
            block = spf[p * p :: p]
            mask = block == np.arange(p * p, n_max + 1, p)
            block[mask] = p
            spf[p * p :: p] = block
    return spf


def divisor_counts(n_max: int) -> np.ndarray:
    """sigma_0(n) for 0..n_max (entry 0 is 0)."""
    counts = np.zeros(n_max + 1, dtype=np.int64)
    for d in range(1, n_max + 1):
        counts[d::d] += 1
    return counts


@dataclass(frozen=True)
class LevelSplit:
    """Invariants attached to a level q and a denominator d.

    ``M_d`` collects the primes where d reaches the level, ``r_d`` the rest;
    ``R_d`` is the exact divisor of q the Atkin-Lehner operator acts through.
    """

    q: int
    d: int
    M_d: int
    r_d: int
    R_d: int
    R_d_prime: int

    @property
    def conductor(self) -> int:
        """M_d^2 R_d', which equals lcm(q, d^2)."""
        return self.M_d**2 * self.R_d_prime

    @property
    def dual_level(self) -> int:
        """Level R_d' q / R_d of the flipped twisted forms."""
        return self.R_d_prime * self.q // self.R_d

    def check(self) -> None:
        """Raise if any defining invariant fails."""
        problems = []
        if self.M_d * self.r_d != self.d or gcd(self.M_d, self.r_d) != 1:
            problems.append("d != M_d r_d with coprime factors")
        if self.R_d % self.r_d or self.q % self.R_d:
            problems.append("r_d | R_d | q fails")
        if gcd(self.R_d, self.q // self.R_d) != 1 or self.M_d % (self.q // self.R_d):
            problems.append("R_d is not an exact divisor with q/R_d | M_d")
        if self.R_d_prime != lcm(self.R_d, self.r_d**2):
            problems.append("R_d' != lcm(R_d, r_d^2)")
        if self.conductor != lcm(self.q, self.d**2):
            problems.append("M_d^2 R_d' != lcm(q, d^2)")
        if problems:
            raise DomainError(f"level split ({self.q}, {self.d}): " + "; ".join(problems))


@lru_cache(maxsize=4096)
def level_split(q: int, d: int) -> LevelSplit:
    """Split d against the level q."""
    if q < 1 or d < 1:
        raise DomainError(f"level and denominator must be positive, got q={q}, d={d}")
    fq = factorize(q)
    M_d = 1
    for p, e in factorize(d).factors:
        if e >= fq.ord(p):
            M_d *= p**e
    r_d = d // M_d
    R_d = 1
    for p, e in fq.factors:
        if r_d % p == 0 or d % p:
            R_d *= p**e
    return LevelSplit(q, d, M_d, r_d, R_d, lcm(R_d, r_d**2))


def crt_split(a: int, split: LevelSplit) -> tuple[int, int]:
    """Residues (a1 mod M_d, a2 mod r_d) with a = a1 r_d + a2 M_d mod d."""
    if gcd(a, split.d) != 1:
        raise DomainError(f"{a} is not coprime to the denominator {split.d}")
    a1 = a * mod_inv(split.r_d, split.M_d) % split.M_d
    a2 = a * mod_inv(split.M_d, split.r_d) % split.r_d
    return a1, a2


def primary_part(n: int, m: int) -> int:
    """The m-primary factor of n: product of p^ord_p(n) over primes p | m."""
    return prod(p**e for p, e in factorize(n).factors if m % p == 0)

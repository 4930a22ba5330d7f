"""Dirichlet characters, Gauss sums and generalized Gauss sums.

A character mod n is stored as a vector of exponents on fixed generators of
each local unit group (Z/p^e)^x: one primitive root for odd p, the pair
(-1, 5) for 2^e with e >= 3 and -1 alone for 4. The value at a generator g
of order s with exponent j is exp(2 pi i j / s), so conductors and
primitivity are decided exactly on the exponents.
"""

import cmath
import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from math import gcd, lcm, prod
from typing import Optional

import numpy as np
from sympy.ntheory import primitive_root

from addtwist.arith import divisors, euler_phi, factorize, moebius, ord_p
from addtwist.errors import DomainError
from addtwist.report import Report


@lru_cache(maxsize=None)
def _odd_generator(p: int) -> int:
    """A primitive root mod p that stays primitive mod every p^e."""
    g = int(primitive_root(p))
    if pow(g, p - 1, p * p) == 1:
        g += p
    return g


@dataclass(frozen=True)
class LocalGroup:
    """Generators and orders of (Z/p^e)^x."""

    p: int
    e: int
    generators: tuple[int, ...]
    orders: tuple[int, ...]

    @property
    def modulus(self) -> int:
        return self.p**self.e

    @cached_property
    def logs(self) -> dict[int, tuple[int, ...]]:
        """Discrete logarithms of every unit residue on the generators."""
        table = {}
        pe = self.modulus
        for ks in itertools.product(*(range(s) for s in self.orders)):
            x = 1
            for g, k in zip(self.generators, ks):
                x = x * pow(g, k, pe) % pe
            table[x] = ks
        return table

    def conductor_exponent(self, exps: tuple[int, ...]) -> int:
        """Smallest c such that the local character factors through p^c."""
        if self.p == 2:
            if self.e >= 3:
                a, b = exps
                if b:
                    return self.e - ord_p(b, 2)
                return 2 if a else 0
            if self.e == 2:
                return 2 if exps[0] else 0
            return 0
        (j,) = exps
        return self.e - ord_p(j, self.p) if j else 0

    def reduce_exponents(self, exps: tuple[int, ...], c: int) -> tuple[int, ...]:
        """Exponents of the same local character viewed mod p^c (c >= conductor exponent)."""
        if c == 0:
            return ()
        if self.p == 2:
            if c == 2:
                return (exps[0],)
            a, b = exps if self.e >= 3 else (exps[0], 0)
            return (a, b // 2 ** (self.e - c))
        return (exps[0] // self.p ** (self.e - c),)

    def lift_exponents(self, exps: tuple[int, ...], c: int) -> tuple[int, ...]:
        """Exponents at p^e of the character induced from exponents at p^c."""
        if self.p == 2:
            if self.e == 1:
                return ()
            a = exps[0] if c >= 2 else 0
            if self.e == 2:
                return (a,)
            b = exps[1] * 2 ** (self.e - c) if c >= 3 else 0
            return (a, b)
        if c == 0:
            return (0,)
        return (exps[0] * self.p ** (self.e - c),)


@lru_cache(maxsize=None)
def local_group(p: int, e: int) -> LocalGroup:
    if p == 2:
        if e == 1:
            return LocalGroup(2, 1, (), ())
        if e == 2:
            return LocalGroup(2, 2, (3,), (2,))
        return LocalGroup(2, e, (2**e - 1, 5), (2, 2 ** (e - 2)))
    g = _odd_generator(p) % p**e
    return LocalGroup(p, e, (g,), (p ** (e - 1) * (p - 1),))


@lru_cache(maxsize=None)
def group_structure(n: int) -> tuple[LocalGroup, ...]:
    """Local unit groups of Z/n, by increasing prime."""
    return tuple(local_group(p, e) for p, e in factorize(n).factors)


@dataclass(frozen=True)
class DirichletCharacter:
    """A Dirichlet character mod ``modulus`` given by generator exponents."""

    modulus: int
    exponents: tuple[int, ...]

    def __post_init__(self):
        orders = [s for grp in self.groups for s in grp.orders]
        if len(orders) != len(self.exponents):
            raise DomainError(
                f"character mod {self.modulus} needs {len(orders)} exponents, got {len(self.exponents)}"
            )
        object.__setattr__(
            self, "exponents", tuple(int(j) % s for j, s in zip(self.exponents, orders))
        )

    @property
    def groups(self) -> tuple[LocalGroup, ...]:
        return group_structure(self.modulus)

    @classmethod
    def trivial(cls, modulus: int = 1) -> "DirichletCharacter":
        return cls(modulus, (0,) * sum(len(g.orders) for g in group_structure(modulus)))

    @classmethod
    def from_index(cls, modulus: int, index: int) -> "DirichletCharacter":
        """Character at position ``index`` of the lexicographic enumeration."""
        orders = [s for grp in group_structure(modulus) for s in grp.orders]
        if not 0 <= index < prod(orders):
            raise DomainError(f"no character {modulus}.{index}")
        exps = []
        for s in reversed(orders):
            index, j = divmod(index, s)
            exps.append(j)
        return cls(modulus, tuple(reversed(exps)))

    @property
    def index(self) -> int:
        idx = 0
        for j, s in zip(self.exponents, self._orders):
            idx = idx * s + j
        return idx

    @property
    def label(self) -> str:
        return f"{self.modulus}.{self.index}"

    @property
    def _orders(self) -> list[int]:
        return [s for grp in self.groups for s in grp.orders]

    def local_exponents(self) -> list[tuple[int, ...]]:
        out, pos = [], 0
        for grp in self.groups:
            k = len(grp.orders)
            out.append(self.exponents[pos : pos + k])
            pos += k
        return out

    def exponent(self, m: int) -> Optional[Fraction]:
        """chi(m) as exp(2 pi i * result), or None when gcd(m, modulus) > 1."""
        if gcd(m, self.modulus) != 1:
            return None
        total = Fraction(0)
        for grp, exps in zip(self.groups, self.local_exponents()):
            logs = grp.logs[m % grp.modulus]
            for j, k, s in zip(exps, logs, grp.orders):
                total += Fraction(j * k, s)
        return total % 1

    def __call__(self, m: int) -> complex:
        return complex(self.values[m % self.modulus])

    @cached_property
    def values(self) -> np.ndarray:
        """Values chi(0), ..., chi(modulus - 1)."""
        vals = np.zeros(self.modulus, dtype=complex)
        for m in range(self.modulus):
            frac = self.exponent(m)
            if frac is not None:
                vals[m] = _root_of_unity(frac)
        return vals

    @property
    def order(self) -> int:
        return lcm(1, *(s // gcd(j, s) for j, s in zip(self.exponents, self._orders)))

    @property
    def is_trivial(self) -> bool:
        return not any(self.exponents)

    @cached_property
    def conductor(self) -> int:
        return prod(
            grp.p ** grp.conductor_exponent(exps)
            for grp, exps in zip(self.groups, self.local_exponents())
        )

    @property
    def is_primitive(self) -> bool:
        return self.conductor == self.modulus

    def primitive(self) -> "DirichletCharacter":
        """The primitive character inducing this one."""
        if self.is_primitive:
            return self
        exps: list[int] = []
        for grp, local in zip(self.groups, self.local_exponents()):
            c = grp.conductor_exponent(local)
            if c:
                exps.extend(grp.reduce_exponents(local, c))
        return DirichletCharacter(self.conductor, tuple(exps))

    def induce(self, modulus: int) -> "DirichletCharacter":
        """The character mod ``modulus`` induced from this one."""
        if modulus % self.modulus:
            raise DomainError(f"cannot induce from {self.modulus} to {modulus}")
        prim = self.primitive()
        local = {grp.p: (grp.e, exps) for grp, exps in zip(prim.groups, prim.local_exponents())}
        exps: list[int] = []
        for grp in group_structure(modulus):
            c, base = local.get(grp.p, (0, ()))
            exps.extend(grp.lift_exponents(base, c))
        return DirichletCharacter(modulus, tuple(exps))

    def conj(self) -> "DirichletCharacter":
        return self.power(-1)

    def power(self, k: int) -> "DirichletCharacter":
        return DirichletCharacter(self.modulus, tuple(j * k for j in self.exponents))

    @property
    def parity(self) -> int:
        """chi(-1) as +1 or -1."""
        return 1 if self(-1).real > 0 else -1


def _root_of_unity(frac: Fraction) -> complex:
    # exact values at the quarter turns keep real characters real
    quarter = {Fraction(0): 1, Fraction(1, 4): 1j, Fraction(1, 2): -1, Fraction(3, 4): -1j}
    if frac in quarter:
        return complex(quarter[frac])
    return cmath.exp(2j * cmath.pi * frac.numerator / frac.denominator)


@lru_cache(maxsize=256)
def enumerate_characters(n: int) -> tuple[DirichletCharacter, ...]:
    """All phi(n) characters mod n in lexicographic exponent order."""
    if n < 1:
        raise DomainError(f"modulus must be positive, got {n}")
    orders = [s for grp in group_structure(n) for s in grp.orders]
    return tuple(
        DirichletCharacter(n, exps) for exps in itertools.product(*(range(s) for s in orders))
    )


def primitive_characters(n: int) -> list[DirichletCharacter]:
    return [chi for chi in enumerate_characters(n) if chi.is_primitive]


def gauss_sum(chi: DirichletCharacter) -> complex:
    """tau(chi) = sum_a chi(a) e(a/r)."""
    r = chi.modulus
    phases = np.exp(2j * np.pi * np.arange(r) / r)
    return complex(np.dot(chi.values, phases))


def generalized_gauss_sum(chi: DirichletCharacter, m: int, brute: bool = False) -> complex:
    """c_chi(m) = sum_{u mod r} chi(u) e(mu/r).

    The closed form reduces to the primitive character chi_* mod n:
    c_chi(m) = tau(chi_*) sum_{b | (r/n, m)} b mu(r/(nb)) chi_*(r/(nb)) conj(chi_*)(m/b).
    """
    r = chi.modulus
    if brute:
        phases = np.exp(2j * np.pi * (m * np.arange(r) % r) / r)
        return complex(np.dot(chi.values, phases))
    prim = chi.primitive()
    t = r // prim.modulus
    total = 0j
    for b in divisors(gcd(t, m)):
        mu = moebius(t // b)
        if mu:
            total += b * mu * prim(t // b) * prim(m // b).conjugate()
    return gauss_sum(prim) * total


def orthogonality_residual(r: int) -> float:
    """max |phi(r)^-1 sum_chi conj(chi)(a) c_chi(m) - e(ma/r)| over units a and 0 <= m < r."""
    chars = enumerate_characters(r)
    phi = euler_phi(r)
    table = np.array([[generalized_gauss_sum(chi, m) for m in range(r)] for chi in chars])
    worst = 0.0
    for a in range(r):
        if gcd(a, r) != 1:
            continue
        weights = np.array([chi(a).conjugate() for chi in chars])
        recovered = weights @ table / phi
        expected = np.exp(2j * np.pi * np.arange(r) * a / r)
        worst = max(worst, float(np.max(np.abs(recovered - expected))))
    return worst


def character_sums_report(r_max: int, m_factor: int = 2, closed_max: Optional[int] = None) -> Report:
    """Per modulus r: worst | |tau(chi)| - sqrt(r) | over primitive chi, worst closed-form
    deviation of c_chi(m) for m < m_factor r, and the orthogonality residual.

    The closed form is compared with the brute-force sum for r <= closed_max only
    (all r by default); larger moduli get 0 in that column.
    """
    closed_max = r_max if closed_max is None else closed_max
    report = Report(
        name="character-sums",
        columns=["r", "primitive", "gauss_dev", "closed_form_dev", "orthogonality"],
        metadata={"r_max": r_max, "m_factor": m_factor, "closed_max": closed_max},
    )
    for r in range(1, r_max + 1):
        prims = primitive_characters(r)
        gauss_dev = max((abs(abs(gauss_sum(chi)) - r**0.5) for chi in prims), default=0.0)
        closed_dev = 0.0
        checked = enumerate_characters(r) if r <= closed_max else []
        for chi in checked:
            for m in range(m_factor * r):
                diff = abs(generalized_gauss_sum(chi, m) - generalized_gauss_sum(chi, m, brute=True))
                closed_dev = max(closed_dev, diff)
        report.add_row([r, len(prims), gauss_dev, closed_dev, orthogonality_residual(r)])
    for column in ("gauss_dev", "closed_form_dev", "orthogonality"):
        report.set_metadata(f"max_{column}", max(report.column(column), default=0.0))
    return report

"""Additive twists L(s, f, a/d): direct quadrature, functional equation, approximate functional equation."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from math import gcd
from typing import Optional, Sequence, Union

import numpy as np
from scipy import integrate

from addtwist.arith import LevelSplit, crt_split, euler_phi, factorize, level_split, mod_inv, moebius
from addtwist.characters import DirichletCharacter, gauss_sum, primitive_characters
from addtwist.errors import DependencyError, DomainError, PrecisionError
from addtwist.forms import SeriesSource, evaluate_form
from addtwist.report import Report
from addtwist.special import SmoothingKernel, gammainc_upper
from addtwist.twists import ContragredientSeries, admissible_moduli, contragredients_for, twist_coeffs

logger = logging.getLogger(__name__)

SValues = Union[complex, float, Sequence[complex], np.ndarray]

# e^-45 and e^-32 decay at the end of the upper and dual incomplete-gamma sums
UPPER_DECAY = 45.0
DUAL_DECAY = 32.0
KERNEL_EPS = 1e-12


def _inv(a: int, m: int) -> int:
    return 0 if m == 1 else mod_inv(a, m)


@dataclass(frozen=True)
class AdditiveTwist:
    """A reduced fraction a/d together with its level split and CRT residues."""

    a: int
    d: int
    split: LevelSplit
    a1: int
    a2: int

    @property
    def q(self) -> int:
        return self.split.q

    @property
    def fraction(self) -> float:
        return self.a / self.d

    @property
    def dual_numerator(self) -> int:
        """j with beta = j / M_d = -(R_d' a1)^-1 / M_d mod 1."""
        M = self.split.M_d
        return -_inv(self.split.R_d_prime * self.a1, M) % M

    @property
    def beta(self) -> float:
        return self.dual_numerator / self.split.M_d

    def negated(self) -> "AdditiveTwist":
        return additive_twist(self.q, -self.a, self.d)

    def __str__(self) -> str:
        return f"{self.a}/{self.d}"


def additive_twist(q: int, a: int, d: int) -> AdditiveTwist:
    """The twist by e(a/d), with a reduced mod d; a and d must be coprime."""
    if d < 1:
        raise DomainError(f"denominator must be positive, got {d}")
    a %= d
    if gcd(a, d) != 1:
        raise DomainError(f"{a}/{d} is not reduced")
    split = level_split(q, d)
    a1, a2 = crt_split(a, split)
    return AdditiveTwist(a, d, split, a1, a2)


@dataclass(frozen=True)
class ModularSymbolPair:
    """<a/d>^+ = Re L(1, f, a/d) and <a/d>^- = i Im L(1, f, a/d)."""

    a: int
    d: int
    plus: float
    minus: complex

    @property
    def minus_im(self) -> float:
        return self.minus.imag


def _as_s_array(s_values: SValues) -> np.ndarray:
    return np.atleast_1d(np.asarray(s_values, dtype=complex))


def _unwrap(s_values: SValues, values: np.ndarray):
    return complex(values[0]) if np.ndim(s_values) == 0 else values


# --------------------------------------------------------------------------
# direct quadrature


def lambda_pair(f: SeriesSource, s_values: SValues, tw: AdditiveTwist, eps: float = 1e-8, Y0: Optional[float] = None) -> np.ndarray:
    """Lambda(s, f, a/d) = int_0^inf f(a/d + iy) y^s dy/y for several s in one quadrature pass.

    Above Y0 the integral is summed termwise with incomplete gamma weights; below
    Y0 it is integrated in log y down to the height where the cusp decay at a/d
    makes the rest negligible.
    """
    s = _as_s_array(s_values)
    sigma = float(np.min(s.real))
    if sigma <= 0:
        raise DomainError(f"direct quadrature needs Re s > 0, got {sigma}")
    split = tw.split
    Y0 = Y0 or 1 / (tw.d * math.sqrt(f.level))
    x = tw.fraction

    N1 = math.ceil(UPPER_DECAY / (2 * math.pi * Y0))
    n = np.arange(1, N1 + 1)
    weights = f.series(N1).a[1:].astype(complex) * np.exp(2j * np.pi * n * x)
    upper = np.array([np.dot(weights, (2 * np.pi * n) ** (-sk) * gammainc_upper(sk, 2 * np.pi * n * Y0)) for sk in s])

    N = split.conductor
    C = 4 * split.r_d**1.5

    def tail(H):
        return 2 * C * (N * H) ** (1 - sigma) * math.exp(-2 * math.pi * H) / (2 * math.pi)

    H0 = 1.0
    while tail(H0) > eps / 4:
        H0 *= 1.25
    y_lo = 1 / (N * H0)
    eps_pt = eps * sigma / (4 * Y0**sigma)

    def integrand(t):
        value, _ = evaluate_form(f, complex(x, math.exp(t)), eps_pt)
        terms = value * np.exp(s * t)
        return np.concatenate([terms.real, terms.imag])

    lower, err = integrate.quad_vec(integrand, math.log(y_lo), math.log(Y0), epsabs=eps / 4, epsrel=0, norm="max")
    if err > eps / 2:
        raise PrecisionError(
            f"quadrature error {err:.2e} exceeds {eps / 2:.2e} for {tw}", suggestion="relax eps or move Y0"
        )
    k = len(s)
    logger.debug("Lambda(%s): %d upper terms, lower integral from y=%.3g, quad error %.2e", tw, N1, y_lo, err)
    return upper + lower[:k] + 1j * lower[k:]


def lambda_direct(f: SeriesSource, s: complex, tw: AdditiveTwist, eps: float = 1e-8) -> complex:
    return complex(lambda_pair(f, [s], tw, eps)[0])


# --------------------------------------------------------------------------
# functional equation


@dataclass(frozen=True)
class FETerm:
    """One character on the dual side and its weight w_chi."""

    n: int
    chi: DirichletCharacter
    weight: complex

    @property
    def key(self) -> tuple[int, int]:
        return (self.n, self.chi.index)


def fe_terms(tw: AdditiveTwist) -> list[FETerm]:
    """w_chi = -mu(r/n) tau(conj chi) chi(a2 (r/n)^-1) chi(M_d)^2 / phi(r) over primitive chi mod n."""
    split = tw.split
    r = split.r_d
    phi = euler_phi(r)
    terms = []
    for n in admissible_moduli(r):
        mu = moebius(r // n)
        shift = tw.a2 * _inv(r // n, n)
        for chi in primitive_characters(n):
            weight = -mu * gauss_sum(chi.conj()) * chi(shift) * chi(split.M_d) ** 2 / phi
            terms.append(FETerm(n, chi, complex(weight)))
    return terms


def dual_length(N: int) -> int:
    return math.ceil(DUAL_DECAY * math.sqrt(N) / (2 * math.pi)) + 1


def _dual_lambda(
    f: SeriesSource, s: np.ndarray, tw: AdditiveTwist, chi: DirichletCharacter, b: np.ndarray
) -> np.ndarray:
    """Lambda(2 - s, g, beta) for g = f^chi | W_R' with coefficients b, split at height 1/sqrt(N)."""
    split = tw.split
    N, M = split.conductor, split.M_d
    Mb = len(b) - 1
    Y = max(1 / math.sqrt(N), DUAL_DECAY / (2 * math.pi * Mb))
    T0 = 1 / (N * Y)
    m = np.arange(1, Mb + 1)
    upper_w = b[1:] * np.exp(2j * np.pi * m * tw.beta)
    lower_w = twist_coeffs(f, chi, Mb)[1:] * np.exp(2j * np.pi * m * tw.a1 / M)
    flip = -np.conj(chi(M)) ** 2
    out = np.empty(len(s), dtype=complex)
    for i, sk in enumerate(s):
        w = 2 - sk
        upper = np.dot(upper_w, (2 * np.pi * m) ** (-w) * gammainc_upper(w, 2 * np.pi * m * Y))
        lower = np.dot(lower_w, (2 * np.pi * m) ** (-sk) * gammainc_upper(sk, 2 * np.pi * m * T0))
        out[i] = upper + flip * N ** (1 - w) * lower
    return out


def _resolve_contragredients(
    f: SeriesSource, tw: AdditiveTwist, terms: list[FETerm], n_coeffs: int, contragredients
) -> dict[tuple[int, int], ContragredientSeries]:
    if contragredients is None:
        contragredients = contragredients_for(f, tw.split, n_coeffs)
    for term in terms:
        if term.key not in contragredients:
            raise DependencyError(term.chi.label)
    return contragredients


def functional_equation_rhs(f: SeriesSource, s_values: SValues, tw: AdditiveTwist, contragredients=None):
    """Sum over chi of w_chi Lambda(2 - s, f~^chi_R', beta), equal to (M_d^2 R_d')^(s-1) Lambda(s, f, a/d)."""
    if f.weight != 2:
        raise DomainError(f"the additive functional equation is implemented for weight 2, got {f.weight}")
    s = _as_s_array(s_values)
    Mb = dual_length(tw.split.conductor)
    terms = fe_terms(tw)
    series = _resolve_contragredients(f, tw, terms, Mb, contragredients)
    total = np.zeros(len(s), dtype=complex)
    for term in terms:
        total += term.weight * _dual_lambda(f, s, tw, term.chi, series[term.key].coefficients(Mb))
    return _unwrap(s_values, total)


def fe_lhs(f: SeriesSource, s_values: SValues, tw: AdditiveTwist, eps: float = 1e-8):
    """(M_d^2 R_d')^(s-1) Lambda(s, f, a/d) by direct quadrature."""
    s = _as_s_array(s_values)
    values = tw.split.conductor ** (s - 1) * lambda_pair(f, s, tw, eps)
    return _unwrap(s_values, values)


def _fe_rows(f: SeriesSource, d: int, s_values: np.ndarray, eps: float) -> list[list]:
    rows = []
    for a in range(d):
        if gcd(a, d) != 1:
            continue
        tw = additive_twist(f.level, a, d)
        lhs = fe_lhs(f, s_values, tw, eps)
        rhs = functional_equation_rhs(f, s_values, tw)
        for sk, left, right in zip(s_values, lhs, rhs):
            rows.append([d, a, sk.real, left.real, left.imag, right.real, right.imag, abs(left - right)])
    return rows


def fe_sweep(
    f: SeriesSource, d_max: int, s_list: Sequence[float] = (0.7, 1.0, 1.3), tol: float = 1e-6, jobs: int = 1
) -> Report:
    """Both sides of the functional equation for every reduced a/d with d <= d_max."""
    s_values = np.asarray(s_list, dtype=complex)
    eps = max(min(tol / 100, 1e-8), 1e-10)
    report = Report(
        name="verify-fe",
        columns=["d", "a", "s", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "abs_diff"],
        metadata={"form": f.label, "level": f.level, "d_max": d_max, "tol": tol},
    )
    ds = list(range(1, d_max + 1))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_fe_rows, [f] * len(ds), ds, [s_values] * len(ds), [eps] * len(ds)))
    else:
        chunks = [_fe_rows(f, d, s_values, eps) for d in ds]
    for d, chunk in zip(ds, chunks):
        for row in chunk:
            report.add_row(row)
        logger.info("d=%d: %d rows, worst difference %.2e", d, len(chunk), max((r[-1] for r in chunk), default=0.0))
    failures = sum(1 for diff in report.column("abs_diff") if diff > tol)
    report.set_metadata("failures", failures)
    report.set_metadata("max_abs_diff", max(report.column("abs_diff"), default=0.0))
    return report


# --------------------------------------------------------------------------
# approximate functional equation


def _main_terms(f: SeriesSource, N: int, X: float, kernel: SmoothingKernel, eps: float) -> np.ndarray:
    """a(n)/n V(sqrt(N) X / (2 pi n)) for n = 0..length; entry 0 is 0."""
    Y = math.sqrt(N) * X / (2 * math.pi)
    length = max(1, math.ceil(Y / kernel.cutoff(eps)))
    n = np.arange(1, length + 1)
    out = np.zeros(length + 1, dtype=complex)
    out[1:] = f.series(length).a[1:] / n * kernel.V_array(Y / n)
    return out


def _dual_terms(series: ContragredientSeries, N: int, X: float, kernel: SmoothingKernel, eps: float) -> np.ndarray:
    """b(m)/m V(sqrt(N) / (2 pi m X)) for m = 0..length."""
    Y = math.sqrt(N) / (2 * math.pi * X)
    length = max(1, math.ceil(Y / kernel.cutoff(eps)))
    b = series.coefficients(length)
    m = np.arange(1, length + 1)
    out = np.zeros(length + 1, dtype=complex)
    out[1:] = b[1:] / m * kernel.V_array(Y / m)
    return out


def _afe_dual_size(N: int, X: float, kernel: SmoothingKernel, eps: float) -> int:
    return max(1, math.ceil(math.sqrt(N) / (2 * math.pi * X) / kernel.cutoff(eps)))


def approx_L1(
    f: SeriesSource,
    tw: AdditiveTwist,
    X: float = 1.0,
    kernel: Optional[SmoothingKernel] = None,
    contragredients=None,
    eps: float = KERNEL_EPS,
) -> complex:
    """L(1, f, a/d) as a main sum of length ~ sqrt(N) X plus the dual sums of length ~ sqrt(N) / X."""
    if X <= 0:
        raise DomainError(f"balance parameter must be positive, got {X}")
    kernel = kernel or SmoothingKernel()
    N = tw.split.conductor
    main = _main_terms(f, N, X, kernel, eps)
    n = np.arange(len(main))
    value = complex(np.dot(main, np.exp(2j * np.pi * n * tw.fraction)))

    terms = fe_terms(tw)
    series = _resolve_contragredients(f, tw, terms, _afe_dual_size(N, X, kernel, eps), contragredients)
    for term in terms:
        dual = _dual_terms(series[term.key], N, X, kernel, eps)
        m = np.arange(len(dual))
        value += term.weight * complex(np.dot(dual, np.exp(2j * np.pi * m * tw.beta)))
    return value


def _fold(values: np.ndarray, modulus: int) -> np.ndarray:
    """Sums of values[n] over each residue class n mod modulus."""
    idx = np.arange(len(values)) % modulus
    return np.bincount(idx, weights=values.real, minlength=modulus) + 1j * np.bincount(
        idx, weights=values.imag, minlength=modulus
    )


def _exp_sums(folded: np.ndarray) -> np.ndarray:
    """sum_r folded[r] e(r j / m) for every j mod m."""
    m = len(folded)
    return m * np.fft.ifft(folded)


class SymbolTable:
    """L(1, f, a/d) for every unit a mod d, computed once per denominator."""

    def __init__(self, f: SeriesSource, X: float = 1.0, kernel: Optional[SmoothingKernel] = None, eps: float = KERNEL_EPS):
        self.f = f
        self.X = X
        self.kernel = kernel or SmoothingKernel()
        self.eps = eps
        self._cache: dict[int, np.ndarray] = {}

    def values(self, d: int) -> np.ndarray:
        """Array of length d holding L(1, f, a/d) at units a and nan elsewhere."""
        if d not in self._cache:
            self._cache[d] = self._compute(d)
        return self._cache[d]

    def _compute(self, d: int) -> np.ndarray:
        f, X, kernel, eps = self.f, self.X, self.kernel, self.eps
        split = level_split(f.level, d)
        N, M = split.conductor, split.M_d
        main = _exp_sums(_fold(_main_terms(f, N, X, kernel, eps), d))
        out = np.full(d, np.nan, dtype=complex)
        units = [a for a in range(d) if gcd(a, d) == 1]
        twists = [additive_twist(f.level, a, d) for a in units]
        out[units] = main[units]

        needed = {}
        for tw in twists:
            for term in fe_terms(tw):
                needed.setdefault(term.key, term.chi)
        series = contragredients_for(f, split, _afe_dual_size(N, X, kernel, eps))
        dual = {}
        for key, chi in needed.items():
            if key not in series:
                raise DependencyError(chi.label)
            dual[key] = _exp_sums(_fold(_dual_terms(series[key], N, X, kernel, eps), M))
        for a, tw in zip(units, twists):
            j = tw.dual_numerator
            out[a] += sum(term.weight * dual[term.key][j] for term in fe_terms(tw))
        logger.info("symbols for d=%d: %d units, conductor %d", d, len(units), N)
        return out

    def L(self, a: int, M: int) -> complex:
        """L(1, f, a/M) for any a, reducing the fraction first."""
        g = gcd(a, M)
        d = M // g
        return complex(self.values(d)[(a // g) % d])

    def symbol(self, a: int, M: int) -> ModularSymbolPair:
        value = self.L(a, M)
        g = gcd(a, M)
        d = M // g
        minus = 0j if d <= 2 else 1j * value.imag
        return ModularSymbolPair((a // g) % d, d, value.real, minus)


def modular_symbol(f: SeriesSource, a: int, d: int, X: float = 1.0, kernel: Optional[SmoothingKernel] = None) -> ModularSymbolPair:
    """<a/d>^+- from L(1, f, a/d); L(1, f, -a/d) is its conjugate for real coefficients."""
    tw = additive_twist(f.level, a, d)
    value = approx_L1(f, tw, X, kernel)
    minus = 0j if d <= 2 else 1j * value.imag
    return ModularSymbolPair(tw.a, d, value.real, minus)


def bound_shape(d: int, q: int) -> float:
    """d^(1/2) q^(1/4) prod p^(1/4) over p | d with ord_p(d) < ord_p(q)."""
    fq = factorize(q)
    extra = math.prod(p**0.25 for p, e in factorize(d).factors if e < fq.ord(p))
    return math.sqrt(d) * q**0.25 * extra


def modsym_bound_report(f: SeriesSource, d_max: int, table: Optional[SymbolTable] = None) -> Report:
    """max_a |Lambda(1, f, a/d)| next to the d^(1/2) q^(1/4) prod p^(1/4) shape."""
    if d_max < 1:
        raise DomainError(f"d_max must be positive, got {d_max}")
    table = table or SymbolTable(f)
    report = Report(
        name="modsym-bound",
        columns=["d", "max_abs_lambda", "shape", "ratio"],
        metadata={"form": f.label, "level": f.level, "d_max": d_max},
    )
    for d in range(1, d_max + 1):
        values = table.values(d)
        peak = float(np.nanmax(np.abs(values))) / (2 * math.pi)
        shape = bound_shape(d, f.level)
        report.add_row([d, peak, shape, peak / shape])
    ratios = report.column("ratio")
    report.set_metadata("max_ratio", max(ratios))
    # running maximum of the ratio, compared across the upper half of the d range
    running = np.maximum.accumulate(ratios)
    upper = running[(len(running) - 1) // 2 :]
    report.set_metadata("upper_half_spread", float(upper[-1] / upper[0]) if upper[0] > 0 else math.inf)
    return report


def symbol_rows(f: SeriesSource, d_max: int, table: Optional[SymbolTable] = None) -> Report:
    """Every <a/d>^+- with d <= d_max, one row per reduced fraction."""
    table = table or SymbolTable(f)
    report = Report(
        name="modsym",
        columns=["d", "a", "plus", "minus_im", "lambda_abs"],
        metadata={"form": f.label, "level": f.level, "d_max": d_max},
    )
    for d in range(1, d_max + 1):
        for a in range(d):
            if gcd(a, d) != 1:
                continue
            pair = table.symbol(a, d)
            report.add_row([d, a, pair.plus, pair.minus_im, abs(table.L(a, d)) / (2 * math.pi)])
    return report

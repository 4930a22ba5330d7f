"""Multiplicative twists, Atkin-Lehner operators and contragredient expansions.

The contragredient of a twist f^chi at an exact divisor R' of its level is
g | W_R'. Its coefficients come from one of three places:

* ``numeric``: sampling g | W_R' on a horizontal line and inverting the DFT;
* ``eigen``: the numeric coefficients turned out proportional to the twist's
  own coefficients (or their conjugates), so any length is available;
* ``decomposition``: rebuilt from an externally supplied newform F_chi.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, lcm
from typing import Optional

import numpy as np
from scipy import special

from addtwist.arith import (
    LevelSplit,
    divisor_counts,
    divisors,
    factorize,
    is_squarefree,
    level_split,
    mod_inv,
    primary_part,
    sigma_real,
    smallest_prime_factors,
)
from addtwist.characters import DirichletCharacter, primitive_characters
from addtwist.errors import DataError, DomainError, InvariantError, PrecisionError, TruncationError
from addtwist.forms import (
    CoefficientSeries,
    SeriesSource,
    evaluate_form,
    evaluate_many,
    required_terms,
    tail_bound,
)
from addtwist.report import Report

logger = logging.getLogger(__name__)

# per-coefficient tolerance on err_m / sqrt(m)
DEFAULT_TOL = 1e-6
EIGEN_CHECK_TERMS = 50


def twist_coeffs(f: SeriesSource, chi: DirichletCharacter, N: int) -> np.ndarray:
    """a(n) chi(n) for n = 0..N."""
    a = f.series(N).a
    return a.astype(complex) * chi.values[np.arange(N + 1) % chi.modulus]


class TwistSource:
    """f tensor chi as a series source, at level lcm(q, cond(chi)^2) unless given."""

    def __init__(self, base: SeriesSource, chi: DirichletCharacter, level: Optional[int] = None):
        self.base = base
        self.chi = chi
        self.label = base.label if chi.is_trivial else f"{base.label}x{chi.label}"
        self.level = level or lcm(base.level, chi.conductor**2)
        self.weight = base.weight

    def series(self, n: int) -> CoefficientSeries:
        nebentypus = self.chi.power(2)
        return CoefficientSeries(
            self.label,
            self.level,
            self.weight,
            twist_coeffs(self.base, self.chi, n),
            character=(nebentypus.modulus, nebentypus.index),
            exact=False,
        )

    def __repr__(self) -> str:
        return f"TwistSource({self.base.label}, {self.chi.label}, level={self.level})"


# --------------------------------------------------------------------------
# matrices


@dataclass(frozen=True)
class AtkinLehnerMatrix:
    """W_R = [[R x1, x2], [q x3, R x4]] of determinant R."""

    level: int
    R: int
    x1: int
    x2: int
    x3: int
    x4: int

    @property
    def entries(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return ((self.R * self.x1, self.x2), (self.level * self.x3, self.R * self.x4))

    @property
    def det(self) -> int:
        (a, b), (c, d) = self.entries
        return a * d - b * c

    def check(self) -> None:
        q, R = self.level, self.R
        if q % R or gcd(R, q // R) != 1:
            raise InvariantError(f"{R} is not an exact divisor of {q}")
        if self.det != R:
            raise InvariantError(f"det W_{R} = {self.det}, expected {R}")
        if (self.x1 - 1) % (q // R) or (self.x2 - 1) % R:
            raise InvariantError(f"W_{R} at level {q} violates x1 = 1 mod q/R or x2 = 1 mod R")

    def act(self, z):
        (a, b), (c, d) = self.entries
        return (a * z + b) / (c * z + d)

    def __str__(self) -> str:
        (a, b), (c, d) = self.entries
        return f"[[{a}, {b}], [{c}, {d}]]"


def atkin_lehner_matrix(q: int, R: int) -> AtkinLehnerMatrix:
    """Canonical W_R at level q: x1 = x2 = 1, x4 = R^-1 mod q/R; the identity for R = 1."""
    if R < 1 or q % R:
        raise DomainError(f"{R} does not divide {q}")
    Q = q // R
    if gcd(R, Q) != 1:
        raise DomainError(f"{R} is not an exact divisor of {q}")
    if R == 1:
        return AtkinLehnerMatrix(q, 1, 1, 0, 0, 1)
    if Q == 1:
        x4, x3 = 0, -1
    else:
        x4 = mod_inv(R, Q)
        x3 = (R * x4 - 1) // Q
    W = AtkinLehnerMatrix(q, R, 1, 1, x3, x4)
    W.check()
    return W


@dataclass(frozen=True)
class FlipMatrix:
    """V = [[R xbar, (1 - R a xbar)/M], [-R M, R a]] with xbar = (R a)^-1 mod M.

    V sends a/M + iy to -xbar/M + i/(M^2 R y), giving
    f(a/M + iy) = i^k (M sqrt(R) y)^-k f~_R(-xbar/M + i/(M^2 R y)).
    """

    level: int
    R: int
    M: int
    a: int
    xbar: int

    @property
    def entries(self) -> tuple[tuple[int, int], tuple[int, int]]:
        R, M, a, xbar = self.R, self.M, self.a, self.xbar
        return ((R * xbar, (1 - R * a * xbar) // M), (-R * M, R * a))

    @property
    def det(self) -> int:
        (a, b), (c, d) = self.entries
        return a * d - b * c

    def image(self, y: float) -> complex:
        """Point paired with a/M + iy."""
        return complex(-self.xbar / self.M, 1 / (self.M**2 * self.R * y))

    def residual(self, f: SeriesSource, contragredient: "ContragredientSeries", y: float, eps: float = 1e-13) -> float:
        """|f(a/M + iy) - i^k (M sqrt(R) y)^-k f~_R(image)| relative to |f(a/M + iy)|."""
        k = f.weight
        lhs, _ = evaluate_form(f, complex(self.a / self.M, y), eps)
        w = self.image(y)
        # contragredients may grow faster than newforms
        b = contragredient.coefficients(required_terms(w.imag, k, eps / 100))
        m = np.arange(1, len(b))
        rhs = 1j**k * (self.M * math.sqrt(self.R) * y) ** (-k) * complex(np.dot(b[1:], np.exp(2j * np.pi * m * w)))
        return abs(lhs - rhs) / max(abs(lhs), 1e-300)


def flip_matrix(q: int, R: int, M: int, a: int) -> FlipMatrix:
    if q % R or gcd(R, q // R) != 1:
        raise DomainError(f"{R} is not an exact divisor of {q}")
    if M % (q // R):
        raise DomainError(f"q/R = {q // R} does not divide M = {M}")
    if gcd(R, M) != 1 or gcd(a, M) != 1:
        raise DomainError(f"flip needs gcd(R, M) = gcd(a, M) = 1, got R={R}, M={M}, a={a}")
    V = FlipMatrix(q, R, M, a, mod_inv(R * a, M))
    if V.det != R:
        raise InvariantError(f"flip matrix has det {V.det}, expected {R}")
    return V


# --------------------------------------------------------------------------
# contragredient series


@dataclass(frozen=True, eq=False)
class ContragredientSeries:
    """Coefficients b(1..N) of g | W_R (``b[0]`` is 0) and where they came from."""

    b: np.ndarray
    source: str
    level_out: int
    support_modulus: int = 1
    chi: Optional[DirichletCharacter] = None
    errors: Optional[np.ndarray] = None
    ratio: Optional[complex] = None
    conjugate: bool = False
    base: Optional[SeriesSource] = None
    metadata: dict = field(default_factory=dict)

    @property
    def length(self) -> int:
        return len(self.b) - 1

    def coefficients(self, N: int) -> np.ndarray:
        """b(0..N); eigen series extend to any length."""
        if N <= self.length:
            return self.b[: N + 1]
        if self.source == "eigen":
            a = self.base.series(N).a.astype(complex)
            return self.ratio * (np.conj(a) if self.conjugate else a)
        raise TruncationError(f"{self.source} contragredient stores {self.length} coefficients", required=N)

    def extended(self, N: int) -> "ContragredientSeries":
        return ContragredientSeries(
            self.coefficients(N), self.source, self.level_out, self.support_modulus, self.chi,
            None, self.ratio, self.conjugate, self.base, dict(self.metadata),
        )


def _magnitude(y: float, k: int) -> float:
    """Rough size of sum_n n^((k-1)/2) sigma_0(n) e^(-2 pi n y), the scale of rounding errors in g(x + iy)."""
    c = 2 * math.pi * y
    alpha = (k + 1) / 2
    return 1.0 + special.gamma(alpha) * c ** (-alpha) * (1 + abs(math.log(c)))


def _sample_transform(g: SeriesSource, W: AtkinLehnerMatrix, M_out: int, y0: float):
    k = g.weight
    K = 1 << (max(2 * M_out + 2, math.ceil(6 / y0)) - 1).bit_length()
    (a, b), (c, d) = W.entries
    x = np.arange(K) / K
    # move each sample by a period so that |c z + d| <= |c| / 2 on the real part
    x = x + np.round(-d / c - x)
    z = x + 1j * y0
    w = (a * z + b) / (c * z + d)
    values, bounds = evaluate_many(g, w, eps=1e-15)
    factor = W.R ** (k / 2) * (c * z + d) ** (-k)
    h = factor * values

    rounding = np.array([_magnitude(v, k) for v in w.imag]) * np.finfo(float).eps * 8
    value_error = float(np.mean(np.abs(factor) * (bounds + rounding)))

    raw = np.fft.fft(h)[: M_out + 1] / K
    m = np.arange(M_out + 1)
    unfold = np.exp(2 * np.pi * m * y0)
    coeffs = unfold * raw
    coeffs[0] = 0

    sigma0 = divisor_counts(M_out)
    scale = np.maximum(m[1:] ** ((k - 1) / 2) * sigma0[1:], 1)
    B = 2 * max(float(np.max(np.abs(coeffs[1:]) / scale)), 1.0)
    alias = np.array([B * tail_bound(int(mm) + K - 1, y0, k) for mm in m])
    errors = unfold * (value_error + alias)
    errors[0] = 0
    return coeffs, errors, K


def apply_atkin_lehner_numeric(
    g: SeriesSource,
    R: int,
    M_out: int,
    y0: Optional[float] = None,
    level: Optional[int] = None,
    tol: float = DEFAULT_TOL,
    chi: Optional[DirichletCharacter] = None,
) -> ContragredientSeries:
    """Coefficients b(1..M_out) of g | W_R by sampling at height y0 and inverting the DFT."""
    N = level or g.level
    W = atkin_lehner_matrix(N, R)
    if M_out < 1:
        raise DomainError(f"need at least one output coefficient, got {M_out}")
    if R == 1:
        b = g.series(M_out).a.astype(complex)
        return ContragredientSeries(b, "numeric", N, chi=chi, errors=np.zeros(M_out + 1), base=g)

    y0 = y0 or min(1 / math.sqrt(N), 1 / M_out)
    last = None
    for height in (y0, y0 / 2):
        coeffs, errors, K = _sample_transform(g, W, M_out, height)
        m = np.arange(1, M_out + 1)
        worst = float(np.max(errors[1:] / np.sqrt(m)))
        if worst <= tol:
            logger.info(
                "W_%d on %s: %d coefficients from %d samples at y0=%.4g, worst scaled error %.2e",
                R, g.label, M_out, K, height, worst,
            )
            return ContragredientSeries(
                coeffs, "numeric", N, chi=chi, errors=errors, base=g, metadata={"y0": height, "samples": K}
            )
        logger.debug("W_%d on %s at y0=%.4g: scaled error %.2e above %.1e", R, g.label, height, worst, tol)
        last = (height, worst)
    raise PrecisionError(
        f"W_{R} on {g.label} reaches scaled error {last[1]:.2e} > {tol:.1e} for {M_out} coefficients",
        suggestion=f"request fewer coefficients or pass y0 below {last[0] / 2:.3g}",
    )


def eigen_extension(
    series: ContragredientSeries, base: SeriesSource, terms: int = EIGEN_CHECK_TERMS, tol: float = DEFAULT_TOL
) -> Optional[ContragredientSeries]:
    """Recognize b = c a or b = c conj(a) on the first coefficients; None when neither fits."""
    n = min(terms, series.length)
    a = base.series(n).a.astype(complex)
    b = series.b[: n + 1]
    pivot = int(np.argmax(np.abs(a)))
    if abs(a[pivot]) == 0:
        return None
    m = np.sqrt(np.arange(1, n + 1))
    for conjugate in (False, True):
        ref = np.conj(a) if conjugate else a
        ratio = b[pivot] / ref[pivot]
        if np.all(np.abs(b[1:] - ratio * ref[1:]) <= tol * m):
            logger.debug("%s is %s times the %s", series.source, ratio, "conjugate" if conjugate else "series")
            return ContragredientSeries(
                ratio * ref, "eigen", series.level_out, series.support_modulus, series.chi,
                ratio=complex(ratio), conjugate=conjugate, base=base, metadata=dict(series.metadata),
            )
    return None


def pseudo_eigenvalue(F: SeriesSource, q_F: int, R: int, M_out: int = 8) -> complex:
    """lambda with F | W_R = lambda F~, read off as the first coefficient of F | W_R."""
    if R == 1:
        return 1 + 0j
    b = apply_atkin_lehner_numeric(F, R, M_out, level=q_F)
    lam = complex(b.b[1])
    if abs(abs(lam) - 1) > 1e-6:
        raise InvariantError(f"pseudo-eigenvalue of {F.label} at W_{R} has modulus {abs(lam):.8f}")
    return lam


# --------------------------------------------------------------------------
# decomposition through a newform F_chi


@dataclass(frozen=True, eq=False)
class TwistDecomposition:
    """f^chi = sum_{l | r_*0} beta(l) F_chi | B_l with the invariants needed for f^chi | W_R'."""

    F: SeriesSource
    q_F: int
    chi: DirichletCharacter
    split: LevelSplit
    beta: dict[int, complex]
    r_star0: int
    R_star: int
    R_star_prime: int
    Q_star: int
    lam: complex
    nebentypus: DirichletCharacter

    @property
    def flip_divisor(self) -> int:
        """R R_*' / R_*, the exact divisor of q_F carrying the flip of F_chi."""
        return self.split.R_d * self.R_star_prime // self.R_star


def _beta_table(F_coeffs: np.ndarray, chi: DirichletCharacter, q_F: int, xi: DirichletCharacter, k: int):
    beta = {1: 1 + 0j}
    r_star0 = 1
    for p in factorize(chi.modulus).primes:
        ap = complex(F_coeffs[p])
        local = {1: 1 + 0j}
        if q_F % p:
            # F | U_p = a(p) F - p^(k-1) xi(p) F | B_p never vanishes here
            local[p] = -ap
            local[p * p] = p ** (k - 1) * xi(p)
            r_star0 *= p * p
        elif ap != 0:
            local[p] = -ap
            r_star0 *= p
        beta = {l1 * l2: v1 * v2 for l1, v1 in beta.items() for l2, v2 in local.items()}
    return beta, r_star0


def twist_decomposition(
    f: SeriesSource,
    chi: DirichletCharacter,
    F_data: SeriesSource,
    split: Optional[LevelSplit] = None,
    lam: Optional[complex] = None,
    check_terms: int = 1000,
) -> TwistDecomposition:
    """Match f^chi against the newform F_chi and derive r_*0, Q_* and the pseudo-eigenvalue."""
    if not chi.is_primitive:
        raise DomainError(f"character {chi.label} is not primitive")
    q, q_F, r_star, k = f.level, F_data.level, chi.modulus, f.weight
    split = split or level_split(q, r_star)
    if split.r_d % r_star:
        raise DomainError(f"conductor {r_star} does not divide r = {split.r_d}")
    R_star = primary_part(q, r_star)
    if lcm(q, r_star**2) % q_F or q_F % (q // R_star):
        raise InvariantError(f"level {q_F} of F_chi is incompatible with q = {q} and r_* = {r_star}")
    R_star_prime = primary_part(q_F, gcd(r_star, q_F))
    nebentypus = F_data.series(1).nebentypus()
    xi = (nebentypus or chi.power(2)).primitive()

    n = min(check_terms, _available(f), _available(F_data))
    F_coeffs = F_data.series(n).a.astype(complex)
    if abs(F_coeffs[1] - 1) > 1e-12:
        raise DataError(f"{F_data.label} is not normalized")
    beta, r_star0 = _beta_table(F_coeffs, chi, q_F, xi, k)

    rebuilt = np.zeros(n + 1, dtype=complex)
    for ell, value in beta.items():
        if ell <= n:
            rebuilt[ell::ell] += value * F_coeffs[1 : n // ell + 1]
    target = twist_coeffs(f, chi, n)
    bad = np.nonzero(np.abs(rebuilt - target) > 1e-9 * (1 + np.abs(target)))[0]
    if len(bad):
        raise DataError(f"{F_data.label} does not decompose {f.label} twisted by {chi.label}", n=int(bad[0]))

    Q = Fraction(R_star * split.R_d_prime, R_star_prime * split.R_d * r_star0)
    if Q.denominator != 1:
        raise InvariantError(f"Q_* = {Q} is not an integer")
    if lam is None:
        lam = pseudo_eigenvalue(F_data, q_F, split.R_d * R_star_prime // R_star)
    logger.info(
        "%s x %s = sum over l | %d of beta(l) %s | B_l; Q_* = %d, lambda = %s",
        f.label, chi.label, r_star0, F_data.label, int(Q), lam,
    )
    return TwistDecomposition(
        F_data, q_F, chi, split, beta, r_star0, R_star, R_star_prime, int(Q), complex(lam), xi
    )


def _available(source: SeriesSource) -> int:
    return source.length if isinstance(source, CoefficientSeries) else 10**6


def _flipped_newform_coeffs(decomp: TwistDecomposition, N: int) -> np.ndarray:
    """Normalized coefficients of F~: conj(xi)(p) a(p) off R R_*'/R_*, conj(a(p)) on it."""
    a = decomp.F.series(N).a.astype(complex)
    k, xi, flip = decomp.F.weight, decomp.nebentypus, decomp.flip_divisor
    out = np.zeros(N + 1, dtype=complex)
    if N >= 1:
        out[1] = 1
    spf = smallest_prime_factors(N)
    for n in range(2, N + 1):
        p = int(spf[n])
        pe, rest = p, n // p
        while rest % p == 0:
            pe, rest = pe * p, rest // p
        if rest > 1:
            out[n] = out[pe] * out[rest]
            continue
        if pe == p:
            out[p] = np.conj(a[p]) if flip % p == 0 else np.conj(xi(p)) * a[p]
        elif decomp.q_F % p == 0:
            out[pe] = out[pe // p] * out[p]
        else:
            out[pe] = out[p] * out[pe // p] - p ** (k - 1) * np.conj(xi(p)) * out[pe // (p * p)]
    return out


def contragredient_from_decomposition(decomp: TwistDecomposition, N: int) -> ContragredientSeries:
    """b(Q_* m) = lambda sum_{l | (r_*0, m)} beta(r_*0 / l) (r_*0 / l)^(-k/2) (Q_* l)^(k/2) a~(m / l)."""
    k, Q, r0 = decomp.F.weight, decomp.Q_star, decomp.r_star0
    b = np.zeros(N + 1, dtype=complex)
    top = N // Q
    a_tilde = _flipped_newform_coeffs(decomp, top)
    for ell in divisors(r0):
        weight = decomp.beta.get(r0 // ell, 0) * (r0 / ell) ** (-k / 2) * (Q * ell) ** (k / 2)
        if weight == 0 or ell > top:
            continue
        # m runs over multiples of l, m / l over 1..top / l
        ms = np.arange(ell, top + 1, ell)
        b[Q * ms] += weight * a_tilde[ms // ell]
    b *= decomp.lam
    split = decomp.split
    return ContragredientSeries(
        b, "decomposition", split.dual_level, support_modulus=Q, chi=decomp.chi,
        metadata={"r_star0": r0, "lambda": decomp.lam},
    )


def contragredient_bound_report(series: ContragredientSeries, Q: int, r_star0: int, eps: float = 0.1) -> Report:
    """|(Q m)^(-1/2) b(Q m)| against (m / r_*0)^eps (Q r_*0)^(1/2) sigma_(-1+2 eps)(r_*0)."""
    report = Report(
        name="contragredient-bound",
        columns=["m", "abs_b", "normalized", "shape", "ratio"],
        metadata={"Q": Q, "r_star0": r_star0, "eps": eps, "source": series.source},
    )
    sigma = sigma_real(-1 + 2 * eps, r_star0)
    worst = 0.0
    for m in range(1, series.length // Q + 1):
        value = abs(series.b[Q * m])
        normalized = value / math.sqrt(Q * m)
        shape = (m / r_star0) ** eps * math.sqrt(Q * r_star0) * sigma
        report.add_row([m, value, normalized, shape, normalized / shape])
        worst = max(worst, normalized / shape)
    report.set_metadata("max_ratio", worst)
    return report


# --------------------------------------------------------------------------
# everything the functional equation needs for one denominator


def admissible_moduli(r: int) -> list[int]:
    """n | r with r / n squarefree and coprime to n."""
    return [n for n in divisors(r) if is_squarefree(r // n) and gcd(n, r // n) == 1]


# entries hold their source so a reused id never matches
_CONTRAGREDIENTS: dict[tuple, tuple[SeriesSource, dict[tuple[int, int], ContragredientSeries]]] = {}


def contragredients_for(
    f: SeriesSource, split: LevelSplit, n_coeffs: int, tol: float = DEFAULT_TOL
) -> dict[tuple[int, int], ContragredientSeries]:
    """f^chi | W_R' for every primitive chi mod n, n admissible for r_d, keyed by (n, index)."""
    key = (id(f), f.label, f.level, split.r_d, split.R_d, split.R_d_prime)
    entry = _CONTRAGREDIENTS.get(key)
    cached = entry[1] if entry is not None and entry[0] is f else None
    if cached is not None and all(s.source == "eigen" or s.length >= n_coeffs for s in cached.values()):
        return {k: s for k, s in cached.items()}

    N_g = split.dual_level
    out = {}
    for n in admissible_moduli(split.r_d):
        for chi in primitive_characters(n):
            g = TwistSource(f, chi, level=N_g)
            if split.R_d_prime == 1:
                b = g.series(1).a.astype(complex)
                out[(n, chi.index)] = ContragredientSeries(b, "eigen", N_g, chi=chi, ratio=1 + 0j, base=g)
                continue
            trial = apply_atkin_lehner_numeric(
                g, split.R_d_prime, min(n_coeffs, EIGEN_CHECK_TERMS), level=N_g, tol=tol, chi=chi
            )
            series = eigen_extension(trial, g, tol=tol)
            if series is None:
                series = trial
                if n_coeffs > trial.length:
                    series = apply_atkin_lehner_numeric(g, split.R_d_prime, n_coeffs, level=N_g, tol=tol, chi=chi)
            out[(n, chi.index)] = series
            logger.debug("contragredient of %s at W_%d: %s", g.label, split.R_d_prime, series.source)
    _CONTRAGREDIENTS[key] = (f, out)
    return dict(out)


def clear_contragredient_cache() -> None:
    _CONTRAGREDIENTS.clear()

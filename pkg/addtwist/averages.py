"""Averages of modular symbols over a/M, their smoothed versions and the limit series."""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from math import gcd
from typing import Optional, Protocol, Sequence

import numpy as np
from scipy import integrate

from addtwist.arith import divisors, euler_phi, factorize, level_split, mod_inv, moebius
from addtwist.characters import gauss_sum, generalized_gauss_sum, primitive_characters
from addtwist.errors import DomainError
from addtwist.expsums import kloosterman_many
from addtwist.forms import SeriesSource, divisor_bound_constant
from addtwist.ltwist import KERNEL_EPS, SymbolTable
from addtwist.report import Report
from addtwist.special import SmoothingKernel
from addtwist.twists import admissible_moduli, contragredients_for

logger = logging.getLogger(__name__)

BUMP_NODES = 2048
DECAY_ORDER = 4
CUTOFF_TOL = 1e-8
LIMIT_TOL = 2e-2


class SmoothingFamily(Protocol):
    """What A_h_pm needs from a weight function h on R/Z."""

    def h_hat(self, n) -> np.ndarray: ...

    def cutoff(self, amplitude: float, tol: float) -> int: ...


class BumpFamily:
    """h = 1_[-delta, x + delta] convolved with phi_delta, phi(t) = c exp(-1/(1 - 16 t^2)) on (-1/4, 1/4)."""

    def __init__(self, x: float, delta: float, nodes: int = BUMP_NODES):
        if not 0 <= x <= 1:
            raise DomainError(f"x must lie in [0, 1], got {x}")
        if not 0 < delta < 1:
            raise DomainError(f"delta must lie in (0, 1), got {delta}")
        if x + 2.5 * delta > 1:
            raise DomainError(f"x + 5 delta / 2 = {x + 2.5 * delta:.4g} exceeds 1; the bump would wrap onto itself")
        self.x = float(x)
        self.delta = float(delta)
        t, w = np.polynomial.legendre.leggauss(nodes)
        self._t = t / 4
        self._w = w / 4
        self._phi_nodes = self._raw_phi(self._t)
        self._c = 1 / float(np.dot(self._w, self._phi_nodes))

    @staticmethod
    def _raw_phi(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        inside = np.abs(t) < 0.25
        out[inside] = np.exp(-1 / (1 - (4 * t[inside]) ** 2))
        return out

    def phi(self, t):
        return self._c * self._raw_phi(t)

    def phi_hat(self, xi) -> np.ndarray:
        """int phi(t) e(-xi t) dt; real because phi is even."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        return np.cos(2 * np.pi * np.outer(xi, self._t)) @ (self._w * self._c * self._phi_nodes)

    def _Phi(self, u: float) -> float:
        if u <= -0.25:
            return 0.0
        if u >= 0.25:
            return 1.0
        value, _ = integrate.quad(lambda t: float(self.phi(t)), -0.25, u, epsabs=1e-14, epsrel=1e-13)
        return value

    def h(self, t: float) -> float:
        """h_delta(t) for t mod 1."""
        t = float(t) % 1.0
        x, delta = self.x, self.delta
        return sum(
            self._Phi((t + k + delta) / delta) - self._Phi((t + k - x - delta) / delta) for k in (-1, 0, 1)
        )

    def h_hat(self, n) -> np.ndarray:
        """Fourier coefficients int_0^1 h(t) e(-nt) dt."""
        n = np.atleast_1d(np.asarray(n, dtype=np.int64))
        x, delta = self.x, self.delta
        out = np.empty(n.shape, dtype=complex)
        zero = n == 0
        out[zero] = x + 2 * delta
        nz = n[~zero].astype(float)
        box = (np.exp(2j * np.pi * nz * delta) - np.exp(-2j * np.pi * nz * (x + delta))) / (2j * np.pi * nz)
        out[~zero] = box * self.phi_hat(nz * delta)
        return out

    def decay_constant(self, K: int, n_max: Optional[int] = None) -> tuple[float, int]:
        """max over 1 <= |n| <= n_max of |h_hat(n)| (|n| + 1) (delta (1 + |n|))^K and where it occurs."""
        n_max = n_max or math.ceil(64 / self.delta)
        n = np.arange(1, n_max + 1)
        scaled = np.abs(self.h_hat(n)) * (n + 1) * (self.delta * (1 + n)) ** K
        i = int(np.argmax(scaled))
        return float(scaled[i]), int(n[i])

    @cached_property
    def _decay(self) -> float:
        return self.decay_constant(DECAY_ORDER)[0]

    def cutoff(self, amplitude: float, tol: float = CUTOFF_TOL) -> int:
        """N with sum over |n| > N of |h_hat(n)| amplitude below tol."""
        K = DECAY_ORDER
        # sum_{n > N} C (n + 1)^(-1-K) delta^(-K) <= C delta^(-K) (N + 1)^(-K) / K, twice for both signs
        scale = 2 * amplitude * self._decay / (K * tol)
        return max(1, math.ceil(scale ** (1 / K) / self.delta))

    def __repr__(self) -> str:
        return f"BumpFamily(x={self.x}, delta={self.delta})"


# --------------------------------------------------------------------------
# averages of symbols


def _symbols_mod(table: SymbolTable, M: int) -> np.ndarray:
    """L(1, f, a/M) for a = 0..M-1."""
    return np.array([table.L(a, M) for a in range(M)])


def G_M_direct(f: SeriesSource, x: float, M: int, table: Optional[SymbolTable] = None) -> tuple[float, complex]:
    """(1/M) sum over 0 <= a <= min(Mx, M - 1) of <a/M>^+ and <a/M>^-."""
    if M < 1:
        raise DomainError(f"M must be positive, got {M}")
    if not 0 <= x <= 1:
        raise DomainError(f"x must lie in [0, 1], got {x}")
    table = table or SymbolTable(f)
    top = min(math.floor(M * x + 1e-9), M - 1)
    plus, minus = 0.0, 0j
    for a in range(top + 1):
        pair = table.symbol(a, M)
        plus += pair.plus
        minus += pair.minus
    return plus / M, minus / M


def alpha_all(f: SeriesSource, M: int, table: Optional[SymbolTable] = None) -> np.ndarray:
    """alpha(n, M) for n = 0..M-1."""
    table = table or SymbolTable(f)
    return np.fft.fft(_symbols_mod(table, M)) / M


def alpha(f: SeriesSource, n: int, M: int, table: Optional[SymbolTable] = None) -> complex:
    """(1/M) sum over a mod M of e(-na/M) L(1, f, a/M)."""
    if M < 1:
        raise DomainError(f"M must be positive, got {M}")
    return complex(alpha_all(f, M, table)[n % M])


def alpha_main_term(
    f: SeriesSource, n: int, M: int, X: float, kernel: Optional[SmoothingKernel] = None, eps: float = KERNEL_EPS
) -> complex:
    """sum over l = n mod M of a(l)/l V(X / (2 pi l))."""
    kernel = kernel or SmoothingKernel()
    length = max(1, math.ceil(X / (2 * math.pi * kernel.cutoff(eps))))
    start = n % M or M
    ells = np.arange(start, length + 1, M)
    if len(ells) == 0:
        return 0j
    a = f.series(length).a
    return complex(np.sum(a[ells] / ells * kernel.V_array(X / (2 * math.pi * ells))))


def alpha_expansion(
    f: SeriesSource, n: int, M: int, X: float, kernel: Optional[SmoothingKernel] = None, eps: float = KERNEL_EPS
) -> tuple[complex, complex]:
    """(main, dual) with alpha(n, M) = main - dual.

    Each denominator d | M uses the balance X / (M_d sqrt(R_d')), so the main sums
    of all d collapse to one progression and the dual sums carry Kloosterman sums
    mod M_d and generalized Gauss sums mod r_d.
    """
    kernel = kernel or SmoothingKernel()
    main = alpha_main_term(f, n, M, X, kernel, eps)
    y_cut = kernel.cutoff(eps)
    dual = 0j
    for d in divisors(M):
        split = level_split(f.level, d)
        Md, r, Rp = split.M_d, split.r_d, split.R_d_prime
        Y = Md * Md * Rp / (2 * math.pi * X)
        length = max(1, math.ceil(Y / y_cut))
        series = contragredients_for(f, split, length)
        ells = np.arange(1, length + 1)
        shifted = ells * (0 if Md == 1 else mod_inv(Rp, Md)) % Md
        kloost = kloosterman_many(n, shifted, Md)
        weights = kernel.V_array(Y / ells) / ells * kloost
        inner = 0j
        for nn in admissible_moduli(r):
            mu = moebius(r // nn)
            inv = 0 if nn == 1 else mod_inv(r // nn, nn)
            for chi in primitive_characters(nn):
                b = series[(nn, chi.index)].coefficients(length)
                coeff = gauss_sum(chi.conj()) * chi(-inv * Md * Md) * generalized_gauss_sum(chi.induce(r), n)
                inner += mu * coeff * np.dot(b[1:], weights)
        dual += inner / euler_phi(r)
    return main, dual / M


def A_h_pm(
    f: SeriesSource, family: SmoothingFamily, M: int, table: Optional[SymbolTable] = None, tol: float = CUTOFF_TOL
) -> tuple[complex, complex]:
    """sum over n of h_hat(n) (alpha(-n, M) +- alpha(n, M)), truncated where the Fourier tail is below tol."""
    alphas = alpha_all(f, M, table)
    amplitude = float(np.max(np.abs(alphas)))
    N = family.cutoff(amplitude, tol)
    n = np.arange(-N, N + 1)
    weights = family.h_hat(n)
    H = np.zeros(M, dtype=complex)
    np.add.at(H, n % M, weights)
    r = np.arange(M)
    back = alphas[(-r) % M]
    plus = complex(np.dot(H, back + alphas))
    minus = complex(np.dot(H, back - alphas))
    logger.debug("A_h for M=%d truncated at |n| <= %d", M, N)
    return plus, minus


def weighted_symbol_average(
    f: SeriesSource, family: BumpFamily, M: int, table: Optional[SymbolTable] = None
) -> tuple[float, complex]:
    """(1/M) sum over a mod M of h(a/M) <a/M>^+-."""
    table = table or SymbolTable(f)
    plus, minus = 0.0, 0j
    for a in range(M):
        weight = family.h(a / M)
        if weight == 0:
            continue
        pair = table.symbol(a, M)
        plus += weight * pair.plus
        minus += weight * pair.minus
    return plus / M, minus / M


# --------------------------------------------------------------------------
# limits, schedules and the experiment


@dataclass
class LimitValue:
    plus: float
    minus_im: float
    terms: int
    tail_plus: float
    tail_minus: float
    rms_tail_plus: float
    rms_tail_minus: float

    @property
    def minus(self) -> complex:
        return 1j * self.minus_im


def limit_tail(N: int) -> float:
    """Certified bound on the plus tail past N: 3 (log N + 3) / (2 pi sqrt N).

    |a(n)| <= sigma_0(n) sqrt(n) and sum_{n <= t} sigma_0(n) <= t (log t + 1) give
    sum_{n > N} sigma_0(n) n^(-3/2) <= 3 (log N + 3) / sqrt(N) by partial summation.
    The minus series has |cos - 1| <= 2 and twice this bound.
    """
    if N < 1:
        raise DomainError(f"N must be positive, got {N}")
    return 3 * (math.log(N) + 3) / (2 * math.pi * math.sqrt(N))


def limit_terms(tol: float) -> int:
    """Smallest N whose certified minus tail 2 * limit_tail(N) is at most tol."""
    if tol <= 0:
        raise DomainError(f"limit tolerance must be positive, got {tol}")
    hi = 1
    while 2 * limit_tail(hi) > tol:
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if 2 * limit_tail(mid) > tol:
            lo = mid
        else:
            hi = mid
    return hi


def limit_series(f: SeriesSource, x: float, N: Optional[int] = None, tol: float = LIMIT_TOL) -> LimitValue:
    """(1/2 pi) sum a(n) sin(2 pi n x)/n^2 and its cosine partner.

    Without N the series is cut where the certified tails are below tol.
    """
    if N is None:
        N = limit_terms(tol)
    if N < 1:
        raise DomainError(f"N must be positive, got {N}")
    n = np.arange(1, N + 1)
    a = f.series(N).a[1:].astype(float)
    angle = 2 * np.pi * np.mod(n * x, 1.0)
    plus = float(np.sum(a * np.sin(angle) / n**2)) / (2 * math.pi)
    minus_im = -float(np.sum(a * (np.cos(angle) - 1) / n**2)) / (2 * math.pi)
    tail = limit_tail(N)
    # random-sign heuristic; mean sin^2 is 1/2 and mean (cos - 1)^2 is 3/2
    rms = divisor_bound_constant(0.25) * math.sqrt(2 / 3) * N ** (-0.75) / (2 * math.pi)
    logger.debug("limit series at x=%.6g cut at N=%d, certified tail %.3e", x, N, tail)
    return LimitValue(plus, minus_im, N, tail, 2 * tail, rms, math.sqrt(3) * rms)


def _square_level_primes(M: int, q: int) -> list[int]:
    return [p for p in factorize(gcd(q, M)).primes if q % (p * p) == 0]


def delta_schedule(M: int, q: int) -> float:
    """M^(-3/4) prod p^(1/4) over p | (q, M) with p^2 | q, clamped into (M^(-7/8), 1)."""
    if M <= 1:
        raise DomainError(f"delta schedule needs M > 1, got {M}")
    delta = M ** (-0.75) * math.prod(p**0.25 for p in _square_level_primes(M, q))
    return min(max(delta, 1.001 * M ** (-0.875)), 0.999)


def predicted_scale(M: int, q: int) -> float:
    """M^(-1/4) q^(1/4) prod p^(1/2) over p | (q, M) with p^2 | q."""
    return M ** (-0.25) * q**0.25 * math.prod(p**0.5 for p in _square_level_primes(M, q))


def lemma_envelope(M: int, q: int, delta: float) -> float:
    """delta M^(1/2) q^(1/4) prod p^(1/4) over p | M with ord_p M < ord_p q."""
    fq = factorize(q)
    extra = math.prod(p**0.25 for p, e in factorize(M).factors if e < fq.ord(p))
    return delta * math.sqrt(M) * q**0.25 * extra


def fourier_decay_report(family: BumpFamily, K_list: Sequence[int] = (1, 2), n_max: Optional[int] = None) -> Report:
    report = Report(
        name="fourier-decay",
        columns=["K", "C_K", "argmax_n"],
        metadata={"x": family.x, "delta": family.delta},
    )
    for K in K_list:
        const, where = family.decay_constant(K, n_max)
        report.add_row([K, const, where])
    return report


@dataclass
class ConvergenceRow:
    M: int
    delta_M: float
    G_plus: float
    G_minus: complex
    limit_plus: float
    limit_minus: complex
    err_plus: float = field(init=False)
    err_minus: float = field(init=False)
    predicted_error_scale: float = 0.0

    def __post_init__(self):
        self.err_plus = abs(self.G_plus - self.limit_plus)
        self.err_minus = abs(self.G_minus - self.limit_minus)

    def to_row(self) -> list:
        return [
            self.M,
            self.delta_M,
            self.G_plus,
            self.G_minus.imag,
            self.limit_plus,
            self.limit_minus.imag,
            self.err_plus,
            self.err_minus,
            self.predicted_error_scale,
        ]


CONVERGENCE_COLUMNS = [
    "M", "delta", "G_plus", "G_minus_im", "limit_plus", "limit_minus_im", "err_plus", "err_minus", "pred_scale",
]


def convergence_experiment(
    f: SeriesSource,
    x: float,
    M_list: Sequence[int],
    table: Optional[SymbolTable] = None,
    limit_terms: Optional[int] = None,
    limit_tol: float = LIMIT_TOL,
    limit: Optional[LimitValue] = None,
) -> list[ConvergenceRow]:
    """G_M^+-(x) against the limit series for each M; the series is cut by limit_terms or limit_tol unless given."""
    if not M_list:
        raise DomainError("M_list must not be empty")
    if list(M_list) != sorted(M_list):
        raise DomainError("M_list must be ascending")
    table = table or SymbolTable(f)
    limit = limit or limit_series(f, x, limit_terms, limit_tol)
    rows = []
    for M in M_list:
        G_plus, G_minus = G_M_direct(f, x, M, table)
        delta = delta_schedule(M, f.level) if M > 1 else 1.0
        row = ConvergenceRow(
            M, delta, G_plus, G_minus, limit.plus, limit.minus, predicted_error_scale=predicted_scale(M, f.level)
        )
        logger.info("M=%d: err+ %.3e, err- %.3e", M, row.err_plus, row.err_minus)
        rows.append(row)
    return rows


def convergence_report(
    f: SeriesSource, x: float, rows: Sequence[ConvergenceRow], limit: Optional[LimitValue] = None
) -> Report:
    report = Report(
        name="converge",
        columns=list(CONVERGENCE_COLUMNS),
        metadata={"form": f.label, "level": f.level, "x": x},
    )
    if limit is not None:
        report.set_metadata("limit_terms", limit.terms)
        report.set_metadata("limit_tail_plus", limit.tail_plus)
        report.set_metadata("limit_tail_minus", limit.tail_minus)
        report.set_metadata("limit_rms_tail_plus", limit.rms_tail_plus)
        report.set_metadata("limit_rms_tail_minus", limit.rms_tail_minus)
    for row in rows:
        report.add_row(row.to_row())
    return report

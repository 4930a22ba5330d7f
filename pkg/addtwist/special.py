"""Upper incomplete gamma function and the smoothing kernel V of the approximate functional equation."""

import math
import sys
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Union

import numpy as np
from scipy import integrate, optimize, special
from scipy.interpolate import CubicSpline

from addtwist.errors import DomainError, PrecisionError

ArrayLike = Union[float, np.ndarray]

_TINY = sys.float_info.min / sys.float_info.epsilon


def gammainc_upper(s: complex, x: ArrayLike, accuracy: float = 1e-15, max_iteration: int = 1000) -> np.ndarray:
    """Gamma(s, x) for complex s and real x > 0, elementwise in x.

    Series for the lower function when x < |s| + 4, modified Lentz continued
    fraction otherwise.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0):
        raise DomainError("incomplete gamma needs x > 0")
    s = complex(s)
    if s.imag == 0 and s.real > 0:
        # real parameter: regularized scipy routine
        return special.gammaincc(s.real, x) * special.gamma(s.real) + 0j

    out = np.empty(x.shape, dtype=complex)
    use_series = x < abs(s) + 4
    if np.any(use_series):
        if s.imag == 0 and s.real <= 0 and float(s.real).is_integer():
            raise DomainError(f"Gamma(s, x) series is undefined at s = {s.real:g}")
        out[use_series] = special.gamma(s) - _lower_series(s, x[use_series], accuracy, max_iteration)
    if np.any(~use_series):
        out[~use_series] = _upper_fraction(s, x[~use_series], accuracy, max_iteration)
    return out


def _lower_series(s: complex, x: np.ndarray, accuracy: float, max_iteration: int) -> np.ndarray:
    ap = np.full(x.shape, s, dtype=complex)
    term = np.full(x.shape, 1 / s, dtype=complex)
    total = term.copy()
    for _ in range(max_iteration):
        ap += 1
        term *= x / ap
        total += term
        if np.all(np.abs(term) < np.abs(total) * accuracy):
            return total * np.exp(-x + s * np.log(x))
    raise PrecisionError("incomplete gamma series did not converge")


def _upper_fraction(s: complex, x: np.ndarray, accuracy: float, max_iteration: int) -> np.ndarray:
    b = x + 1 - s
    c = np.full(x.shape, 1 / _TINY, dtype=complex)
    d = 1 / b
    h = d.copy()
    for i in range(1, max_iteration + 1):
        an = -i * (i - s)
        b = b + 2
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1) < accuracy):
            return np.exp(-x + s * np.log(x)) * h
    raise PrecisionError("incomplete gamma continued fraction did not converge")


@dataclass(frozen=True)
class SmoothingKernel:
    """V(y) = (1/2 pi i) int_(sigma) y^u G(u) Gamma(u) du with G(u) = exp((u/width)^2).

    The vertical integral is a trapezoid sum over |Im u| <= T with step h.
    For y > 1 the line moves to Re u = left_sigma and the residue 1 at u = 0 is added.
    """

    sigma: float = 2.0
    T: float = 24.0
    h: float = 0.05
    width: float = 8.0
    left_sigma: float = -0.5

    def G(self, u):
        return np.exp((np.asarray(u) / self.width) ** 2)

    def _line(self, sigma: float, step: float) -> tuple[np.ndarray, np.ndarray]:
        n = int(round(self.T / step))
        t = step * np.arange(-n, n + 1)
        u = sigma + 1j * t
        return u, self.G(u) * special.gamma(u) * step / (2 * math.pi)

    @cached_property
    def _lines(self):
        return {
            "right": self._line(self.sigma, self.h),
            "left": self._line(self.left_sigma, self.h),
        }

    def _trapezoid(self, y: np.ndarray, side: str, stride: int = 1) -> np.ndarray:
        u, w = self._lines[side]
        u, w = u[::stride], w[::stride] * stride
        return (np.exp(np.outer(np.log(y), u)) @ w).real

    def V(self, y: float) -> tuple[float, float]:
        """V(y) and an error estimate from the coarser trapezoid rule."""
        if y <= 0:
            raise DomainError(f"V needs y > 0, got {y}")
        ys = np.array([float(y)])
        side = "left" if y > 1 else "right"
        fine = self._trapezoid(ys, side)[0]
        coarse = self._trapezoid(ys, side, stride=2)[0]
        base = 1.0 if side == "left" else 0.0
        return base + fine, abs(fine - coarse)

    def V_direct(self, ys: np.ndarray) -> np.ndarray:
        """Trapezoid values for an array of positive y."""
        ys = np.asarray(ys, dtype=float)
        out = np.empty(ys.shape)
        small = ys <= 1
        if np.any(small):
            out[small] = self._trapezoid(ys[small], "right")
        if np.any(~small):
            out[~small] = 1.0 + self._trapezoid(ys[~small], "left")
        return out

    # tabulated in log y between table_min and TABLE_MAX; above TABLE_MAX the expansion in 1/y is used
    TABLE_MAX = 1e4
    TABLE_STEP = 0.004
    TABLE_FLOOR = 1e-20

    @cached_property
    def table_min(self) -> float:
        """Largest y0 with V(y) < TABLE_FLOOR for every y < y0.

        log tau is normal with deviation sqrt(2)/width under the density K, so
        V(y) <= P(tau < L y) + exp(-L); L = 50 leaves exp(-50) of the floor.
        """
        spread = math.sqrt(2) / self.width
        L = 50.0
        z = special.ndtri(self.TABLE_FLOOR - math.exp(-L))
        return math.exp(spread * z - math.log(L))

    @cached_property
    def _table(self) -> CubicSpline:
        logs = np.arange(math.log(self.table_min), math.log(self.TABLE_MAX) + self.TABLE_STEP, self.TABLE_STEP)
        return CubicSpline(logs, self.V_direct(np.exp(logs)))

    def large_y(self, y: ArrayLike, terms: int = 5) -> np.ndarray:
        """Expansion V(y) = sum_j (-1)^j G(-j) / (j! y^j) for large y."""
        y = np.asarray(y, dtype=float)
        total = np.zeros_like(y)
        for j in range(terms):
            total += (-1) ** j * math.exp((j / self.width) ** 2) / (math.factorial(j) * y**j)
        return total

    def V_array(self, ys: ArrayLike) -> np.ndarray:
        """Vectorized V through the cached spline table."""
        ys = np.asarray(ys, dtype=float)
        out = np.zeros(ys.shape)
        mid = (ys >= self.table_min) & (ys <= self.TABLE_MAX)
        out[mid] = self._table(np.log(ys[mid]))
        high = ys > self.TABLE_MAX
        out[high] = self.large_y(ys[high])
        return out

    def density(self, tau: ArrayLike) -> np.ndarray:
        """K(tau) with int K(tau) tau^{-u} dtau/tau = G(u)."""
        tau = np.asarray(tau, dtype=float)
        A = self.width
        return A / (2 * math.sqrt(math.pi)) * np.exp(-(A**2) * np.log(tau) ** 2 / 4)

    def V_positive(self, y: float) -> float:
        """V(y) = int_0^inf K(tau) exp(-tau / y) dtau / tau by adaptive quadrature."""
        A = self.width
        spread = 12 / A

        def integrand(v):
            return float(self.density(math.exp(v))) * math.exp(-math.exp(v) / y)

        value, _ = integrate.quad(integrand, -spread, spread, epsabs=1e-15, epsrel=1e-13, limit=200)
        return value

    def cutoff(self, eps: float) -> float:
        """y_cut with V(y) < eps for every y < y_cut."""
        return _kernel_cutoff(self, eps)


@lru_cache(maxsize=64)
def _kernel_cutoff(kernel: SmoothingKernel, eps: float) -> float:
    if eps >= 0.5:
        raise DomainError("kernel cutoff tolerance must be below 1/2")

    def excess(v):
        return math.log(max(kernel.V(math.exp(v))[0], 1e-300)) - math.log(eps)

    lo = math.log(kernel.table_min)
    if excess(lo) >= 0:
        return kernel.table_min
    return math.exp(optimize.brentq(excess, lo, 0.0, xtol=1e-6))

"""Newform coefficient sources and evaluation on the upper half-plane."""

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Union

import numpy as np

from addtwist.arith import divisor_counts, factorize, smallest_prime_factors
from addtwist.characters import DirichletCharacter
from addtwist.errors import DataError, DomainError, PrecisionError, SpecError, TruncationError

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"

# above this many terms a single evaluation is not worth attempting
MAX_EVAL_TERMS = 50_000_000


@dataclass(frozen=True, eq=False)
class CoefficientSeries:
    """Fourier coefficients a(1..N) of a cusp form; ``a[0]`` is always 0."""

    label: str
    level: int
    weight: int
    a: np.ndarray
    character: Optional[tuple[int, int]] = None
    exact: bool = True

    @property
    def length(self) -> int:
        return len(self.a) - 1

    @property
    def normalized(self) -> bool:
        return self.length >= 1 and self.a[1] == 1

    def __getitem__(self, n: int):
        return self.a[n]

    def series(self, n: int) -> "CoefficientSeries":
        """The first n coefficients; raises when fewer are stored."""
        if n > self.length:
            raise TruncationError(f"series {self.label} stores {self.length} coefficients", required=n)
        return self if n == self.length else self.truncate(n)

    def truncate(self, n: int) -> "CoefficientSeries":
        return CoefficientSeries(
            self.label, self.level, self.weight, self.a[: n + 1], self.character, self.exact
        )

    def nebentypus(self) -> Optional[DirichletCharacter]:
        if self.character is None:
            return None
        return DirichletCharacter.from_index(*self.character)


class SeriesSource(Protocol):
    """Anything that can hand out a prefix of a q-expansion."""

    label: str
    level: int
    weight: int

    def series(self, n: int) -> CoefficientSeries: ...


# --------------------------------------------------------------------------
# eta quotients


@dataclass(frozen=True)
class EtaQuotientSpec:
    """prod_m eta(m z)^{e_m} at a given level."""

    components: tuple[tuple[int, int], ...]
    level: int

    @property
    def weight(self) -> int:
        return sum(e for _, e in self.components) // 2

    @property
    def offset(self) -> int:
        """Exponent of the leading power of q."""
        return sum(m * e for m, e in self.components) // 24

    def validate(self) -> None:
        total = sum(e for _, e in self.components)
        if total <= 0 or total % 2:
            raise SpecError(f"exponents sum to {total}; an even positive total is required")
        shift = sum(m * e for m, e in self.components)
        if shift % 24:
            raise SpecError(f"q-expansion offset {shift}/24 is not integral")
        if shift <= 0:
            raise SpecError("eta quotient is not cuspidal at infinity")
        for m, _ in self.components:
            if m < 1 or self.level % m:
                raise SpecError(f"multiplier {m} does not divide the level {self.level}")

    def __str__(self) -> str:
        body = ",".join(f"{m}^{e}" for m, e in self.components)
        return f"{body}@{self.level}"


_ETA_TOKEN = re.compile(r"^\s*(\d+)\^(-?\d+)\s*$")


def parse_eta_spec(text: str) -> EtaQuotientSpec:
    """Parse ``m^e,m^e@level``."""
    body, sep, level = text.partition("@")
    if not sep or not level.strip().isdigit():
        raise SpecError(f"eta spec {text!r} lacks '@<level>'")
    components = []
    for token in body.split(","):
        match = _ETA_TOKEN.match(token)
        if not match:
            raise SpecError(f"bad eta factor {token!r} in {text!r}")
        components.append((int(match.group(1)), int(match.group(2))))
    spec = EtaQuotientSpec(tuple(components), int(level))
    spec.validate()
    return spec


def _pentagonal_terms(degree: int) -> list[tuple[int, int]]:
    """(exponent, sign) of prod_k (1 - q^k) up to q^degree."""
    terms = [(0, 1)]
    j = 1
    while True:
        g1, g2 = j * (3 * j - 1) // 2, j * (3 * j + 1) // 2
        if g1 > degree:
            break
        sign = -1 if j % 2 else 1
        terms.append((g1, sign))
        if g2 <= degree:
            terms.append((g2, sign))
        j += 1
    return terms


def _widen(series: np.ndarray, factor: int) -> np.ndarray:
    # switch to Python integers before int64 could overflow
    if series.dtype == object:
        return series
    peak = int(np.max(np.abs(series))) if len(series) else 0
    if peak * factor >= 2**62:
        return series.astype(object)
    return series


def eta_quotient_coeffs(spec: EtaQuotientSpec, N: int, label: Optional[str] = None) -> CoefficientSeries:
    """Exact coefficients a(1..N) of an eta quotient."""
    spec.validate()
    offset = spec.offset
    degree = max(N - offset, 0)
    series = np.zeros(degree + 1, dtype=np.int64)
    series[0] = 1
    for m, e in spec.components:
        terms = [(m * g, s) for g, s in _pentagonal_terms(degree // m)]
        for _ in range(abs(e)):
            series = _widen(series, len(terms))
            if e > 0:
                product = np.zeros_like(series)
                for shift, sign in terms:
                    if sign > 0:
                        product[shift:] += series[: degree + 1 - shift]
                    else:
                        product[shift:] -= series[: degree + 1 - shift]
                series = product
            else:
                series = _divide(series, terms)

    a = np.zeros(N + 1, dtype=series.dtype)
    if N >= offset:
        a[offset:] = series[: N - offset + 1]
    if a.dtype == object and all(abs(int(x)) < 2**62 for x in a):
        a = a.astype(np.int64)
    return CoefficientSeries(label or f"eta[{spec}]", spec.level, spec.weight, a)


def _divide(series: np.ndarray, terms: list[tuple[int, int]]) -> np.ndarray:
    """series / (sparse unit series) by the sequential recurrence."""
    values = [int(x) for x in series]
    tail = [(shift, sign) for shift, sign in terms if shift > 0]
    for i in range(len(values)):
        acc = values[i]
        for shift, sign in tail:
            if shift > i:
                break
            acc -= sign * values[i - shift]
        values[i] = acc
    return np.array(values, dtype=object)


class EtaForm:
    """An eta quotient whose exact coefficients are extended on demand."""

    def __init__(self, spec: EtaQuotientSpec, label: Optional[str] = None, max_terms: int = 4_000_000):
        spec.validate()
        self.spec = spec
        self.label = label or f"eta[{spec}]"
        self.level = spec.level
        self.weight = spec.weight
        self.max_terms = max_terms
        self._cache: Optional[CoefficientSeries] = None

    def series(self, n: int) -> CoefficientSeries:
        if n > self.max_terms:
            raise TruncationError(f"{self.label} is capped at {self.max_terms} coefficients", required=n)
        if self._cache is None or self._cache.length < n:
            size = min(max(n, 2 * (self._cache.length if self._cache else 0), 64), self.max_terms)
            logger.debug("extending %s to %d coefficients", self.label, size)
            self._cache = eta_quotient_coeffs(self.spec, size, self.label)
        return self._cache.series(n)

    def __repr__(self) -> str:
        return f"EtaForm({self.spec})"


# --------------------------------------------------------------------------
# coefficient files


def load_coeffs(path: Union[str, Path], fmt: str = "text") -> CoefficientSeries:
    """Read a coefficient file in the line-oriented text format or as JSON."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"coefficient file {path} does not exist")
    if fmt == "json" or (fmt == "auto" and path.suffix == ".json"):
        series = _load_json(path)
    else:
        series = _load_text(path)
    _report_invariants(series)
    return series


def _load_text(path: Path) -> CoefficientSeries:
    header: dict[str, str] = {}
    values: list[str] = []
    in_coeffs = False
    character = None
    expected = 1
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                words = line[1:].split()
                if len(words) >= 2 and words[0] == "newform" and "label" not in header:
                    header["label"] = words[1]
                continue
            if not in_coeffs:
                key, _, rest = line.partition(" ")
                if key == "coeffs":
                    in_coeffs = True
                elif key in ("level", "weight"):
                    header[key] = rest.strip()
                elif key == "character":
                    character = _parse_character(rest, lineno)
                else:
                    raise DataError(f"unknown header field {key!r}", line=lineno)
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataError("expected '<n> <a_n>'", line=lineno)
            try:
                n = int(parts[0])
            except ValueError:
                raise DataError(f"bad index {parts[0]!r}", line=lineno) from None
            if n < expected:
                raise DataError(f"duplicate index {n}", line=lineno)
            if n > expected:
                raise DataError(f"non-contiguous index {n}, expected {expected}", line=lineno)
            values.append(parts[1])
            expected += 1

    for key in ("label", "level", "weight"):
        if key not in header:
            raise DataError(f"missing header field {key!r} in {path}")
    if not in_coeffs or not values:
        raise DataError(f"no coefficients in {path}")
    try:
        level, weight = int(header["level"]), int(header["weight"])
    except ValueError:
        raise DataError(f"level and weight must be integers in {path}") from None
    return _build_series(header["label"], level, weight, values, character)


def _parse_character(text: str, lineno: int) -> tuple[int, int]:
    """'<modulus> <index>' of a character header line."""
    try:
        modulus, index = (int(word) for word in text.split())
    except ValueError:
        raise DataError(f"expected 'character <modulus> <index>', got {text.strip()!r}", line=lineno) from None
    if modulus < 1 or index < 0:
        raise DataError(f"bad character {modulus} {index}", line=lineno)
    return modulus, index


def _load_json(path: Path) -> CoefficientSeries:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    for key in ("label", "level", "weight", "coeffs"):
        if key not in data:
            raise DataError(f"missing field {key!r} in {path}")
    if not data["coeffs"]:
        raise DataError(f"no coefficients in {path}")
    character = tuple(data["character"]) if data.get("character") else None
    return _build_series(
        data["label"], int(data["level"]), int(data["weight"]), [str(v) for v in data["coeffs"]], character
    )


def _build_series(label, level, weight, values, character) -> CoefficientSeries:
    try:
        parsed = [int(v) for v in values]
        a = np.array([0] + parsed, dtype=np.int64)
        exact = True
    except ValueError:
        try:
            a = np.array([0.0] + [float(v) for v in values])
        except ValueError as exc:
            raise DataError(f"unparseable coefficient: {exc}") from None
        exact = False
    return CoefficientSeries(label, level, weight, a, character, exact)


def _report_invariants(series: CoefficientSeries) -> None:
    report = verify_hecke(series)
    for name in report.failed_relations():
        check = report.checks[name]
        logger.warning(
            "%s: %s relation fails %d times, first at %s", series.label, name, check.failed, check.first_failure
        )


# --------------------------------------------------------------------------
# Hecke relations


@dataclass
class RelationCheck:
    passed: int = 0
    failed: int = 0
    first_failure: Optional[tuple] = None

    def record(self, ok: bool, where: tuple):
        if ok:
            self.passed += 1
        else:
            self.failed += 1
            if self.first_failure is None:
                self.first_failure = where


@dataclass
class HeckeReport:
    """Pass/fail counts per relation class."""

    label: str
    length: int
    checks: dict[str, RelationCheck] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failed_relations()

    def failed_relations(self) -> list[str]:
        return [name for name, check in self.checks.items() if check.failed]

    def summary(self) -> str:
        parts = [f"{name}: {c.passed} passed, {c.failed} failed" for name, c in self.checks.items()]
        return "; ".join(parts)


RELATIONS = ("normalized", "coprime", "prime_power", "bad_prime", "square_vanishing", "deligne")


def verify_hecke(series: CoefficientSeries, nebentypus: Optional[DirichletCharacter] = None) -> HeckeReport:
    """Check multiplicativity, prime-power recursions and the Deligne bound."""
    N, q, k = series.length, series.level, series.weight
    report = HeckeReport(series.label, N, {name: RelationCheck() for name in RELATIONS})
    if nebentypus is None:
        nebentypus = series.nebentypus()
    if series.exact:
        a = [int(x) for x in series.a]

        def same(x, y):
            return x == y

    else:
        a = [complex(x) for x in series.a]

        def same(x, y):
            return abs(x - y) <= 1e-6 * (1 + abs(y))

    if N >= 1:
        report.checks["normalized"].record(same(a[1], 1), (1,))
    if N < 2:
        return report

    spf = smallest_prime_factors(N)
    for n in range(2, N + 1):
        p = int(spf[n])
        pe, rest = 1, n
        while rest % p == 0:
            rest //= p
            pe *= p
        if rest > 1:
            report.checks["coprime"].record(same(a[n], a[pe] * a[rest]), (pe, rest))

    for p in range(2, N + 1):
        if spf[p] != p:
            continue
        if q % (p * p) == 0:
            report.checks["square_vanishing"].record(same(a[p], 0), (p,))
        powers = [1, p]
        while powers[-1] * p <= N:
            powers.append(powers[-1] * p)
        for j in range(1, len(powers) - 1):
            lhs = a[powers[j + 1]]
            if q % p:
                psi = _character_value(nebentypus, p, series.exact)
                rhs = a[p] * a[powers[j]] - psi * p ** (k - 1) * a[powers[j - 1]]
                report.checks["prime_power"].record(same(lhs, rhs), (p, j + 1))
            else:
                report.checks["bad_prime"].record(same(lhs, a[p] * a[powers[j]]), (p, j + 1))

    sigma0 = divisor_counts(N)
    for n in range(1, N + 1):
        bound = sigma0[n] * n ** ((k - 1) / 2)
        report.checks["deligne"].record(abs(a[n]) <= bound * (1 + 1e-9), (n,))
    return report


def _character_value(chi: Optional[DirichletCharacter], p: int, exact: bool):
    if chi is None:
        return 1
    value = chi(p)
    if exact and abs(value.imag) < 1e-12:
        return int(round(value.real))
    return value


def divisor_bound_constant(eps: float) -> float:
    """C with sigma_0(n) <= C n^eps for every n >= 1."""
    if eps <= 0:
        raise DomainError("divisor bound needs eps > 0")
    const = 1.0
    p = 2
    while p < 2 ** (1 / eps):
        if all(p % d for d in range(2, int(p**0.5) + 1)):
            best, j = 1.0, 1
            while True:
                value = (j + 1) / p ** (j * eps)
                if value < best:
                    break
                best = value
                j += 1
            const *= best
        p += 1
    return const


# --------------------------------------------------------------------------
# evaluation


def tail_bound(N: int, y: float, k: int) -> float:
    """Bound on sum_{n > N} sigma_0(n) n^{(k-1)/2} e^{-2 pi n y}, using sigma_0(n) <= n."""
    alpha = (k + 1) / 2
    c = 2 * math.pi * y
    ratio = math.exp(alpha / N - c)
    if ratio >= 1:
        return math.inf
    return math.exp(alpha * math.log(N) - c * N) * ratio / (1 - ratio)


def required_terms(y: float, k: int, eps: float) -> int:
    """Smallest N whose tail bound at height y is below eps."""
    if y <= 0:
        raise DomainError(f"height must be positive, got {y}")
    if eps <= 0:
        raise DomainError("tolerance must be positive")
    alpha = (k + 1) / 2
    lo = max(1, int(math.ceil(2 * alpha / (2 * math.pi * y))))
    if tail_bound(lo, y, k) < eps:
        return _bisect_terms(1, lo, y, k, eps)
    hi = 2 * lo
    while tail_bound(hi, y, k) >= eps:
        hi *= 2
        if hi > MAX_EVAL_TERMS:
            raise PrecisionError(
                f"height {y:.3g} needs more than {MAX_EVAL_TERMS} terms for tolerance {eps:.3g}",
                suggestion="evaluate higher up or relax the tolerance",
            )
    return _bisect_terms(hi // 2, hi, y, k, eps)


def _bisect_terms(lo: int, hi: int, y: float, k: int, eps: float) -> int:
    # tail_bound is decreasing on [lo, hi] and below eps at hi
    while lo < hi:
        mid = (lo + hi) // 2
        if tail_bound(mid, y, k) < eps:
            hi = mid
        else:
            lo = mid + 1
    return hi


def evaluate_form(source: SeriesSource, z: complex, eps: float = 1e-12) -> tuple[complex, float]:
    """f(z) with a certified truncation bound; returns (value, bound)."""
    y = complex(z).imag
    if y <= 0:
        raise DomainError(f"z = {z} is not in the upper half-plane")
    N = required_terms(y, source.weight, eps)
    coeffs = source.series(N).a
    n = np.arange(1, N + 1)
    value = complex(np.dot(coeffs[1:], np.exp(2j * np.pi * n * z)))
    return value, tail_bound(N, y, source.weight)


def evaluate_many(
    source: SeriesSource, zs: np.ndarray, eps: float = 1e-12, block: int = 8192
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized evaluate_form over many points; each point is truncated at its own height."""
    zs = np.asarray(zs, dtype=complex)
    if np.any(zs.imag <= 0):
        raise DomainError("all points must lie in the upper half-plane")
    k = source.weight
    needs = np.array([required_terms(y, k, eps) for y in zs.imag])
    coeffs = source.series(int(needs.max())).a
    values = np.zeros(len(zs), dtype=complex)
    bounds = np.array([tail_bound(int(N), y, k) for N, y in zip(needs, zs.imag)])

    order = np.argsort(needs)
    for start in range(0, len(order), 128):
        idx = order[start : start + 128]
        N = int(needs[idx].max())
        for lo in range(1, N + 1, block):
            hi = min(lo + block, N + 1)
            n = np.arange(lo, hi)
            values[idx] += np.exp(2j * np.pi * np.outer(zs[idx], n)) @ coeffs[lo:hi]
    return values, bounds


# --------------------------------------------------------------------------
# form sources

BUNDLED_ETA = {"11a": "1^2,11^2@11", "27a": "3^2,9^2@27"}
BUNDLED_FILES = {"27a_chi3": "27a_chi3.txt"}


def bundled_form(name: str) -> SeriesSource:
    """One of the forms shipped with the package."""
    if name in BUNDLED_ETA:
        return EtaForm(parse_eta_spec(BUNDLED_ETA[name]), label=name)
    if name in BUNDLED_FILES:
        return load_coeffs(DATA_DIR / BUNDLED_FILES[name])
    raise SpecError(f"unknown bundled form {name!r}; choose from {sorted({**BUNDLED_ETA, **BUNDLED_FILES})}")


def parse_form(text: str) -> SeriesSource:
    """Resolve ``eta:<spec>``, ``file:<path>`` or ``bundled:<name>``."""
    kind, sep, rest = text.partition(":")
    if not sep:
        return bundled_form(text)
    if kind == "eta":
        return EtaForm(parse_eta_spec(rest))
    if kind == "file":
        return load_coeffs(rest, fmt="auto")
    if kind == "bundled":
        return bundled_form(rest)
    raise SpecError(f"unknown form source {kind!r} in {text!r}")


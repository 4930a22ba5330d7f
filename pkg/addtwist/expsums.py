"""Kloosterman sums and the Weil bound."""

import logging
from functools import lru_cache
from math import gcd, sqrt

import numpy as np

from addtwist.arith import divisors
from addtwist.report import Report

logger = logging.getLogger(__name__)


@lru_cache(maxsize=64)
def _unit_inverses(c: int) -> tuple[np.ndarray, np.ndarray]:
    units = np.array([x for x in range(c) if gcd(x, c) == 1], dtype=np.int64)
    inverses = np.array([pow(int(x), -1, c) for x in units], dtype=np.int64)
    return units, inverses


def kloosterman(m: int, n: int, c: int) -> complex:
    """S(m, n; c) = sum over units x mod c of e((m x + n xbar) / c)."""
    units, inverses = _unit_inverses(c)
    phase = ((m % c) * units + (n % c) * inverses) % c
    return complex(np.sum(np.exp(2j * np.pi * phase / c)))


def kloosterman_many(m: int, ns: np.ndarray, c: int) -> np.ndarray:
    """S(m, n; c) for every n in ``ns``."""
    units, inverses = _unit_inverses(c)
    ns = np.asarray(ns, dtype=np.int64) % c
    phase = ((m % c) * units[None, :] + ns[:, None] * inverses[None, :]) % c
    return np.exp(2j * np.pi * phase / c).sum(axis=1)


def weil_bound(m: int, n: int, c: int) -> float:
    """gcd(m, n, c)^(1/2) c^(1/2) sigma_0(c)."""
    return sqrt(gcd(gcd(m, n), c)) * sqrt(c) * len(divisors(c))


def weil_bound_report(m_max: int, n_max: int, c_max: int) -> Report:
    """Tabulate |S(m, n; c)| against the Weil bound for 0 <= m, n and 1 <= c."""
    report = Report(
        name="weil-bound",
        columns=["m", "n", "c", "abs_S", "bound", "ratio"],
        metadata={"m_max": m_max, "n_max": n_max, "c_max": c_max},
    )
    if m_max < 0 or n_max < 0 or c_max < 1:
        return report

    rows = []
    ms = np.arange(m_max + 1)
    ns = np.arange(n_max + 1)
    for c in range(1, c_max + 1):
        units, inverses = _unit_inverses(c)
        left = np.exp(2j * np.pi * (np.outer(ms % c, units) % c) / c)
        right = np.exp(2j * np.pi * (np.outer(ns % c, inverses) % c) / c)
        sums = left @ right.T
        sigma0 = len(divisors(c))
        for m in range(m_max + 1):
            for n in range(n_max + 1):
                value = abs(sums[m, n])
                bound = sqrt(gcd(gcd(m, n), c)) * sqrt(c) * sigma0
                rows.append([m, n, c, value, bound, value / bound])
    rows.sort(key=lambda row: -row[5])
    for row in rows:
        report.add_row(row)
    worst = rows[0][5] if rows else 0.0
    report.set_metadata("max_ratio", worst)
    logger.info("Weil bound checked on %d triples, worst ratio %.4f", len(rows), worst)
    return report

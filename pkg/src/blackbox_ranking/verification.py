"""Seeded suites pitting the library against the brute-force oracles."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .losses import WeightScheme, ap_loss, recall_loss, weight_cumulative
from .oracle import (
    brute_average_precision,
    coarea_sides,
    counting_rank,
    exhaustive_rank,
    finite_difference_check,
    interior_points,
    series_recall_loss,
)
from .ranking import rank, rank_backward, rank_with_margin

__all__ = ["SuiteResult", "SUITES", "run_suites"]


@dataclass(frozen=True)
class SuiteResult:
    name: str
    trials: int
    failures: int
    max_error: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _distinct(rng, n):
    while True:
        y = rng.normal(size=n)
        if np.unique(y).shape[0] == n:
            return y


def _with_positive(rng, n, p=0.3):
    t = rng.random(n) < p
    t[rng.integers(n)] = True
    return t


def suite_prop1(rng, trials):
    """rank(y) is the unique argmin of y @ pi over all permutations."""
    failures = 0
    for _ in range(trials):
        y = _distinct(rng, int(rng.integers(2, 8)))
        ranks, _ = exhaustive_rank(y)
        failures += not np.array_equal(ranks, rank(y))
    return failures, 0.0


def suite_rank_counting(rng, trials):
    """rank(y)_i = 1 + #{j: y_j > y_i} (+ earlier ties)."""
    failures = 0
    for _ in range(trials):
        n = int(rng.integers(1, 201))
        # rounding produces ties on purpose
        y = np.round(rng.normal(size=n), int(rng.integers(1, 4)))
        failures += not np.array_equal(counting_rank(y), rank(y))
    return failures, 0.0


def suite_recall(rng, trials, tol=1e-9):
    """Closed-form recall loss equals the truncated weighted series."""
    failures = 0
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 65))
        y = rng.normal(size=n)
        t = _with_positive(rng, n)
        alpha = float(rng.choice([0.0, 0.1]))
        for scheme in WeightScheme:
            closed = recall_loss(y, t, scheme, alpha).value
            series = series_recall_loss(y, t, scheme, n + 1, alpha)
            err = abs(closed - series)
            worst = max(worst, err)
            failures += err > tol
    return failures, worst


def suite_lemma1(rng, trials, tol=1e-9):
    """sum_k w_k #{r_i >= k} = sum_i W(r_i) on random integer multisets."""
    failures = 0
    worst = 0.0
    for _ in range(trials):
        r = rng.integers(0, 100, size=int(rng.integers(1, 50)))
        for scheme in WeightScheme:
            lhs, rhs = coarea_sides(r, scheme)
            closed = float(np.sum(weight_cumulative(scheme, r)))
            err = max(abs(lhs - rhs), abs(lhs - closed))
            worst = max(worst, err)
            failures += err > tol
    return failures, worst


def suite_ap(rng, trials, tol=1e-12):
    """ap_loss (no margin) equals 1 - AP computed by direct counting."""
    failures = 0
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(1, 100))
        y = _distinct(rng, n)
        t = _with_positive(rng, n)
        err = abs(ap_loss(y, t).value - (1.0 - brute_average_precision(y, t)))
        worst = max(worst, err)
        failures += err > tol
    return failures, worst


def suite_fd(rng, trials, points=100, tol=1e-6):
    """Central differences of the interpolation match rank_backward; zero-gradient locality."""
    failures = 0
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 21))
        y = _distinct(rng, n)
        g = rng.normal(size=n)
        lam = float(rng.choice([0.1, 0.5, 1.0, 2.0]))
        for p in interior_points(y, g, lam, points, rng):
            err = finite_difference_check(p, g, lam)
            worst = max(worst, err)
            failures += err > tol
        # perturbation smaller than half the smallest gap cannot reorder anything
        gap = np.min(np.diff(np.sort(y)))
        g_small = g / np.max(np.abs(g)) * 0.49 * gap / lam
        failures += np.any(rank_backward(y, rank(y), g_small, lam) != 0)
    return failures, worst


def suite_margin(rng, trials):
    """A zero margin leaves the ranking unchanged."""
    failures = 0
    for _ in range(trials):
        n = int(rng.integers(1, 100))
        y = np.round(rng.normal(size=n), 2)
        t = rng.random(n) < 0.5
        failures += not np.array_equal(rank_with_margin(y, t, 0.0), rank(y))
    return failures, 0.0


SUITES = {
    "prop1": (suite_prop1, 1000),
    "rank": (suite_rank_counting, 1000),
    "recall": (suite_recall, 1000),
    "lemma1": (suite_lemma1, 1000),
    "ap": (suite_ap, 1000),
    "fd": (suite_fd, 10),
    "margin": (suite_margin, 1000),
}


def run_suites(names=None, seed: int = 0, trials: int | None = None) -> list[SuiteResult]:
    """Run the named suites (all by default), each on its own seeded stream."""
    names = list(SUITES) if not names else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}")
    results = []
    for name in names:
        fn, default_trials = SUITES[name]
        # stream keyed on the suite name so filtering does not shift other suites
        key = int.from_bytes(name.encode(), "little") % (2**32)
        rng = np.random.default_rng([seed, key])
        n = default_trials if trials is None else trials
        start = time.perf_counter()
        failures, worst = fn(rng, n)
        results.append(SuiteResult(name, n, int(failures), float(worst), time.perf_counter() - start))
    return results

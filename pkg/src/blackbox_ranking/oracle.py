"""Brute-force references for the ranking machinery.

Nothing in here calls the fast ranker for the quantity being checked: ranks
come from enumerating permutations or from pairwise counting, series are summed
term by term, gradients come from central finite differences.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, InvalidInputError, UndefinedMetricError
from .losses import WeightScheme, average_precision, weight
from .ranking import as_labels, as_scores, check_lambda, rank, rank_backward, surrogate_value

__all__ = [
    "MAX_EXHAUSTIVE_N",
    "exhaustive_rank",
    "counting_rank",
    "counting_outrunners",
    "series_recall_loss",
    "coarea_sides",
    "brute_average_precision",
    "finite_difference_check",
    "interior_points",
    "BiasCurve",
    "make_bias_dataset",
    "batch_bias_experiment",
]

MAX_EXHAUSTIVE_N = 8


def exhaustive_rank(scores) -> tuple[np.ndarray, float]:
    """Permutation minimising ``y @ pi`` over all ``n!`` permutations.

    Returns ``(ranks, objective)``.  Requires distinct scores, for which the
    minimiser is unique.
    """
    y = as_scores(scores)
    n = y.shape[0]
    if n > MAX_EXHAUSTIVE_N:
        raise InvalidInputError(f"exhaustive search is limited to n <= {MAX_EXHAUSTIVE_N}, got {n}")
    if np.unique(y).shape[0] != n:
        raise DegenerateInputError("exhaustive_rank needs distinct scores")
    perms = np.array(list(itertools.permutations(range(1, n + 1))), dtype=np.int64)
    objective = perms @ y
    best = np.argmin(objective)
    winners = np.flatnonzero(objective == objective[best])
    if winners.shape[0] != 1:
        raise DegenerateInputError(f"{winners.shape[0]} permutations attain the minimum")
    return perms[best], float(objective[best])


def counting_rank(scores) -> np.ndarray:
    """``1 + #{j : y_j > y_i} + #{j < i : y_j == y_i}`` by pairwise comparison."""
    y = as_scores(scores)
    idx = np.arange(y.shape[0])
    above = (y[None, :] > y[:, None]) | ((y[None, :] == y[:, None]) & (idx[None, :] < idx[:, None]))
    return 1 + above.sum(axis=1)


def counting_outrunners(scores, labels, alpha: float = 0.0) -> np.ndarray:
    """Irrelevant items outrunning each relevant one, by pairwise counting."""
    y = as_scores(scores)
    t = as_labels(labels, y.shape[0])
    ys = y + np.where(t, -alpha / 2, alpha / 2)
    idx = np.arange(y.shape[0])
    rel = np.flatnonzero(t)
    irr = np.flatnonzero(~t)
    a = ys[irr][None, :]
    b = ys[rel][:, None]
    ahead = (a > b) | ((a == b) & (idx[irr][None, :] < idx[rel][:, None]))
    return ahead.sum(axis=1)


def series_recall_loss(scores, labels, scheme: WeightScheme, k_max: int, alpha: float = 0.0) -> float:
    """``sum_{K=1}^{k_max} w_K (1 - refined recall@K)``, one term at a time."""
    y = as_scores(scores)
    t = as_labels(labels, y.shape[0])
    if not t.any():
        raise UndefinedMetricError("no relevant items")
    r = counting_outrunners(y, t, alpha)
    total = 0.0
    for K in range(1, k_max + 1):
        loss_at_k = 1.0 - np.count_nonzero(r < K) / r.shape[0]
        total += float(weight(scheme, K)) * loss_at_k
    return total


def coarea_sides(r, scheme: WeightScheme) -> tuple[float, float]:
    """Both sides of ``sum_k w_k #{i: r_i >= k} = sum_i W(r_i)``.

    ``W`` on the right is accumulated from the weights directly, not taken
    from the closed form.
    """
    r = np.asarray(r, dtype=np.int64)
    top = int(r.max(initial=0))
    w = weight(scheme, np.arange(1, top + 1)) if top else np.zeros(0)
    lhs = sum(w[k - 1] * np.count_nonzero(r >= k) for k in range(1, top + 1))
    W = np.concatenate([[0.0], np.cumsum(w)])
    rhs = float(W[r].sum())
    return float(lhs), rhs


def brute_average_precision(scores, labels) -> float:
    """Average Precision by direct counting, without any sorting."""
    y = as_scores(scores)
    t = as_labels(labels, y.shape[0])
    rel = np.flatnonzero(t)
    if rel.shape[0] == 0:
        raise UndefinedMetricError("no relevant items")
    total = 0.0
    for i in rel:
        rank_i = 1 + np.count_nonzero(y > y[i])
        hits = np.count_nonzero(y[rel] >= y[i])
        total += hits / rank_i
    return total / rel.shape[0]


def _min_gap(v: np.ndarray) -> float:
    if v.shape[0] < 2:
        return math.inf
    return float(np.min(np.diff(np.sort(v))))


def finite_difference_check(scores, grad_wrt_rank, lam: float, step: float = 1e-4) -> float:
    """Max abs difference between central differences of the interpolated
    loss and :func:`rank_backward` at ``scores``.

    The point must lie strictly inside a linearity region: both ``y`` and
    ``y + lam * g`` need all pairwise gaps above ``2 * step``.
    """
    y = as_scores(scores)
    lam = check_lambda(lam)
    g = np.asarray(grad_wrt_rank, dtype=np.float64)
    if g.shape != y.shape:
        raise InvalidInputError("length mismatch")
    if _min_gap(y) <= 2 * step or _min_gap(y + lam * g) <= 2 * step:
        raise DegenerateInputError("point is too close to a ranking boundary for the chosen step")
    fd = np.empty_like(y)
    for k in range(y.shape[0]):
        e = np.zeros_like(y)
        e[k] = step
        fd[k] = (surrogate_value(y + e, g, lam) - surrogate_value(y - e, g, lam)) / (2 * step)
    analytic = rank_backward(y, rank(y), g, lam)
    return float(np.max(np.abs(fd - analytic)))


def interior_points(scores, grad_wrt_rank, lam: float, count: int, rng, radius: float = 1.0, step: float = 1e-4):
    """Random points near ``scores`` that are valid for :func:`finite_difference_check`."""
    y = as_scores(scores)
    g = np.asarray(grad_wrt_rank, dtype=np.float64)
    out = []
    for _ in range(100 * count):
        p = y + rng.uniform(-radius, radius, size=y.shape)
        if _min_gap(p) > 4 * step and _min_gap(p + lam * g) > 4 * step:
            out.append(p)
            if len(out) == count:
                return out
    raise DegenerateInputError("could not sample enough interior points")


@dataclass(frozen=True)
class BiasCurve:
    """Mini-batch mAP statistics against the full-dataset mAP."""

    batch_sizes: np.ndarray
    mean_map: np.ndarray
    std_map: np.ndarray
    dataset_map: float

    @property
    def gap(self) -> np.ndarray:
        return self.mean_map - self.dataset_map


def make_bias_dataset(n_items: int = 1000, n_classes: int = 10, separation: float = 1.0, seed: int = 0):
    """Per-class Gaussian scores for single-label items.

    Returns ``(scores, labels)`` of shape ``(n_items, n_classes)``; positive
    entries are drawn from ``N(separation, 1)``, negatives from ``N(0, 1)``.
    Every class gets at least one item.
    """
    rng = np.random.default_rng(seed)
    classes = np.concatenate([np.arange(n_classes), rng.integers(0, n_classes, n_items - n_classes)])
    rng.shuffle(classes)
    labels = np.zeros((n_items, n_classes), dtype=np.int8)
    labels[np.arange(n_items), classes] = 1
    scores = rng.normal(size=(n_items, n_classes)) + separation * labels
    return scores, labels


def _mean_ap(scores, labels) -> float:
    aps = [average_precision(scores[:, c], labels[:, c]) for c in range(labels.shape[1]) if labels[:, c].any()]
    return float(np.mean(aps)) if aps else math.nan


def batch_bias_experiment(dataset_scores, dataset_labels, batch_sizes, trials: int, seed: int = 0) -> BiasCurve:
    """mAP of uniformly sampled mini-batches versus the whole dataset.

    Each trial draws a batch without replacement; classes without positives in
    the batch are left out of that batch's mAP.  Trial ``j`` of every batch
    size uses its own substream spawned from ``seed``.
    """
    y = np.asarray(dataset_scores, dtype=np.float64)
    t = np.asarray(dataset_labels)
    m = y.shape[0]
    sizes = np.asarray(batch_sizes, dtype=np.int64)
    if np.any(sizes < 1) or np.any(sizes > m):
        raise InvalidInputError(f"batch sizes must lie in 1..{m}")
    if trials < 1:
        raise InvalidInputError("trials must be positive")
    streams = np.random.SeedSequence(seed).spawn(trials)
    means, stds = [], []
    for size in sizes:
        values = []
        for ss in streams:
            rng = np.random.default_rng(ss)
            pick = np.sort(rng.choice(m, size=int(size), replace=False))
            v = _mean_ap(y[pick], t[pick])
            if not math.isnan(v):
                values.append(v)
        if not values:
            means.append(math.nan)
            stds.append(math.nan)
            continue
        v = np.asarray(values)
        # centred on the first trial so identical trials average back exactly
        means.append(v[0] + np.mean(v - v[0]))
        stds.append(np.std(v))
    return BiasCurve(sizes, np.asarray(means), np.asarray(stds), _mean_ap(y, t))

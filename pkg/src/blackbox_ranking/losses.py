"""Rank-based metrics and their blackbox-differentiable loss counterparts.

Every loss here is computed on the margin-shifted scores and differentiated
by passing an analytic ``dL/drank`` through :func:`~.ranking.rank_backward`.
Metrics (``recall_at_k``, ``average_precision``) always use the plain ranker.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, UndefinedMetricError
from .ranking import (
    _rank,
    as_labels,
    as_scores,
    check_lambda,
    check_margin,
    rank_backward,
    surrogate_value,
)

__all__ = [
    "WeightScheme",
    "LossResult",
    "weight",
    "weight_cumulative",
    "weight_cumulative_derivative",
    "recall_at_k",
    "refined_recall_at_k",
    "recall_loss",
    "recall_loss_surrogate",
    "average_precision",
    "ap_loss",
    "ap_loss_surrogate",
    "map_loss",
    "apc_loss",
]


class WeightScheme(enum.Enum):
    """Per-K weights of the recall loss.

    ``LOG`` uses ``w_k = log(1 + 1/k)`` (roughly ``1/k``), whose partial sums
    telescope to ``W(k) = log(1 + k)``.  ``LOGLOG`` uses
    ``w_k = log(1 + log(1 + 1/k) / (1 + log k))`` (roughly ``1/(k log k)``),
    with ``W(k) = log(1 + log(1 + k))``.
    """

    LOG = "log"
    LOGLOG = "loglog"


def weight(scheme: WeightScheme, k):
    """Per-K weight ``w_k`` for ``k >= 1``."""
    k = np.asarray(k, dtype=np.float64)
    if scheme is WeightScheme.LOG:
        return np.log1p(1.0 / k)
    return np.log1p(np.log1p(1.0 / k) / (1.0 + np.log(k)))


def weight_cumulative(scheme: WeightScheme, k):
    """Cumulative weight ``W(k) = w_1 + ... + w_k``; ``W(0) = 0``."""
    k = np.asarray(k, dtype=np.float64)
    if np.any(k < 0):
        raise InvalidInputError("k must be nonnegative")
    if scheme is WeightScheme.LOG:
        out = np.log1p(k)
    else:
        out = np.log1p(np.log1p(k))
    return float(out) if out.ndim == 0 else out


def weight_cumulative_derivative(scheme: WeightScheme, r):
    """Derivative of the continuous extension of ``W`` at ``r``."""
    r = np.asarray(r, dtype=np.float64)
    if scheme is WeightScheme.LOG:
        return 1.0 / (1.0 + r)
    return 1.0 / ((1.0 + np.log1p(r)) * (1.0 + r))


@dataclass(frozen=True)
class LossResult:
    """Loss value with its gradient with respect to the raw input scores."""

    value: float
    grad: np.ndarray


# A rank vector taking part in a loss: which entries of the full score
# vector it ranks, the shifted scores it was computed on, the ranks
# themselves and the incoming gradient dL/drank.
@dataclass(frozen=True)
class _RankTerm:
    index: np.ndarray
    scores: np.ndarray
    ranks: np.ndarray
    grad_wrt_rank: np.ndarray


def _prepare(scores, labels, alpha):
    y = as_scores(scores)
    t = as_labels(labels, y.shape[0])
    if not t.any():
        raise UndefinedMetricError("no relevant items")
    alpha = check_margin(alpha)
    y_shift = y + np.where(t, -0.5 * alpha, 0.5 * alpha)
    return y, t, y_shift


def _relevant_ranks(y_shift, t):
    """Full-set ranks and within-relevant ranks of the relevant items."""
    rel = np.flatnonzero(t)
    full = _rank(y_shift)
    within = _rank(y_shift[rel])
    return rel, full, within


def _backward(terms, n, lam):
    grad = np.zeros(n)
    for term in terms:
        grad[term.index] += rank_backward(term.scores, term.ranks, term.grad_wrt_rank, lam)
    return grad


def _smoothed(value, terms, lam):
    # swap each linearised rank term for its interpolation; exact wherever the
    # perturbed ranking agrees with the forward one
    out = value
    for term in terms:
        out += surrogate_value(term.scores, term.grad_wrt_rank, lam) - term.grad_wrt_rank @ term.ranks
    return float(out)


def recall_at_k(scores, labels, k: int) -> int:
    """1 if some relevant item is ranked within the top ``k``, else 0."""
    y = as_scores(scores)
    t = as_labels(labels, y.shape[0])
    if not t.any():
        raise UndefinedMetricError("recall@k is undefined without relevant items")
    if k < 1:
        raise InvalidInputError("k must be a positive integer")
    return int(_rank(y)[t].min() <= k)


def _outrunners(y_shift, t):
    """Number of irrelevant items ranked above each relevant item."""
    rel, full, within = _relevant_ranks(y_shift, t)
    return rel, full, within, full[rel] - within


def refined_recall_at_k(scores, labels, k: int, alpha: float = 0.0) -> float:
    """Fraction of relevant items outrun by fewer than ``k`` irrelevant ones."""
    _, t, y_shift = _prepare(scores, labels, alpha)
    if k < 1:
        raise InvalidInputError("k must be a positive integer")
    *_, r = _outrunners(y_shift, t)
    return float(np.mean(r < k))


def _recall_terms(scores, labels, scheme, alpha, differentiate_relevant_rank):
    y, t, y_shift = _prepare(scores, labels, alpha)
    rel, full, within, r = _outrunners(y_shift, t)
    n_rel = rel.shape[0]
    value = float(np.mean(weight_cumulative(scheme, r)))
    dW = weight_cumulative_derivative(scheme, r) / n_rel
    g_full = np.zeros(y.shape[0])
    g_full[rel] = dW
    terms = [_RankTerm(np.arange(y.shape[0]), y_shift, full, g_full)]
    if differentiate_relevant_rank:
        terms.append(_RankTerm(rel, y_shift[rel], within, -dW))
    return value, terms, y.shape[0]


def recall_loss(
    scores,
    labels,
    scheme: WeightScheme = WeightScheme.LOG,
    alpha: float = 0.0,
    lam: float = 1.0,
    differentiate_relevant_rank: bool = False,
) -> LossResult:
    """Weighted recall loss ``mean_i W(r_i)`` over the relevant items.

    ``r_i`` counts the irrelevant items ranked above relevant item ``i`` after
    the margin shift.  This is the closed form of ``sum_K w_K (1 - refined
    recall@K)``.  The value lies in ``[0, W(n - 1)]``.

    By default only the full-set ranking is differentiated; the within-relevant
    ranking is held constant.  ``differentiate_relevant_rank=True`` also sends
    ``-W'(r_i)`` through the ranker of the relevant sub-vector.
    """
    lam = check_lambda(lam)
    value, terms, n = _recall_terms(scores, labels, scheme, alpha, differentiate_relevant_rank)
    return LossResult(value, _backward(terms, n, lam))


def recall_loss_surrogate(
    scores,
    labels,
    scheme: WeightScheme = WeightScheme.LOG,
    alpha: float = 0.0,
    lam: float = 1.0,
    differentiate_relevant_rank: bool = False,
) -> float:
    """Interpolated recall loss whose gradient is :func:`recall_loss`'s ``grad``."""
    lam = check_lambda(lam)
    value, terms, _ = _recall_terms(scores, labels, scheme, alpha, differentiate_relevant_rank)
    return _smoothed(value, terms, lam)


def average_precision(scores, labels) -> float:
    """Average Precision of ``scores`` against binary ``labels`` (no margin)."""
    y = as_scores(scores)
    t = as_labels(labels, y.shape[0])
    if not t.any():
        raise UndefinedMetricError("average precision is undefined without relevant items")
    rel, full, within = _relevant_ranks(y, t)
    return float(np.mean(within / full[rel]))


def _ap_terms(scores, labels, alpha):
    y, t, y_shift = _prepare(scores, labels, alpha)
    rel, full, within = _relevant_ranks(y_shift, t)
    n_rel = rel.shape[0]
    full_rel = full[rel].astype(np.float64)
    value = 1.0 - float(np.mean(within / full_rel))
    g_full = np.zeros(y.shape[0])
    g_full[rel] = within / (n_rel * full_rel**2)
    g_within = -1.0 / (n_rel * full_rel)
    terms = [
        _RankTerm(np.arange(y.shape[0]), y_shift, full, g_full),
        _RankTerm(rel, y_shift[rel], within, g_within),
    ]
    return value, terms, y.shape[0]


def ap_loss(scores, labels, alpha: float = 0.0, lam: float = 1.0) -> LossResult:
    """``1 - AP`` on margin-shifted scores; value in ``[0, 1)``."""
    lam = check_lambda(lam)
    value, terms, n = _ap_terms(scores, labels, alpha)
    return LossResult(value, _backward(terms, n, lam))


def ap_loss_surrogate(scores, labels, alpha: float = 0.0, lam: float = 1.0) -> float:
    """Interpolated AP loss whose gradient is :func:`ap_loss`'s ``grad``."""
    lam = check_lambda(lam)
    value, terms, _ = _ap_terms(scores, labels, alpha)
    return _smoothed(value, terms, lam)


def _as_matrices(scores, labels):
    y = np.asarray(scores, dtype=np.float64)
    t = np.asarray(labels)
    if y.ndim != 2 or y.shape != t.shape or y.size == 0:
        raise InvalidInputError(
            f"scores and labels must be matching (items, classes) matrices, got {y.shape} and {t.shape}"
        )
    return y, t


def map_loss(scores, labels, alpha: float = 0.0, lam: float = 1.0) -> LossResult:
    """Mean of per-class :func:`ap_loss` over the columns of ``(items, classes)`` matrices.

    Classes without any relevant item are skipped and receive zero gradient.
    """
    y, t = _as_matrices(scores, labels)
    grad = np.zeros_like(y)
    values = []
    included = []
    for c in range(y.shape[1]):
        if not np.any(t[:, c]):
            continue
        res = ap_loss(y[:, c], t[:, c], alpha, lam)
        values.append(res.value)
        grad[:, c] = res.grad
        included.append(c)
    if not values:
        raise UndefinedMetricError("no class has a relevant item")
    return LossResult(float(np.mean(values)), grad / len(included))


def apc_loss(scores, labels, alpha: float = 0.0, lam: float = 1.0) -> LossResult:
    """:func:`ap_loss` of all classes' columns concatenated class after class."""
    y, t = _as_matrices(scores, labels)
    res = ap_loss(y.T.ravel(), t.T.ravel(), alpha, lam)
    return LossResult(res.value, res.grad.reshape(y.shape[1], y.shape[0]).T.copy())

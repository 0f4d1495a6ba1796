"""Ranking as a blackbox combinatorial solver and its interpolated backward pass.

The ranking of a score vector ``y`` is the permutation minimising ``y @ pi``
over all permutations ``pi`` of ``1..n``.  Because ranking is a linear argmin,
a usable gradient of any loss ``L(rank(y))`` can be produced by calling the
ranker a second time on the perturbed input ``y + lam * dL/drank``:

    grad = -(rank(y) - rank(y + lam * dL/drank)) / lam

Ties are broken by index: among equal scores, the lower index receives the
better (smaller) rank.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "as_scores",
    "as_labels",
    "check_lambda",
    "check_margin",
    "rank",
    "shift_scores",
    "rank_with_margin",
    "rank_backward",
    "surrogate_value",
]


def as_scores(scores) -> np.ndarray:
    y = np.asarray(scores, dtype=np.float64)
    if y.ndim != 1 or y.size == 0:
        raise InvalidInputError(f"scores must be a non-empty 1-d sequence, got shape {y.shape}")
    if not np.isfinite(y).all():
        raise InvalidInputError("scores must be finite")
    return y


def as_labels(labels, n: int) -> np.ndarray:
    t = np.asarray(labels)
    if t.ndim != 1 or t.shape[0] != n:
        raise InvalidInputError(f"labels must have length {n}, got shape {t.shape}")
    if t.dtype != bool:
        if not np.isin(t, (0, 1)).all():
            raise InvalidInputError("labels must be binary")
        t = t.astype(bool)
    return t


def check_lambda(lam: float) -> float:
    lam = float(lam)
    if not (lam > 0 and np.isfinite(lam)):
        raise InvalidInputError(f"lambda must be a positive finite number, got {lam}")
    return lam


def check_margin(alpha: float) -> float:
    alpha = float(alpha)
    if not (alpha >= 0 and np.isfinite(alpha)):
        raise InvalidInputError(f"margin must be a nonnegative finite number, got {alpha}")
    return alpha


def _rank(y: np.ndarray) -> np.ndarray:
    # stable sort on the negated scores: descending order, ties keep index order
    order = np.argsort(-y, kind="stable")
    ranks = np.empty(y.shape[0], dtype=np.int64)
    ranks[order] = np.arange(1, y.shape[0] + 1, dtype=np.int64)
    return ranks


def rank(scores) -> np.ndarray:
    """Return the 1-based descending rank of every entry of ``scores``.

    >>> rank([0.5, 2.0, 1.0])
    array([3, 1, 2])
    >>> rank([1.0, 1.0])
    array([1, 2])
    """
    return _rank(as_scores(scores))


def shift_scores(scores, labels, alpha: float) -> np.ndarray:
    """Shift relevant scores down and irrelevant scores up by ``alpha / 2``."""
    y = as_scores(scores)
    t = as_labels(labels, y.shape[0])
    alpha = check_margin(alpha)
    return y + np.where(t, -0.5 * alpha, 0.5 * alpha)


def rank_with_margin(scores, labels, alpha: float) -> np.ndarray:
    """Rank of the margin-shifted scores (see :func:`shift_scores`)."""
    return _rank(shift_scores(scores, labels, alpha))


def rank_backward(scores, ranks, grad_wrt_rank, lam: float) -> np.ndarray:
    """Blackbox backward pass through :func:`rank`.

    ``ranks`` must be the forward output ``rank(scores)``.  The returned
    gradient with respect to ``scores`` has entries that are integer
    multiples of ``1 / lam``.
    """
    y = as_scores(scores)
    lam = check_lambda(lam)
    r = np.asarray(ranks)
    g = np.asarray(grad_wrt_rank, dtype=np.float64)
    if r.shape != y.shape or g.shape != y.shape:
        raise InvalidInputError(
            f"length mismatch: scores {y.shape}, ranks {r.shape}, grad {g.shape}"
        )
    perturbed_ranks = _rank(y + lam * g)
    return -(r - perturbed_ranks) / lam


def surrogate_value(scores, grad_wrt_rank, lam: float) -> float:
    """Piecewise-affine interpolation of the linear rank loss ``g @ rank(y)``.

    Coincides with ``g @ rank(y)`` wherever the perturbation ``y + lam * g``
    leaves the ranking unchanged, and its gradient in the interior of every
    linearity region equals :func:`rank_backward`.  Equivalently it is
    ``(min_pi (y + lam g) @ pi - min_pi y @ pi) / lam``, which is continuous
    in ``y``.
    """
    y = as_scores(scores)
    lam = check_lambda(lam)
    g = np.asarray(grad_wrt_rank, dtype=np.float64)
    if g.shape != y.shape:
        raise InvalidInputError(f"length mismatch: scores {y.shape}, grad {g.shape}")
    r = _rank(y)
    r_lam = _rank(y + lam * g)
    return float(g @ r_lam + (y @ r_lam - y @ r) / lam)

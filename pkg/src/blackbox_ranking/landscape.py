"""Two-dimensional sections of a linear rank loss and its interpolations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ranking import _rank, check_lambda, surrogate_value


@dataclass(frozen=True)
class LandscapeProblem:
    """A base score vector, a linear rank loss and a random 2-plane through the scores."""

    scores: np.ndarray
    loss_coefficients: np.ndarray
    directions: np.ndarray  # (2, n), orthonormal rows

    @classmethod
    def random(cls, n_dims: int = 20, seed: int = 0) -> "LandscapeProblem":
        rng = np.random.default_rng(seed)
        scores = rng.normal(size=n_dims)
        g = rng.normal(size=n_dims)
        q, _ = np.linalg.qr(rng.normal(size=(n_dims, 2)))
        return cls(scores, g, q.T.copy())


@dataclass(frozen=True)
class LandscapeGrid:
    lam: float
    u: np.ndarray
    v: np.ndarray
    true_loss: np.ndarray
    surrogate_loss: np.ndarray

    def rows(self):
        for i in range(self.u.shape[0]):
            for j in range(self.v.shape[0]):
                yield self.u[i], self.v[j], self.true_loss[i, j], self.surrogate_loss[i, j]


def sample_landscape(problem: LandscapeProblem, lam: float, grid: int = 101, extent: float = 1.0) -> LandscapeGrid:
    """Evaluate ``g @ rank(y)`` and its interpolation on a ``grid x grid`` section.

    Points are ``scores + u * d1 + v * d2`` with ``u, v`` in ``[-extent, extent]``.
    """
    lam = check_lambda(lam)
    axis = np.linspace(-extent, extent, grid)
    g = problem.loss_coefficients
    true = np.empty((grid, grid))
    smooth = np.empty((grid, grid))
    d1, d2 = problem.directions
    for i, u in enumerate(axis):
        for j, v in enumerate(axis):
            y = problem.scores + u * d1 + v * d2
            true[i, j] = g @ _rank(y)
            smooth[i, j] = surrogate_value(y, g, lam)
    return LandscapeGrid(lam, axis, axis.copy(), true, smooth)

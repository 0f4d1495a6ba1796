"""Ranking as a solver, and the gradient you get by calling it twice.

Run: python demos/01_rank_and_backward.py
"""
import numpy as np

from blackbox_ranking import rank, rank_backward, rank_with_margin, surrogate_value

# %% Ranks are 1-based positions in descending order; ties go to the lower index.
y = np.array([0.5, 2.0, 1.0])
print("scores", y, "-> ranks", rank(y))
print("tied  ", [1.0, 1.0], "-> ranks", rank([1.0, 1.0]))

# %% A margin pushes relevant scores down and irrelevant ones up before ranking.
scores, labels = [0.55, 0.5], [1, 0]
for alpha in (0.0, 0.2):
    print(f"margin {alpha}: ranks {rank_with_margin(scores, labels, alpha)}")

# %% The loss g @ rank(y) is piecewise constant, so its true gradient is zero almost everywhere.
# The backward pass ranks y + lam * g a second time and returns the rank difference over lam.
y = np.array([1.0, 2.0])
g = np.array([1.0, -1.0])
for lam in (0.1, 1.0):
    print(f"lam={lam}: backward {rank_backward(y, rank(y), g, lam)}, interpolated loss {surrogate_value(y, g, lam):.3f}")

# %% That gradient is the exact slope of a continuous piecewise-affine interpolation.
h = 1e-6
slope = [(surrogate_value(y + h * e, g, 1.0) - surrogate_value(y - h * e, g, 1.0)) / (2 * h) for e in np.eye(2)]
print("central differences of the interpolation:", np.round(slope, 6))

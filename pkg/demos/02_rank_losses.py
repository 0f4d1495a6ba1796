"""Recall and Average Precision losses on a four-item query.

Run: python demos/02_rank_losses.py
"""
import numpy as np

from blackbox_ranking import WeightScheme, ap_loss, average_precision, recall_loss, refined_recall_at_k
from blackbox_ranking.oracle import brute_average_precision, series_recall_loss

scores = np.array([0.9, 0.8, 0.7, 0.6])

# %% Positives at ranks 2 and 4: one and two negatives outrun them.
labels = np.array([0, 1, 0, 1])
for k in (1, 2, 3):
    print(f"refined recall@{k} = {refined_recall_at_k(scores, labels, k)}")

# %% The recall loss sums w_K * (1 - refined recall@K) over all K; the closed form needs one sort.
for scheme in WeightScheme:
    closed = recall_loss(scores, labels, scheme).value
    series = series_recall_loss(scores, labels, scheme, k_max=5)
    print(f"{scheme.name:6s} closed {closed:.6f}  series {series:.6f}")

# %% AP of positives at ranks 1 and 3 is (1/1 + 2/3) / 2.
labels = np.array([1, 0, 1, 0])
print("AP", average_precision(scores, labels), "counting oracle", brute_average_precision(scores, labels))

# %% Gradients: a negative entry means "raise this score". Larger lam reaches further.
for lam in (0.05, 5.0):
    res = ap_loss(scores, labels, alpha=0.0, lam=lam)
    print(f"lam={lam}: loss {res.value:.4f}, grad {np.round(res.grad, 3)}")

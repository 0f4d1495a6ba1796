"""Score memory: rank against past batches, update only the current one.

Run: python demos/03_score_memory.py
"""
import numpy as np

from blackbox_ranking import MemoryBuffer, ap_loss, mask_gradient

rng = np.random.default_rng(0)
memory = MemoryBuffer(capacity=2)

for step in range(4):
    scores = rng.normal(size=5)
    labels = rng.random(5) < 0.4
    labels[0] = True
    all_scores, all_labels, mask = memory.extend(scores, labels)
    res = ap_loss(all_scores, all_labels, alpha=0.1, lam=5.0)
    masked, current = mask_gradient(res.grad, mask)
    print(f"step {step}: ranked {all_scores.shape[0]:2d} items, "
          f"|grad| on memory {np.abs(masked[mask == 0]).sum():.1f}, on batch {np.abs(current).sum():.2f}")
    memory.commit(scores, labels)

print("stored batches:", len(memory), "items:", memory.stored_items)

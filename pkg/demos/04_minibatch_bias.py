"""Mini-batch mAP is an optimistic estimate of dataset mAP.

Run: python demos/04_minibatch_bias.py
"""
from blackbox_ranking.oracle import batch_bias_experiment, make_bias_dataset

scores, labels = make_bias_dataset(n_items=1000, n_classes=10, separation=1.0, seed=0)
curve = batch_bias_experiment(scores, labels, [2, 8, 32, 128, 500, 1000], trials=100, seed=0)

print(f"dataset mAP {curve.dataset_map:.4f}")
print("batch   mean mAP   std     gap")
for b, m, s, g in zip(curve.batch_sizes, curve.mean_map, curve.std_map, curve.gap):
    print(f"{b:5d}   {m:.4f}    {s:.4f}  {g:+.4f}")

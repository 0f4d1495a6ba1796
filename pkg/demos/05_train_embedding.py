"""Train a linear embedding with the recall loss, then revisit a collapsed start.

Run: python demos/05_train_embedding.py   (about 15 s)
"""
from blackbox_ranking.harness import SynthParams, TrainConfig, collapse_experiment, generate, train

# %% 16 clusters of 32 points in 32 dimensions, embedded into 16 dimensions.
result = train(TrainConfig(), generate(SynthParams(seed=0)))
for row in result.history[::10]:
    print(f"step {row.step:4d}  loss {row.loss:.3f}  R@1 {row.r_at_1:.3f}  R@4 {row.r_at_4:.3f}  mAP {row.map:.3f}")
print("best R@1", result.best.r_at_1, "at step", result.best.step)

# %% Start with every embedding almost identical. Without a margin the ranking is
# already "correct enough" at the tie and the loss gives no push apart.
for run in collapse_experiment():
    print(f"alpha {run.alpha:.2f}: similarity spread {run.initial_spread:.1e} -> {run.final_spread:.1e}, "
          f"escaped {run.escaped}, final R@1 {run.result.history[-1].r_at_1:.3f}")

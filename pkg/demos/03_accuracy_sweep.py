"""
Accuracy against sample count and radix
=======================================

Runs a small paired sweep and prints the per-cell summary. Every cell sees the
same generated matrices, so differences come from the parameters alone.
"""

from qubof.experiments import ExperimentConfig, aggregate, run_grid

config = ExperimentConfig(ns=[12], ks=[5], rs=[2, 4, 8], ts=[25, 100, 300], trials=10, base_seed=11)
records = run_grid(config)

print(f"{'r':>3} {'t':>5} {'acc mean':>9} {'acc std':>8} {'err mean':>9}")
for row in sorted(aggregate(records), key=lambda row: (row["r"], row["t"])):
    print(f"{row['r']:>3} {row['t']:>5} {row['acc_mean']:>9.4f} {row['acc_std']:>8.4f} {row['err_mean']:>9.4f}")

# Larger radix carries more of each entry in the leading digits; more samples
# give the final Bernoulli rounding more chances to land on a good vector.

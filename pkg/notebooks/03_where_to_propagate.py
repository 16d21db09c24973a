"""
Where should propagation happen?
================================

The 2 x 2 grid of source/target propagation counts on one synthetic pair,
plus the interleaved and stacked architecture families. Numbers from a
single seed are noisy; the acceptance suite averages five.
"""

from a2gnn.data import ShiftConfig, generate_shifted_pair
from a2gnn.model import ModelSpec
from a2gnn.trainer import TrainConfig, preset_grid, run_ablation

source, target = generate_shifted_pair(ShiftConfig(nodes_per_domain=200, seed=1))
base = TrainConfig(spec=ModelSpec(feat_dim=source.feat_dim, k=5), epochs=150, seeds=(1,))

print("source-prop  target-prop  macro-F1")
for row in run_ablation(base, preset_grid("propagation-location", 5), source, target):
    p = row["point"]
    print(f"{p['source_prop']:11d}  {p['k']:11d}  {100 * row['macro_f1_mean']:8.1f}")

# [PT] interleaves, [P]T precomputes, [T]P propagates after transforming
grid = [{"arch": a, "layers": 2, "k": 2} for a in ("pt_stack", "p_stack_t", "t_stack_p")]
print("\narchitecture  macro-F1")
for row in run_ablation(base, grid, source, target):
    print(f"{row['point']['arch']:12s}  {100 * row['macro_f1_mean']:8.1f}")

#!/usr/bin/env python3
"""How many multiplications does one full inference of the big Q-network
perform? Count them layer by layer, straight from the architecture."""

from deltaq import build_reference_dqn, static_network_multiplications

for n_actions in (4, 18):
    spec = build_reference_dqn(n_actions)
    report = static_network_multiplications(spec)
    print(f"\nreference Q-network, {n_actions} actions")
    print(f"{'Layer':<10} {'Multiplications':>16} {'Param':>12}")
    for row in report.rows:
        print(f"{row.name:<10} {row.multiplications:>16,} {row.params:>12,}")
    print(f"{'Total':<10} {report.total_multiplications:>16,} "
          f"{report.total_params:>12,}")

# every one of those counts depends only on shapes, never on weight values;
# the dense-layer cost dominates the conv stack at this scale
spec = build_reference_dqn(4)
shapes = spec.output_shapes()
print("\nshape chain:", spec.input_shape, "->",
      " -> ".join(str(s) for s in shapes))

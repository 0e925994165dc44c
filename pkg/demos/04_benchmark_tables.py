"""A miniature benchmark run: generated instances, three rules, CSV tables.

Writes runs.csv (one row per solve), summary_times.csv (solved counts and
mean times bucketed by solve-time range) and summary_gaps.csv (mean remaining
gaps over instances some rule failed to close) into ./demo_tables/.
"""

import os

from spatialbb import SolverConfig, compare_to_csv, gen_bbp, gen_pooling_toy

instances = [gen_pooling_toy("haverly-like", seed) for seed in range(4)]
instances += [gen_bbp(2, 2, 1.0, seed) for seed in range(2)]

tables = compare_to_csv(
    instances,
    rules=["esb", "basic", "balance"],
    config=SolverConfig(root_budget=0.5, node_cap=5000),
)

out_dir = "demo_tables"
os.makedirs(out_dir, exist_ok=True)
for name, text in tables.items():
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"== {path} ==")
    print(text)

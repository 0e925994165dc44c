"""Full solves of one pooling instance under all three branching rules."""

from spatialbb import SolverConfig, gen_pooling_toy, solve

inst = gen_pooling_toy("haverly-like", 8)
print(f"instance: {inst.name} (n={inst.n}, m={inst.m})\n")
print(f"{'rule':9s} {'verdict':12s} {'objective':>12s} {'bound':>12s} "
      f"{'gap %':>8s} {'nodes':>6s} {'LPs':>6s} {'tighten':>8s}")

for rule in ("esb", "basic", "balance"):
    rep = solve(inst, SolverConfig(rule=rule, root_budget=1.0))
    print(f"{rule:9s} {rep.verdict:12s} {rep.z_star:12.6f} {rep.z_lb:12.6f} "
          f"{rep.gap_pct:8.4f} {rep.nodes:6d} {rep.lp_solves:6d} {rep.tightenings:8d}")

print("\nThe extreme rule spends more LP solves per node on its point search")
print("and bound tightening, and typically needs the fewest nodes.")

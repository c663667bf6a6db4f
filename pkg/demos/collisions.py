"""Triple collisions and near-collision counts.

With unit diffusions the collision condition holds with equality and
three particles never meet.  Raising the third diffusion to 3 breaks it.
The counts below record steps where two consecutive gaps are both below
delta.  As delta shrinks, the second system keeps relatively more of its
near-collisions.  The effect is a slow power of delta, so it is visible as
a trend across delta, not as a large factor at any single one.

    python demos/collisions.py
"""
import numpy as np

from ranked_bm import SystemSpec
from ranked_bm.analyze import collision_condition_check, near_collision_stats
from ranked_bm.sequences import SeqRule
from ranked_bm.simulate import PROJECTION, SimConfig, simulate_ranked_gaps

drifts = SeqRule.finite([1.0, 0.0, 0.0])
specs = {
    "sigma^2 = (1, 1, 1)": SystemSpec(3, drifts, SeqRule.finite([1.0, 1.0, 1.0])),
    "sigma^2 = (1, 1, 3)": SystemSpec(3, drifts, SeqRule.finite([1.0, 1.0, 3.0])),
}
cfg = SimConfig(dt=1e-3, T=100.0, seed=5, boundary=PROJECTION)
deltas = (0.02, 0.05, 0.1)

for name, spec in specs.items():
    cond = collision_condition_check(spec, 3)
    counts = np.zeros(len(deltas), dtype=int)
    for r in range(4):
        traj = simulate_ranked_gaps(spec, np.array([0.5, 0.5]), cfg, replica=r)
        counts += near_collision_stats(traj, deltas).counts[0]
    print(f"{name}: condition holds = {cond.passed}")
    for d, c in zip(deltas, counts):
        print(f"   delta = {d:<5}  steps with two small gaps: {c}")

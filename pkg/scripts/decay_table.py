"""Distance between the full flow and the flow with one Fourier mode removed,
as the momentum along that mode grows."""

import numpy as np

from nclab import flow
from nclab.config import make_rng

rng = make_rng(0)
V = flow.TrigPotential({(1, 0): 0.5, (-1, 0): 0.5, (0, 1): 0.3, (0, -1): 0.3,
                        (1, 1): 0.2j, (-1, -1): -0.2j})
q0s = [rng.uniform(0, 1, 2) for _ in range(4)]
for b in [(1, 0), (1, 1)]:
    tab = flow.dynamics_comparison(V, b, q0s, [1.0, 0.3])
    print(f"b = {b}: slope {tab.slope:.3f}")
    for s, d in zip(tab.scales, tab.distances):
        print(f"  |b.p0| = {s:4d}  distance {d:.3e}  scaled {s * d:.4f}")

"""|S_3| / |S_0| for the K_1 pairing partial sums, for small-regime unitaries
and for Haar-random unitaries of the same seed."""

import numpy as np

from nclab import expansion, linalg
from nclab.config import make_rng
from nclab.funcs import Gaussian

D = np.diag([1.0, 2.0, 3.0])
f = Gaussian()
for seed in range(4):
    small = expansion.small_unitary(make_rng(seed), D)
    haar = linalg.random_unitary(make_rng(seed), 3)
    out = []
    for U in (small, haar):
        S, _ = expansion.k1_pairing_truncation(D, f, U, 3)
        out.append(abs(S[3]) / max(abs(S[0]), 1e-12))
    print(f"seed {seed}: small-regime {out[0]:.2e}   Haar {out[1]:.2e}")

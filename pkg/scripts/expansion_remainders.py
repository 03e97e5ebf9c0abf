"""Remainder magnitudes of the truncated expansion against the size of the
perturbation, both remainder representations side by side."""

import numpy as np

from nclab import expansion, forms, linalg
from nclab.config import make_rng
from nclab.funcs import Gaussian

D = np.diag([1.0, 2.0, 3.0])
A0 = forms.random_hermitian_one_form(make_rng(0), 2, 3)
base = linalg.op_norm(forms.pi_D(A0, D))
print("norm    K  |remainder_direct|  |direct - formula|")
for norm in (0.05, 0.1, 0.25, 0.5):
    A = A0.scale(norm / base)
    for K in (1, 2, 3, 4):
        r = expansion.expand(D, Gaussian(), A, K)
        print(f"{norm:5.2f}  {K}  {abs(r.remainder_direct):.3e}          "
              f"{abs(r.remainder_direct - r.remainder_formula):.1e}")

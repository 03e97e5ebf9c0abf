"""Residual curves for the von Neumann and Dirac conditions over a hbar grid.

Prints the per-hbar residuals and fitted log-log slopes for several seeded
generator pairs, including the flipped Poisson sign.
"""

import argparse

import numpy as np

from nclab import torusq as tq
from nclab.config import make_rng


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pairs", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--kmax", type=int, default=6)
    args = ap.parse_args()
    rng = make_rng(args.seed)
    hbars = [2.0 ** -k for k in range(1, args.kmax + 1)]
    for i in range(args.pairs):
        f, g = (tq.generator(rng.integers(-2, 3, 1),
                             [(complex(rng.normal(), rng.normal()), rng.uniform(-0.15, 0.15, 1))
                              for _ in range(2)]) for _ in range(2))
        rep = tq.sdq_residuals(f, g, hbars, cutoff=64, p_range=300.0)
        print(f"pair {i}: slopes " + ", ".join(f"{k} {v:.3f}" for k, v in rep.slopes.items()))
        for h, v, d, b in zip(hbars, rep.von_neumann, rep.dirac, rep.vn_bound):
            print(f"  hbar {h:.5f}  vN {v:.3e} (bound {b:.3e})  Dirac {d:.3e}  "
                  f"Dirac/hbar^2 {d / h ** 2:.4f}")


if __name__ == "__main__":
    main()

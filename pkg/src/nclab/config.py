"""Central tolerance record shared by all modules."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12        # constructor symmetry check
    eig_residual: float = 1e-10     # reconstruction residual, relative to max(1, |A|_F)
    cluster: float = 1e-8           # confluent node merging in divided differences
    trace_forms: float = 1e-10      # trace_moi internal cross-check
    bracket: float = 1e-9           # bracket internal cross-check
    remainder: float = 1e-8         # Taylor remainder dual path
    unitary: float = 1e-10
    max_terms: int = 4_000_000      # largest divided-difference tensor materialised
    max_amplitude_terms: int = 100_000_000


TOL = Tolerances()


PRNG_ALGORITHM = "numpy.Philox"


def make_rng(seed: int, stream: int = None):
    """Counter-based generator; ``stream`` selects a spawned child sequence."""
    import numpy as np
    ss = np.random.SeedSequence(int(seed))
    if stream is not None:
        ss = ss.spawn(stream + 1)[stream]
    return np.random.Generator(np.random.Philox(ss))

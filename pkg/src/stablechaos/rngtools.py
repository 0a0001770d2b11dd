"""Reproducible random-number stream derivation.

Every consumer of randomness receives a dedicated ``numpy`` Generator derived
from ``(master_seed, role, replicate[, extra indices])`` through
``SeedSequence`` spawn keys.  Streams are therefore independent of execution
order and of how many other replications run, which is what makes replicated
experiments order-independent and extensible without perturbing existing runs.
"""

from __future__ import annotations

import numpy as np

# Fixed role identifiers.  Never renumber: doing so silently changes every
# stream in every experiment.
ROLE_IDS = {
    "init": 0,        # initial positions
    "thinning": 1,    # per-particle proposal clocks + acceptance uniforms
    "collateral": 2,  # collateral jump sizes u
    "fresh": 3,       # fresh stable draws for empty windows
    "path": 4,        # driving-path simulation
    "selfsim": 5,     # random-sum self-similarity experiment
    "clt": 6,         # stable-CLT rate experiment
    "misc": 7,        # anything else (diagnostics, audits)
}


def stream(master_seed: int, role: str, replicate: int = 0, extra: tuple = ()) -> np.random.Generator:
    """Return the Generator owned by ``(role, replicate, *extra)``."""
    key = (ROLE_IDS[role], replicate) + tuple(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


def particle_streams(master_seed: int, replicate: int, n: int) -> list[np.random.Generator]:
    """One thinning stream per particle; shared by the finite and limit systems."""
    return [stream(master_seed, "thinning", replicate, (i,)) for i in range(n)]

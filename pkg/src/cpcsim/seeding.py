"""Stream derivation from a single root seed.

Every random stream in a run comes from ``SeedSequence([root_seed, stream_id])``
with the fixed ids below, so streams never collide and adding an agent does
not perturb the world or protocol streams.
"""
import numpy as np

WORLD = 0
PROTOCOL = 1
SHIFT = 2
AGENT_BASE = 1000


def derive_rng(root_seed: int, stream_id: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(root_seed) & 0xFFFFFFFFFFFFFFFF, int(stream_id)])
    return np.random.Generator(np.random.PCG64(ss))


def agent_rng(root_seed: int, k: int) -> np.random.Generator:
    return derive_rng(root_seed, AGENT_BASE + k)

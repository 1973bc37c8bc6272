from typing import Sequence, Tuple, Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]


def seed_sequence(seed: SeedLike, stream: Sequence[int] = ()) -> np.random.SeedSequence:
    """Counter-based child stream: (base seed, stream key) -> SeedSequence.

    Replica i of a run uses stream (i,); nested studies append further
    counters. The mapping does not depend on worker count or scheduling.
    """
    if isinstance(seed, np.random.SeedSequence):
        if not stream:
            return seed
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(stream))
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))


def make_rng(seed: SeedLike, stream: Sequence[int] = ()) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, stream)))


def stream_key(seed: SeedLike, stream: Sequence[int] = ()) -> Tuple[int, Tuple[int, ...]]:
    ss = seed_sequence(seed, stream)
    return int(ss.entropy), tuple(int(k) for k in ss.spawn_key)

"""Named, counter-based random streams.

Every consumer asks for a stream by ``(seed, role, *index)``. Streams are
Philox generators keyed through :class:`numpy.random.SeedSequence`, so a
chain's draws depend only on the seed and its role name, never on the order
in which other streams were created.
"""

import zlib

import numpy as np


def _role_key(role):
    return zlib.crc32(role.encode("utf-8"))


def substream(seed, role, *index):
    """Return an independent ``numpy.random.Generator`` for ``role``.

    Parameters
    ----------
    seed : int
        Master seed (64-bit).
    role : str
        Consumer name, e.g. ``"chain"`` or ``"tournament"``.
    *index : int
        Further integer keys (chain number, replicate number, ...).
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(_role_key(role), *map(int, index)))
    return np.random.Generator(np.random.Philox(ss))

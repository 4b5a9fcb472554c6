"""Counter-based random streams.

Every trial of a Monte Carlo cell owns an independent stream addressed by
``(key, trial, slot, block)``.  The generator is Philox4x32-10, evaluated
vectorised over many counters at once, so a batch of trials costs a handful
of numpy passes and the numbers a trial sees never depend on how trials are
grouped into batches or workers.
"""
from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)


def philox4x32(counter, key, rounds=10):
    """Philox4x32 block function.

    Parameters
    ----------
    counter : array_like of uint32, shape (..., 4)
    key : array_like of uint32, shape (2,) or (..., 2)
    rounds : int
        Number of rounds (10 is the standard, statistically vetted choice).

    Returns
    -------
    ndarray of uint32, shape (..., 4)
    """
    ctr = np.asarray(counter, dtype=np.uint64) & _MASK
    k = np.asarray(key, dtype=np.uint64) & _MASK
    c0, c1, c2, c3 = (ctr[..., i] for i in range(4))
    k0, k1 = k[..., 0], k[..., 1]
    for _ in range(rounds):
        p0 = c0 * _M0
        p1 = c2 * _M1
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT) ^ c1 ^ k0,
            p1 & _MASK,
            (p0 >> _SHIFT) ^ c3 ^ k1,
            p0 & _MASK,
        )
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return np.stack([c0, c1, c2, c3], axis=-1).astype(np.uint32)


def _words_to_unit(hi, lo):
    # 53-bit double in [0, 1)
    a = (hi.astype(np.uint64) >> np.uint64(5)).astype(np.float64)
    b = (lo.astype(np.uint64) >> np.uint64(6)).astype(np.float64)
    return (a * 67108864.0 + b) / 9007199254740992.0


class CounterStreams:
    """Family of per-trial random streams under one key.

    The key is derived from ``(seed, *domain)`` with :class:`numpy.random.SeedSequence`,
    so e.g. ``CounterStreams(seed, snr_index)`` gives every SNR point of a sweep its
    own independent family.

    ``uniforms(trials, slot, count)`` returns a ``(len(trials), count)`` array. Row
    ``i`` depends only on ``(key, trials[i], slot)`` and the column index, and a
    shorter request is always a prefix of a longer one.
    """

    def __init__(self, seed: int, *domain: int):
        self.seed = int(seed)
        self.domain = tuple(int(d) for d in domain)
        words = np.random.SeedSequence([self.seed, *self.domain]).generate_state(2, np.uint32)
        self.key = words

    def __repr__(self):
        return f"CounterStreams(seed={self.seed}, domain={self.domain})"

    def uniforms(self, trials, slot: int, count: int) -> np.ndarray:
        trials = np.atleast_1d(np.asarray(trials, dtype=np.uint64))
        nblocks = (count + 1) // 2
        ctr = np.empty((trials.size, nblocks, 4), dtype=np.uint64)
        ctr[..., 0] = (trials & _MASK)[:, None]
        ctr[..., 1] = (trials >> _SHIFT)[:, None]
        ctr[..., 2] = slot
        ctr[..., 3] = np.arange(nblocks, dtype=np.uint64)[None, :]
        out = philox4x32(ctr, self.key)
        u = np.empty((trials.size, nblocks, 2))
        u[..., 0] = _words_to_unit(out[..., 0], out[..., 1])
        u[..., 1] = _words_to_unit(out[..., 2], out[..., 3])
        return u.reshape(trials.size, 2 * nblocks)[:, :count]


def as_streams(rng) -> CounterStreams:
    """Coerce ``rng`` into a :class:`CounterStreams`.

    Accepts a ``CounterStreams`` (returned as is), an integer seed, or a
    :class:`numpy.random.Generator` (a fresh key is drawn from it, so a seeded
    generator yields a reproducible stream).
    """
    if isinstance(rng, CounterStreams):
        return rng
    if isinstance(rng, np.random.Generator):
        return CounterStreams(int(rng.integers(0, 2**63)))
    if isinstance(rng, (int, np.integer)):
        return CounterStreams(int(rng))
    raise TypeError(f"cannot build random streams from {type(rng).__name__}")

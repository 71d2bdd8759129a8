"""Deterministic stream derivation for environments, walkers and clocks.

Every random quantity in the package is addressed, not drawn from shared
state: site i of an environment, replica i of an experiment, and the clock
attached to replica i each get an independent stream derived from
``(master_seed, label, index...)``.  This is what makes environments
extension-stable (growing the sampled window never changes existing sites)
and experiment output independent of worker count and scheduling order.

Two layers:

* :func:`substream_seed` hashes an address path to a 64-bit seed
  (``blake2b``, stable across platforms and processes).
* :func:`site_uniforms` evaluates a splitmix64 counter generator at
  site indices, vectorized, producing the per-site uniforms that the
  inverse-CDF transforms in :mod:`rwrelab.envmodel` consume.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream_seed", "site_uniforms"]

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
# 2^-53; uniforms are (mantissa + 0.5) * 2^-53, strictly inside (0, 1).
_U53 = 1.0 / 9007199254740992.0


def substream_seed(master_seed: int, *path) -> int:
    """Derive a 64-bit substream seed from a master seed and an address path.

    Path components may be ints, floats or strings; the encoding is
    unambiguous (length-prefixed reprs) so distinct paths never collide by
    concatenation.  The same (seed, path) always yields the same value, on
    any platform, in any process.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(int(master_seed).to_bytes(16, "little", signed=True))
    for part in path:
        if isinstance(part, bool):  # guard: bool is an int subclass
            enc = b"b" + bytes([part])
        elif isinstance(part, (int, np.integer)):
            enc = b"i" + int(part).to_bytes(16, "little", signed=True)
        elif isinstance(part, float):
            enc = b"f" + np.float64(part).tobytes()
        elif isinstance(part, str):
            raw = part.encode("utf-8")
            enc = b"s" + len(raw).to_bytes(4, "little") + raw
        else:
            raise TypeError(f"unsupported path component {part!r}")
        h.update(len(enc).to_bytes(4, "little"))
        h.update(enc)
    return int.from_bytes(h.digest(), "little")


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, vectorized over uint64 arrays."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def site_uniforms(key: int, lo: int, hi: int) -> np.ndarray:
    """Uniform(0,1) variates for sites ``lo..hi`` inclusive, index-addressed.

    Site i's value is the splitmix64 output at counter i under ``key``:
    a pure function of (key, i), so any window over the same key agrees
    bit-for-bit with any other window on their overlap.
    """
    if hi < lo:
        raise ValueError(f"empty site range [{lo}, {hi}]")
    idx = np.arange(lo, hi + 1, dtype=np.int64).view(np.uint64)
    state = (np.uint64(key) + (idx + np.uint64(1)) * _GAMMA) & _MASK
    bits = _mix64(state)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _U53

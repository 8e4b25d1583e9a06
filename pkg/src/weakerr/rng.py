"""Counter-based Gaussian variate generation (Philox4x32-10).

Every (seed, path index, step index) triple maps to a fixed 64-bit word
through the keyed Philox4x32-10 block cipher, so any path is reproducible in
isolation and whole blocks of paths can be generated in any order or in
parallel with bitwise-identical results.  Normals come from the inverse CDF
applied to 53-bit uniforms (no rejection sampling), keeping streams platform
independent.

Layout: the 128-bit Philox counter holds (block index within the path, low
and high words of the path index, 0); the 64-bit key is the seed.  Each
128-bit output block yields two 64-bit words, i.e. two normal draws.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)


def _philox_rounds(c0, c1, c2, c3, k0: int, k1: int):
    """Ten Philox4x32 rounds on uint64 arrays holding 32-bit words.

    Mutates its argument arrays (they are consumed as scratch space) and
    returns the four output-word arrays.
    """
    p0 = np.empty_like(c0)
    p1 = np.empty_like(c0)
    for rnd in range(10):
        np.multiply(_M0, c0, out=p0)
        np.multiply(_M1, c2, out=p1)
        # c0' = hi(p1) ^ c1 ^ k0 computed into the retired c0 buffer; same for c2'.
        np.right_shift(p1, _S32, out=c0)
        np.bitwise_xor(c0, c1, out=c0)
        np.bitwise_xor(c0, np.uint64((k0 + rnd * _W0) & 0xFFFFFFFF), out=c0)
        np.bitwise_and(p1, _MASK32, out=c1)
        np.right_shift(p0, _S32, out=c2)
        np.bitwise_xor(c2, c3, out=c2)
        np.bitwise_xor(c2, np.uint64((k1 + rnd * _W1) & 0xFFFFFFFF), out=c2)
        np.bitwise_and(p0, _MASK32, out=c3)
    return c0, c1, c2, c3


def philox4x32_10(c0, c1, c2, c3, k0, k1):
    """The Philox4x32 block function with 10 rounds; array arguments welcome.

    Inputs and outputs are uint32 counter words (c0..c3) and scalar key words
    (k0, k1).  Matches the published known-answer vectors.
    """
    words = [np.asarray(c, dtype=np.uint32).astype(np.uint64) for c in (c0, c1, c2, c3)]
    out = _philox_rounds(*words, int(k0) & 0xFFFFFFFF, int(k1) & 0xFFFFFFFF)
    return tuple(w.astype(np.uint32) for w in out)


def _uniforms(seed: int, path_indices: np.ndarray, n_steps: int) -> np.ndarray:
    """53-bit uniforms in the open interval (0, 1), shape (n_paths, n_steps)."""
    n_blocks = (n_steps + 1) // 2
    paths = np.asarray(path_indices, dtype=np.uint64)
    shape = (paths.size, n_blocks)
    c0 = np.empty(shape, dtype=np.uint64)
    c0[:] = np.arange(n_blocks, dtype=np.uint64)
    c1 = np.empty(shape, dtype=np.uint64)
    c1[:] = (paths & _MASK32)[:, None]
    c2 = np.empty(shape, dtype=np.uint64)
    c2[:] = (paths >> _S32)[:, None]
    c3 = np.zeros(shape, dtype=np.uint64)
    y0, y1, y2, y3 = _philox_rounds(c0, c1, c2, c3,
                                    seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF)
    # Pack pairs of 32-bit outputs into 64-bit words: block j covers steps
    # 2j (words y0:y1) and 2j+1 (words y2:y3).
    np.left_shift(y0, _S32, out=y0)
    np.bitwise_or(y0, y1, out=y0)
    np.left_shift(y2, _S32, out=y2)
    np.bitwise_or(y2, y3, out=y2)
    words = np.empty((paths.size, 2 * n_blocks), dtype=np.uint64)
    words[:, 0::2] = y0
    words[:, 1::2] = y2
    # Top 53 bits, offset by half an ulp: values lie strictly inside (0, 1).
    np.right_shift(words, _S11, out=words)
    u = words[:, :n_steps].astype(np.float64)
    u += 0.5
    u *= 2.0**-53
    return u


def normal_block(seed: int, path_indices, n_steps: int) -> np.ndarray:
    """Standard normal draws, one row per entry of ``path_indices``."""
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    if not 0 <= int(seed) < 2**64:
        raise ValueError("seed must fit in 64 unsigned bits")
    path_indices = np.atleast_1d(np.asarray(path_indices, dtype=np.uint64))
    u = _uniforms(int(seed), path_indices, n_steps)
    return ndtri(u, out=u)


def gaussian_increments(seed: int, path_indices, n_steps: int, dt: float) -> np.ndarray:
    """Brownian increments N(0, dt), shape (n_paths, n_steps)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    z = normal_block(seed, path_indices, n_steps)
    z *= np.sqrt(dt)
    return z

"""Counter-based random number engine.

Every Gaussian increment in the toolkit is a pure function of a 128-bit key
and a 64-bit word index, so paths can be extended in either time direction,
shifted, sliced and re-generated in any order without changing a single bit.

The pipeline, pinned here so results are reproducible everywhere:

1. word   = Philox4x64-10(key, block = W >> 2)[W & 3]
   (the reference Philox algorithm of Salmon et al.; bit-identical to
   ``numpy.random.Philox`` as verified in the test suite)
2. u      = ((word >> 11) + 0.5) * 2**-53          (uniform on (0, 1))
3. z      = ndtri(u)                                (Wichura's AS241 inverse
   normal CDF in double precision; agrees with ``scipy.special.ndtri`` to a
   few ULP, also pinned by tests)
4. increment component = z * sqrt(dt)

Keys are derived from user seeds with the SplitMix64 finalizer.  Replica
seeds for ensembles come from the SplitMix64 sequence of the master seed,
which is injective in the replica index.
"""

import numpy as np
from numba import njit

U64 = np.uint64

# Philox4x64 round and Weyl constants (Salmon et al., SC'11).
_PHILOX_M0 = U64(0xD2E7470EE14C6C93)
_PHILOX_M1 = U64(0xCA5A826395121157)
_PHILOX_W0 = U64(0x9E3779B97F4A7C15)
_PHILOX_W1 = U64(0xBB67AE8584CAA73B)

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15

# Word indices are (k + WORD_OFFSET) * m + component; with |k| < 2**47 and
# m <= 1024 they stay comfortably inside one 64-bit counter limb.
WORD_OFFSET = 1 << 48
MAX_ABS_INDEX = (1 << 47) - 1
MAX_DIM = 1024

_TWO53INV = 2.0 ** -53


def splitmix64(value: int) -> int:
    """SplitMix64 finalizer (a bijection on 64-bit integers)."""
    z = value & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Replica seed: SplitMix64 stream of ``master_seed`` at ``index``."""
    return splitmix64((master_seed + (index + 1) * _SPLITMIX_GAMMA) & _MASK64)


def derive_key(seed: int, dim: int) -> tuple[int, int]:
    """128-bit Philox key for a path with the given seed and noise dimension."""
    k0 = splitmix64(seed)
    k1 = splitmix64(k0 ^ 0x6A09E667F3BCC909 ^ (dim & _MASK64))
    return k0, k1


@njit(cache=True, inline="always")
def _mulhilo(a, b):
    ah = a >> U64(32)
    al = a & U64(0xFFFFFFFF)
    bh = b >> U64(32)
    bl = b & U64(0xFFFFFFFF)
    albh = al * bh
    ahbl = ah * bl
    mid = ahbl + ((al * bl) >> U64(32)) + (albh & U64(0xFFFFFFFF))
    hi = ah * bh + (albh >> U64(32)) + (mid >> U64(32))
    return hi, a * b


@njit(cache=True, inline="always")
def _philox_block(blk, key0, key1):
    """Four output words of Philox4x64-10 at 64-bit counter ``blk``."""
    x0 = blk
    x1 = U64(0)
    x2 = U64(0)
    x3 = U64(0)
    k0 = key0
    k1 = key1
    for _ in range(10):
        hi0, lo0 = _mulhilo(U64(0xD2E7470EE14C6C93), x0)
        hi1, lo1 = _mulhilo(U64(0xCA5A826395121157), x2)
        x0, x1, x2, x3 = hi1 ^ x1 ^ k0, lo1, hi0 ^ x3 ^ k1, lo0
        k0 = k0 + U64(0x9E3779B97F4A7C15)
        k1 = k1 + U64(0xBB67AE8584CAA73B)
    return x0, x1, x2, x3


@njit(cache=True, inline="always")
def _word_at(w, key0, key1):
    b0, b1, b2, b3 = _philox_block(w >> U64(2), key0, key1)
    pos = w & U64(3)
    if pos == U64(0):
        return b0
    if pos == U64(1):
        return b1
    if pos == U64(2):
        return b2
    return b3


@njit(cache=True, inline="always")
def gauss_from_word(word, scale):
    """Steps 2-4 of the pinned pipeline: word -> N(0, scale**2) variate."""
    u = (np.float64(word >> U64(11)) + 0.5) * _TWO53INV
    return _ndtri(u) * scale


@njit(cache=True, inline="always")
def _ndtri(p):
    """AS241: double-precision inverse of the standard normal CDF."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


@njit(cache=True, nogil=True)
def fill_increments(key0, key1, w0, n, m, scale, out):
    """Fill ``out[(n, m)]`` with increments for consecutive word indices.

    ``w0`` is the word index of ``out[0, 0]``; words advance component-fastest.
    Philox blocks are reused across the four words they cover.
    """
    w = w0
    blk = ~(w >> U64(2))  # force a miss on the first word
    b0 = U64(0)
    b1 = U64(0)
    b2 = U64(0)
    b3 = U64(0)
    for i in range(n):
        for c in range(m):
            nb = w >> U64(2)
            if nb != blk:
                blk = nb
                b0, b1, b2, b3 = _philox_block(blk, key0, key1)
            pos = w & U64(3)
            if pos == U64(0):
                word = b0
            elif pos == U64(1):
                word = b1
            elif pos == U64(2):
                word = b2
            else:
                word = b3
            out[i, c] = gauss_from_word(word, scale)
            w += U64(1)
    return out

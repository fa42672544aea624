"""Counter-based normal deviates.

The generator is Philox4x64-10 (Salmon et al., SC'11) as shipped by numpy,
keyed with the 128-bit value ``seed | stream << 64``.  Word ``j`` of the
stream is a pure function of ``(seed, stream, j)``; normals are formed by
Box-Muller from word pairs ``(2m, 2m + 1)``, so deviate ``i`` depends only on
``(seed, stream, i)`` and never on how many draws were made before it.
"""

import numpy as np

ALGORITHM = "philox4x64-10/box-muller"

_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0 ** -53


def _philox(seed, stream):
    seed = int(seed)
    stream = int(stream)
    if not (0 <= seed <= _MASK64):
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if not (0 <= stream <= _MASK64):
        raise ValueError(f"stream must be a 64-bit unsigned integer, got {stream}")
    return np.random.Philox(key=seed | (stream << 64))


def raw_words(seed, stream, n):
    """First ``n`` raw 64-bit words of the ``(seed, stream)`` sequence."""
    return _philox(seed, stream).random_raw(int(n))


def uniforms(seed, stream, n):
    """Uniform deviates on the open interval (0, 1), 53-bit resolution."""
    words = raw_words(seed, stream, n)
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def normals(seed, stream, n):
    """``n`` independent standard normal deviates for ``(seed, stream)``."""
    n = int(n)
    if n <= 0:
        return np.zeros(0)
    m = (n + 1) // 2
    u = uniforms(seed, stream, 2 * m)
    radius = np.sqrt(-2.0 * np.log(u[0::2]))
    angle = 2.0 * np.pi * u[1::2]
    out = np.empty(2 * m)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:n]

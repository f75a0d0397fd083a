"""Pure numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` function for function. Results agree with the
compiled versions to a few ulp (transcendentals come from different libms),
and each backend is deterministic on its own.
"""

import numpy as np

BACKEND = "python"

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SH32 = np.uint64(32)
_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32-10 bijection on broadcastable uint32-valued arrays."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in (c0, c1, c2, c3))
    k0 = np.uint64(int(k0) & 0xFFFFFFFF)
    k1 = np.uint64(int(k1) & 0xFFFFFFFF)
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> _SH32) ^ c1 ^ k0,
            p1 & _MASK32,
            (p0 >> _SH32) ^ c3 ^ k1,
            p0 & _MASK32,
        )
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def _unit(hi, lo):
    # 53-bit uniform in [0, 1)
    return ((hi >> np.uint64(5)).astype(np.float64) * 67108864.0
            + (lo >> np.uint64(6)).astype(np.float64)) * _INV_2_53


def _split_seed(seed):
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return seed & 0xFFFFFFFF, seed >> 32


def normals(seed, streams, counters, d, tag=0):
    """Standard normals of shape ``(len(streams), d)``.

    Row ``i`` depends only on ``(seed, streams[i], counters[i], tag)``.
    """
    streams = np.ascontiguousarray(streams, dtype=np.uint64)
    counters = np.ascontiguousarray(counters, dtype=np.uint64)
    n = streams.shape[0]
    nb = (d + 1) // 2
    k0, k1 = _split_seed(seed)
    blocks = np.arange(nb, dtype=np.uint64)[None, :]
    w0, w1, w2, w3 = philox4x32(
        blocks,
        (counters & _MASK32)[:, None],
        (streams & _MASK32)[:, None],
        np.uint64(tag),
        k0,
        k1,
    )
    u1 = _unit(w0, w1)
    u2 = _unit(w2, w3)
    r = np.sqrt(-2.0 * np.log(1.0 - u1))
    a = _TWO_PI * u2
    out = np.empty((n, 2 * nb))
    out[:, 0::2] = r * np.cos(a)
    out[:, 1::2] = r * np.sin(a)
    return out[:, :d]


def signs(seed, streams, counters, tag=1):
    """Rademacher (+1/-1) draws, one per row."""
    streams = np.ascontiguousarray(streams, dtype=np.uint64)
    counters = np.ascontiguousarray(counters, dtype=np.uint64)
    k0, k1 = _split_seed(seed)
    w0, _, _, _ = philox4x32(np.uint64(0), counters & _MASK32,
                             streams & _MASK32, np.uint64(tag), k0, k1)
    return np.where((w0 & np.uint64(1)) == 1, 1.0, -1.0)


def scaled_error(x_em, x_heun, x_prev, eps_abs, eps_rel, linf):
    """Per-row scaled error between two proposals.

    ``x_prev=None`` selects the current-only mixed tolerance.
    """
    mag = np.abs(x_em)
    if x_prev is not None:
        mag = np.maximum(mag, np.abs(x_prev))
    delta = np.maximum(eps_abs, eps_rel * mag)
    resid = (x_em - x_heun) / delta
    if linf:
        return np.max(np.abs(resid), axis=1)
    return np.sqrt(np.sum(resid * resid, axis=1) / resid.shape[1])


def linear_scheme_paths(factor, noise_scale, y0, n_paths, n_steps, seed, tag,
                        stream_offset=0):
    """Iterate ``y <- factor * y + noise_scale * z`` over independent paths.

    Path ``p`` draws its ``k``-th normal from stream ``stream_offset + p``,
    so runs with more steps extend runs with fewer steps path by path.
    """
    streams = np.arange(stream_offset, stream_offset + n_paths, dtype=np.uint64)
    k0, k1 = _split_seed(seed)
    y = np.full(n_paths, float(y0))
    spare = None
    for k in range(n_steps):
        if k % 2 == 0:
            w0, w1, w2, w3 = philox4x32(np.uint64(k // 2), np.uint64(0),
                                        streams, np.uint64(tag), k0, k1)
            r = np.sqrt(-2.0 * np.log(1.0 - _unit(w0, w1)))
            a = _TWO_PI * _unit(w2, w3)
            z = r * np.cos(a)
            spare = r * np.sin(a)
        else:
            z = spare
        y = factor * y + noise_scale * z
    return y

"""Pure numpy implementations of the hot kernels.

Every function here has a twin in ``_ckernels.pyx``. The two must agree
bit-for-bit: accumulations are done with ``np.bincount``, which adds in index
order exactly like the compiled loops.
"""
import numpy as np

_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_PHILOX_M0 = np.uint64(0xD2E7470EE14C6C93)
_PHILOX_M1 = np.uint64(0xCA5A826395121157)
_PHILOX_W0 = np.uint64(0x9E3779B97F4A7C15)
_PHILOX_W1 = np.uint64(0xBB67AE8584CAA73B)
_ROUNDS = 10


def _mulhilo(a, b):
    """64x64 -> 128 bit product of uint64 arrays as (hi, lo)."""
    a_lo, a_hi = a & _M32, a >> _S32
    b_lo, b_hi = b & _M32, b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _M32) + (hl & _M32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    return hi, a * b


def philox_bits(seed, streams, subs, counters):
    """Raw 64-bit Philox4x64-10 outputs.

    Element ``i`` is output number ``counters[i]`` of the numpy ``Philox``
    generator keyed by ``(seed, streams[i])`` whose counter starts at
    ``(0, subs[i], 0, 0)``.
    """
    streams = np.asarray(streams, dtype=np.uint64)
    subs = np.asarray(subs, dtype=np.uint64)
    counters = np.asarray(counters, dtype=np.uint64)
    streams, subs, counters = np.broadcast_arrays(streams, subs, counters)
    with np.errstate(over="ignore"):
        c0 = (counters >> np.uint64(2)) + np.uint64(1)
        c1 = subs.copy()
        c2 = np.zeros_like(c0)
        c3 = np.zeros_like(c0)
        k0 = np.full(c0.shape, np.uint64(seed), dtype=np.uint64)
        k1 = streams.copy()
        for r in range(_ROUNDS):
            if r:
                k0 = k0 + _PHILOX_W0
                k1 = k1 + _PHILOX_W1
            hi0, lo0 = _mulhilo(np.broadcast_to(_PHILOX_M0, c0.shape), c0)
            hi1, lo1 = _mulhilo(np.broadcast_to(_PHILOX_M1, c2.shape), c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    word = (counters & np.uint64(3)).astype(np.intp)
    out = np.choose(word, (c0, c1, c2, c3))
    return np.ascontiguousarray(out, dtype=np.uint64)


def grid_jump_sums(path_ids, grid_idx, sizes, n_paths, n_grid):
    """Cumulative jump sums at grid points.

    ``grid_idx[j]`` is the first grid index whose time is >= the jump time.
    Returns an array of shape (n_paths, n_grid, dim): bin first, then a
    running sum along the grid axis.
    """
    sizes = np.asarray(sizes, dtype=np.float64)
    dim = sizes.shape[1]
    out = np.zeros((n_paths, n_grid, dim))
    if len(path_ids):
        flat = np.asarray(path_ids, dtype=np.int64) * n_grid + np.asarray(grid_idx, dtype=np.int64)
        for d in range(dim):
            out[:, :, d] = np.bincount(flat, weights=sizes[:, d], minlength=n_paths * n_grid).reshape(
                n_paths, n_grid
            )
    np.cumsum(out, axis=1, out=out)
    return out


def segment_count_sum(path_ids, mask, values, n_paths):
    """Per-path count of masked entries and per-path sums of ``values`` rows."""
    values = np.asarray(values, dtype=np.float64)
    ncol = values.shape[1]
    mask = np.asarray(mask, dtype=bool)
    ids = np.asarray(path_ids, dtype=np.int64)[mask]
    counts = np.bincount(ids, minlength=n_paths).astype(np.int64)
    sums = np.zeros((n_paths, ncol))
    for c in range(ncol):
        sums[:, c] = np.bincount(ids, weights=values[mask, c], minlength=n_paths)
    return counts, sums


def first_masked_time(path_ids, times, mask, n_paths):
    """Earliest masked time per path (``inf`` where a path has none)."""
    out = np.full(n_paths, np.inf)
    mask = np.asarray(mask, dtype=bool)
    np.minimum.at(out, np.asarray(path_ids, dtype=np.int64)[mask], np.asarray(times)[mask])
    return out

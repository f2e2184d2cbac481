"""The jump measure of simulated paths.

All functions read the explicit jump list, so they are exact. They accept a
single :class:`~levyito.simulate.PathSample` (scalar results) or a
:class:`~levyito.simulate.PathBatch` (one result per path).
"""
import numpy as np

from . import _kernels
from .measure import nu_integral
from .simulate import PathBatch, PathSample


def _require_region(region):
    if not region.bounded_away_from_zero():
        raise ValueError("region must keep 0 out of its closure")


def _jumps(p):
    if isinstance(p, PathBatch):
        return p.path_ids, p.jump_times, p.jump_sizes, p.n_paths, False
    if isinstance(p, PathSample):
        return np.zeros(len(p.jump_times), np.int64), p.jump_times, p.jump_sizes, 1, True
    raise TypeError(f"expected PathSample or PathBatch, got {type(p).__name__}")


def _in_region(sizes, region):
    if not len(sizes):
        return np.zeros(0, bool)
    return region.contains(sizes[:, 0] if sizes.shape[1] == 1 else sizes)


def _check_time(p, t):
    if not 0 <= t <= p.horizon:
        raise ValueError(f"time {t} outside [0, {p.horizon}]")


def jump_times_in(p, region):
    """Times ``S^1_B < S^2_B < ...`` of jumps with size in ``region``.

    A list of arrays (one per path) for batches.
    """
    _require_region(region)
    pid, times, sizes, n, single = _jumps(p)
    hit = _in_region(sizes, region)
    if single:
        return times[hit]
    offsets = np.searchsorted(pid[hit], np.arange(n + 1))
    sel = times[hit]
    return [sel[offsets[i]:offsets[i + 1]] for i in range(n)]


def count_jumps(p, region, t):
    """``N_t(B)``: number of jumps with size in ``region`` up to time ``t``."""
    _require_region(region)
    _check_time(p, t)
    pid, times, sizes, n, single = _jumps(p)
    mask = _in_region(sizes, region) & (times <= t)
    counts = np.bincount(pid[mask], minlength=n).astype(np.int64)
    return int(counts[0]) if single else counts


def _f_values(f, sizes, dim):
    x = sizes[:, 0] if dim == 1 else sizes
    vals = np.asarray(f(x), dtype=float)
    return vals.reshape(len(sizes), -1)


def jump_integral(p, f, region, t):
    """``int_B f(x) N_t(dx) = sum_{tau <= t, Delta in B} f(Delta)``.

    ``f`` maps an array of sizes (``(J,)`` in one dimension, ``(J, n)``
    otherwise) to scalars or vectors. ``f=None`` is the identity, giving
    ``X_t(B)``.
    """
    _require_region(region)
    _check_time(p, t)
    pid, times, sizes, n, single = _jumps(p)
    dim = sizes.shape[1]
    mask = _in_region(sizes, region) & (times <= t)
    if f is None:
        vals = sizes
    else:
        vals = _f_values(f, sizes, dim) if len(sizes) else np.zeros((0, _out_width(f, dim)))
    sums = _kernels.segment_count_sum(pid, mask, vals, n)[1]
    out = sums[:, 0] if sums.shape[1] == 1 else sums
    return out[0] if single else out


def _out_width(f, dim):
    probe = np.ones((1, dim)) if dim > 1 else np.ones(1)
    return int(np.asarray(f(probe), dtype=float).size)


def compensated_jump_process(p, region, m, t):
    """``Y_t(B) = X_t(B) - t int_B x nu(dx)``."""
    x_t = jump_integral(p, None, region, t)
    dim = p.jump_sizes.shape[1]
    if dim == 1:
        comp = float(nu_integral(m, lambda x: x, region))
    else:
        comp = np.asarray(nu_integral(m, lambda x: x, region), dtype=float)
    return x_t - t * comp


def detect_jumps_by_threshold(p, q, k=6.0):
    """Diagnostic only: grid increments larger than ``k * sigma * sqrt(dt)``.

    Returns the indices ``i`` whose increment over ``[t_{i-1}, t_i]``
    exceeds the threshold (per coordinate, using the diagonal of ``Q``).
    Jumps below grid resolution are confounded with diffusion, so this is
    never used by the checks.
    """
    if not isinstance(p, PathSample):
        raise TypeError("threshold detection works on a single path")
    inc = np.abs(np.diff(p.values, axis=0))
    sd = np.sqrt(np.maximum(np.diag(np.atleast_2d(q)), 0.0))[None, :] * np.sqrt(np.diff(p.grid))[:, None]
    return np.nonzero(np.any(inc > k * sd, axis=1))[0] + 1

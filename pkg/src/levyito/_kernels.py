"""Kernel backend selection.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
numpy versions in ``_kernels_py`` are used. Setting ``LEVYITO_PURE_PYTHON=1``
forces the fallback. Both backends produce bit-identical results.
"""
import os

from . import _kernels_py

try:
    if os.environ.get("LEVYITO_PURE_PYTHON"):
        raise ImportError("pure-python backend requested")
    from . import _ckernels as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

BACKEND = "cython" if _compiled is not None else "python"
_impl = _BACKENDS[BACKEND]


def available_backends():
    return sorted(_BACKENDS)


def set_backend(name):
    """Switch the active kernel backend; returns the previous name."""
    global BACKEND, _impl
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available (have {available_backends()})")
    previous = BACKEND
    BACKEND, _impl = name, _BACKENDS[name]
    return previous


def philox_bits(seed, streams, subs, counters):
    return _impl.philox_bits(seed, streams, subs, counters)


def grid_jump_sums(path_ids, grid_idx, sizes, n_paths, n_grid):
    return _impl.grid_jump_sums(path_ids, grid_idx, sizes, n_paths, n_grid)


def segment_count_sum(path_ids, mask, values, n_paths):
    return _impl.segment_count_sum(path_ids, mask, values, n_paths)


def first_masked_time(path_ids, times, mask, n_paths):
    return _impl.first_masked_time(path_ids, times, mask, n_paths)

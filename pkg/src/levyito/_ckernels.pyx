# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_kernels_py``; outputs are bit-identical."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()


cdef extern from "_philox.h" nogil:
    uint64_t levyito_philox_at(uint64_t k0, uint64_t k1, uint64_t sub, uint64_t counter)


def philox_bits(seed, streams, subs, counters):
    streams, subs, counters = np.broadcast_arrays(
        np.asarray(streams, dtype=np.uint64),
        np.asarray(subs, dtype=np.uint64),
        np.asarray(counters, dtype=np.uint64),
    )
    shape = streams.shape
    cdef const uint64_t[::1] st = np.ascontiguousarray(streams).ravel()
    cdef const uint64_t[::1] sb = np.ascontiguousarray(subs).ravel()
    cdef const uint64_t[::1] ct = np.ascontiguousarray(counters).ravel()
    out = np.empty(st.shape[0], dtype=np.uint64)
    cdef uint64_t[::1] o = out
    cdef uint64_t k0 = <uint64_t>seed
    cdef Py_ssize_t i, n = st.shape[0]
    with nogil:
        for i in range(n):
            o[i] = levyito_philox_at(k0, st[i], sb[i], ct[i])
    return out.reshape(shape)


def grid_jump_sums(path_ids, grid_idx, sizes, Py_ssize_t n_paths, Py_ssize_t n_grid):
    cdef const int64_t[::1] pid = np.ascontiguousarray(path_ids, dtype=np.int64)
    cdef const int64_t[::1] gid = np.ascontiguousarray(grid_idx, dtype=np.int64)
    cdef const double[:, ::1] sz = np.ascontiguousarray(sizes, dtype=np.float64)
    cdef Py_ssize_t dim = sz.shape[1]
    out = np.zeros((n_paths, n_grid, dim))
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t j, p, g, d, nj = pid.shape[0]
    with nogil:
        for j in range(nj):
            for d in range(dim):
                o[pid[j], gid[j], d] += sz[j, d]
        for p in range(n_paths):
            for g in range(1, n_grid):
                for d in range(dim):
                    o[p, g, d] = o[p, g - 1, d] + o[p, g, d]
    return out


def segment_count_sum(path_ids, mask, values, Py_ssize_t n_paths):
    cdef const int64_t[::1] pid = np.ascontiguousarray(path_ids, dtype=np.int64)
    cdef const cnp.npy_bool[::1] mk = np.ascontiguousarray(mask, dtype=np.bool_)
    cdef const double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t ncol = v.shape[1]
    counts = np.zeros(n_paths, dtype=np.int64)
    sums = np.zeros((n_paths, ncol))
    cdef int64_t[::1] c = counts
    cdef double[:, ::1] s = sums
    cdef Py_ssize_t j, k, nj = pid.shape[0]
    with nogil:
        for j in range(nj):
            if mk[j]:
                c[pid[j]] += 1
                for k in range(ncol):
                    s[pid[j], k] += v[j, k]
    return counts, sums


def first_masked_time(path_ids, times, mask, Py_ssize_t n_paths):
    cdef const int64_t[::1] pid = np.ascontiguousarray(path_ids, dtype=np.int64)
    cdef const double[::1] tm = np.ascontiguousarray(times, dtype=np.float64)
    cdef const cnp.npy_bool[::1] mk = np.ascontiguousarray(mask, dtype=np.bool_)
    out = np.full(n_paths, np.inf)
    cdef double[::1] o = out
    cdef Py_ssize_t j, nj = pid.shape[0]
    with nogil:
        for j in range(nj):
            if mk[j] and tm[j] < o[pid[j]]:
                o[pid[j]] = tm[j]
    return out

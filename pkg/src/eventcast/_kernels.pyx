# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the per-event and per-step hot loops.

Each function mirrors the one of the same name in ``_pykernels`` and gives
bit-identical results (same summation order).
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def run_partitioned(const int[:, ::1] table, const int[::1] symbols, const int[::1] parts, int[::1] current):
    cdef Py_ssize_t n = symbols.shape[0]
    cdef Py_ssize_t i
    cdef int p, q
    out_arr = np.empty(n, dtype=np.int32)
    cdef int[::1] out = out_arr
    with nogil:
        for i in range(n):
            p = parts[i]
            q = table[current[p], symbols[i]]
            current[p] = q
            out[i] = q
    return out_arr


def first_hit(const long[::1] indptr, const int[::1] indices, const double[::1] probs,
              const unsigned char[::1] final, long start, long h, double cutoff):
    cdef Py_ssize_t S = indptr.shape[0] - 1
    out_arr = np.zeros(h, dtype=np.float64)
    cdef double[::1] out = out_arr
    mass_arr = np.zeros(S, dtype=np.float64)
    nmass_arr = np.zeros(S, dtype=np.float64)
    cdef double[::1] mass = mass_arr
    cdef double[::1] nmass = nmass_arr
    act_arr = np.empty(S, dtype=np.int64)
    nact_arr = np.empty(S, dtype=np.int64)
    cdef long[::1] act = act_arr
    cdef long[::1] nact = nact_arr
    touched_arr = np.zeros(S, dtype=np.uint8)
    cdef unsigned char[::1] touched = touched_arr
    cdef Py_ssize_t n_act = 1, n_nact, a, k, n_keep
    cdef long i, j, step
    cdef double x, y, hit
    act[0] = start
    mass[start] = 1.0
    with nogil:
        for step in range(h):
            n_nact = 0
            hit = 0.0
            for a in range(n_act):
                i = act[a]
                x = mass[i]
                mass[i] = 0.0
                for k in range(indptr[i], indptr[i + 1]):
                    j = indices[k]
                    y = x * probs[k]
                    if final[j]:
                        hit = hit + y
                    else:
                        if not touched[j]:
                            touched[j] = 1
                            nact[n_nact] = j
                            n_nact += 1
                            nmass[j] = y
                        else:
                            nmass[j] = nmass[j] + y
            out[step] = hit
            n_keep = 0
            for a in range(n_nact):
                j = nact[a]
                touched[j] = 0
                y = nmass[j]
                nmass[j] = 0.0
                if (cutoff > 0.0 and y >= cutoff) or (cutoff <= 0.0 and y > 0.0):
                    act[n_keep] = j
                    mass[j] = y
                    n_keep += 1
            n_act = n_keep
            if n_act == 0:
                break
    return out_arr

# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled trace replay kernel; mirrors ``_audit_py.replay``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def replay(items, user_type, item_type, int q_U, int q_I, int s_I, int s_U):
    cdef cnp.int64_t[:, ::1] it = np.ascontiguousarray(items, dtype=np.int64)
    cdef cnp.int64_t[::1] utype = np.ascontiguousarray(user_type, dtype=np.int64)
    cdef cnp.int64_t[::1] itype = np.ascontiguousarray(item_type, dtype=np.int64)
    cdef Py_ssize_t T = it.shape[0]
    cdef Py_ssize_t N = it.shape[1]
    cdef Py_ssize_t M = itype.shape[0]

    seen_ut_a = np.zeros((M, q_U), np.uint8)
    seen_ui_a = np.zeros((N, q_I), np.uint8)
    seen_pair_a = np.zeros((q_U, q_I), np.uint8)
    c_a = np.zeros(M, np.int32)
    d_a = np.zeros(N, np.int32)
    stamp_a = np.full(M, -1, np.int64)
    cat_a = np.zeros((T, N), np.int8)
    c_at_a = np.zeros((T, N), np.int32)
    d_at_a = np.zeros((T, N), np.int32)

    cdef cnp.uint8_t[:, ::1] seen_ut = seen_ut_a
    cdef cnp.uint8_t[:, ::1] seen_ui = seen_ui_a
    cdef cnp.uint8_t[:, ::1] seen_pair = seen_pair_a
    cdef cnp.int32_t[::1] c = c_a
    cdef cnp.int32_t[::1] d = d_a
    cdef cnp.int64_t[::1] stamp = stamp_a
    cdef cnp.int8_t[:, ::1] cat = cat_a
    cdef cnp.int32_t[:, ::1] c_at = c_at_a
    cdef cnp.int32_t[:, ::1] d_at = d_at_a

    cdef Py_ssize_t t, u, i, w, j
    cdef int ci, du
    cdef bint new_ut, lo_c, lo_d
    cdef long long first_small = 0
    cdef long long simultaneous = 0

    for t in range(T):
        for u in range(N):
            i = it[t, u]
            w = utype[u]
            j = itype[i]
            ci = c[i]
            du = d[u]
            c_at[t, u] = ci
            d_at[t, u] = du
            new_ut = seen_ut[i, w] == 0
            lo_c = ci < s_I
            lo_d = du < s_U
            if lo_c and lo_d:
                cat[t, u] = 1
            elif lo_c and new_ut:
                cat[t, u] = 2
            elif (not lo_c) and lo_d and seen_ui[u, j] == 0:
                cat[t, u] = 3
            elif (not lo_c) and (not lo_d) and seen_pair[w, j] == 0:
                cat[t, u] = 4
            if new_ut and lo_c:
                first_small += 1
                if stamp[i] == t:
                    simultaneous += 1
                else:
                    stamp[i] = t
        for u in range(N):
            i = it[t, u]
            w = utype[u]
            j = itype[i]
            if seen_ut[i, w] == 0:
                seen_ut[i, w] = 1
                c[i] += 1
            if seen_ui[u, j] == 0:
                seen_ui[u, j] = 1
                d[u] += 1
            seen_pair[w, j] = 1
    return cat_a, c_at_a, d_at_a, c_a, d_a, int(first_small), int(simultaneous)

"""Reference (numpy) implementation of the trace replay kernel.

Same contract as the compiled ``_audit_ext.replay``.
"""
from __future__ import annotations

import numpy as np


def replay(items, user_type, item_type, q_U: int, q_I: int, s_I: int, s_U: int):
    """Replay a trace and classify every recommendation.

    Parameters
    ----------
    items : int64 array (T, N)
        Compact item indices in ``[0, M)``.
    user_type, item_type : int64 arrays
        Ground-truth types of users (length N) and compact items (length M).

    Returns
    -------
    cat : int8 (T, N)
        0 for none, otherwise the bad-event category 1..4.
    c_at, d_at : int32 (T, N)
        Item and user counters just before each recommendation.
    c_final : int32 (M,)
    d_final : int32 (N,)
    first_small : int
        Recommendations where the user's type had not rated the item and the
        item counter was below ``s_I``.
    simultaneous : int
        Extra such events beyond the first for the same item in one step.
    """
    items = np.asarray(items, np.int64)
    T, N = items.shape
    M = len(item_type)
    utype = np.asarray(user_type, np.int64)
    itype = np.asarray(item_type, np.int64)
    seen_ut = np.zeros((M, q_U), bool)
    seen_ui = np.zeros((N, q_I), bool)
    seen_pair = np.zeros((q_U, q_I), bool)
    c = np.zeros(M, np.int32)
    d = np.zeros(N, np.int32)
    cat = np.zeros((T, N), np.int8)
    c_at = np.zeros((T, N), np.int32)
    d_at = np.zeros((T, N), np.int32)
    users = np.arange(N)
    first_small = 0
    simultaneous = 0
    for t in range(T):
        it = items[t]
        jt = itype[it]
        ci = c[it]
        du = d.copy()
        new_ut = ~seen_ut[it, utype]
        new_ui = ~seen_ui[users, jt]
        new_pair = ~seen_pair[utype, jt]
        lo_c = ci < s_I
        lo_d = du < s_U
        row = np.zeros(N, np.int8)
        row[lo_c & lo_d] = 1
        row[lo_c & ~lo_d & new_ut] = 2
        row[~lo_c & lo_d & new_ui] = 3
        row[~lo_c & ~lo_d & new_pair] = 4
        cat[t] = row
        c_at[t] = ci
        d_at[t] = du
        first = new_ut & lo_c
        n_first = int(first.sum())
        first_small += n_first
        if n_first:
            simultaneous += n_first - len(np.unique(it[first]))
        # updates after the whole step is classified
        ut_keys = np.unique(it[new_ut] * q_U + utype[new_ut])
        np.add.at(c, ut_keys // q_U, 1)
        seen_ut[ut_keys // q_U, ut_keys % q_U] = True
        d += new_ui.astype(np.int32)
        seen_ui[users, jt] = True
        seen_pair[utype, jt] = True
    return cat, c_at, d_at, c, d, first_small, simultaneous

"""Compiled inner loops for tree growing and tree evaluation.

Column data is passed in a value-sorted CSC layout: for column ``j`` the slice
``col_ptr[j]:col_ptr[j + 1]`` of ``col_rows``/``col_vals`` lists the rows with a
stored (nonzero) value, ordered by ascending value. Rows without a stored value
are "missing" and follow the learned default direction of each split.

A grown tree is a set of parallel arrays indexed by node id (root = 0):
``feature`` (-1 for leaves), ``threshold``, ``default_left``, ``left``,
``right`` and ``value`` (leaf weight, 0 on internal nodes).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _gain(gl, hl, gr, hr, lam, gamma):
    return 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam)
                  - (gl + gr) * (gl + gr) / (hl + hr + lam)) - gamma


@njit(cache=True, nogil=True)
def _better(gain, feat, thr, best_gain, best_feat, best_thr):
    if gain > best_gain:
        return True
    if gain == best_gain and best_feat >= 0:
        if feat < best_feat:
            return True
        if feat == best_feat and thr < best_thr:
            return True
    return False


@njit(cache=True, nogil=True)
def grow_tree(col_ptr, col_rows, col_vals, grad, hess, node_of_row, feat_mask,
              max_depth, min_child_weight, gamma, lam):
    """Grow one tree level by level with exact greedy, sparsity-aware splits.

    ``node_of_row`` must hold 0 for rows in the tree's sample and -1 otherwise;
    it is overwritten with final node assignments.
    """
    n_rows = grad.shape[0]
    n_cols = col_ptr.shape[0] - 1
    max_nodes = 2 ** (max_depth + 1) - 1

    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes)
    default_left = np.zeros(max_nodes, np.bool_)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    value = np.zeros(max_nodes)
    node_g = np.zeros(max_nodes)
    node_h = np.zeros(max_nodes)
    node_cnt = np.zeros(max_nodes, np.int64)

    for i in range(n_rows):
        if node_of_row[i] == 0:
            node_g[0] += grad[i]
            node_h[0] += hess[i]
            node_cnt[0] += 1
    n_nodes = 1

    # per-node split search state
    best_gain = np.zeros(max_nodes)
    best_feat = np.full(max_nodes, -1, np.int64)
    best_thr = np.zeros(max_nodes)
    best_dleft = np.zeros(max_nodes, np.bool_)
    best_gl = np.zeros(max_nodes)
    best_hl = np.zeros(max_nodes)
    best_cl = np.zeros(max_nodes, np.int64)
    is_active = np.zeros(max_nodes, np.bool_)

    # per-feature scan scratch
    acc_g = np.zeros(max_nodes)
    acc_h = np.zeros(max_nodes)
    acc_c = np.zeros(max_nodes, np.int64)
    last = np.zeros(max_nodes)
    touched = np.zeros(max_nodes, np.int64)
    is_touched = np.zeros(max_nodes, np.bool_)

    level_start = 0
    level_end = 1
    depth = 0
    while depth < max_depth and level_end > level_start:
        for nd in range(level_start, level_end):
            is_active[nd] = True
            best_gain[nd] = 0.0
            best_feat[nd] = -1

        for f in range(n_cols):
            if not feat_mask[f]:
                continue
            lo = col_ptr[f]
            hi = col_ptr[f + 1]
            if lo == hi:
                continue

            # ascending scan: missing rows go right
            n_touched = 0
            for e in range(lo, hi):
                nd = node_of_row[col_rows[e]]
                if nd < 0 or not is_active[nd]:
                    continue
                v = col_vals[e]
                if not is_touched[nd]:
                    is_touched[nd] = True
                    touched[n_touched] = nd
                    n_touched += 1
                    acc_g[nd] = 0.0
                    acc_h[nd] = 0.0
                    acc_c[nd] = 0
                elif v != last[nd]:
                    gl = acc_g[nd]
                    hl = acc_h[nd]
                    gr = node_g[nd] - gl
                    hr = node_h[nd] - hl
                    if (hl >= min_child_weight and hr >= min_child_weight
                            and acc_c[nd] > 0 and node_cnt[nd] - acc_c[nd] > 0):
                        thr = 0.5 * (last[nd] + v)
                        if thr <= last[nd]:
                            thr = v
                        gain = _gain(gl, hl, gr, hr, lam, gamma)
                        if _better(gain, f, thr, best_gain[nd], best_feat[nd], best_thr[nd]):
                            best_gain[nd] = gain
                            best_feat[nd] = f
                            best_thr[nd] = thr
                            best_dleft[nd] = False
                            best_gl[nd] = gl
                            best_hl[nd] = hl
                            best_cl[nd] = acc_c[nd]
                acc_g[nd] += grad[col_rows[e]]
                acc_h[nd] += hess[col_rows[e]]
                acc_c[nd] += 1
                last[nd] = v
            for t in range(n_touched):
                is_touched[touched[t]] = False

            # descending scan: missing rows go left
            n_touched = 0
            for e in range(hi - 1, lo - 1, -1):
                nd = node_of_row[col_rows[e]]
                if nd < 0 or not is_active[nd]:
                    continue
                v = col_vals[e]
                if not is_touched[nd]:
                    is_touched[nd] = True
                    touched[n_touched] = nd
                    n_touched += 1
                    acc_g[nd] = 0.0
                    acc_h[nd] = 0.0
                    acc_c[nd] = 0
                elif v != last[nd]:
                    gr = acc_g[nd]
                    hr = acc_h[nd]
                    gl = node_g[nd] - gr
                    hl = node_h[nd] - hr
                    cr = acc_c[nd]
                    if (hl >= min_child_weight and hr >= min_child_weight
                            and cr > 0 and node_cnt[nd] - cr > 0):
                        thr = 0.5 * (v + last[nd])
                        if thr <= v:
                            thr = last[nd]
                        gain = _gain(gl, hl, gr, hr, lam, gamma)
                        if _better(gain, f, thr, best_gain[nd], best_feat[nd], best_thr[nd]):
                            best_gain[nd] = gain
                            best_feat[nd] = f
                            best_thr[nd] = thr
                            best_dleft[nd] = True
                            best_gl[nd] = gl
                            best_hl[nd] = hl
                            best_cl[nd] = node_cnt[nd] - cr
                acc_g[nd] += grad[col_rows[e]]
                acc_h[nd] += hess[col_rows[e]]
                acc_c[nd] += 1
                last[nd] = v
            # present-vs-missing split: every stored value right, missing left
            for t in range(n_touched):
                nd = touched[t]
                is_touched[nd] = False
                gr = acc_g[nd]
                hr = acc_h[nd]
                gl = node_g[nd] - gr
                hl = node_h[nd] - hr
                cr = acc_c[nd]
                if (hl >= min_child_weight and hr >= min_child_weight
                        and cr > 0 and node_cnt[nd] - cr > 0):
                    thr = last[nd]
                    gain = _gain(gl, hl, gr, hr, lam, gamma)
                    if _better(gain, f, thr, best_gain[nd], best_feat[nd], best_thr[nd]):
                        best_gain[nd] = gain
                        best_feat[nd] = f
                        best_thr[nd] = thr
                        best_dleft[nd] = True
                        best_gl[nd] = gl
                        best_hl[nd] = hl
                        best_cl[nd] = node_cnt[nd] - cr

        # materialise splits for this level
        next_start = n_nodes
        for nd in range(level_start, level_end):
            is_active[nd] = False
            f = best_feat[nd]
            if f < 0:
                continue
            lc = n_nodes
            rc = n_nodes + 1
            n_nodes += 2
            feature[nd] = f
            threshold[nd] = best_thr[nd]
            default_left[nd] = best_dleft[nd]
            left[nd] = lc
            right[nd] = rc
            node_g[lc] = best_gl[nd]
            node_h[lc] = best_hl[nd]
            node_cnt[lc] = best_cl[nd]
            node_g[rc] = node_g[nd] - best_gl[nd]
            node_h[rc] = node_h[nd] - best_hl[nd]
            node_cnt[rc] = node_cnt[nd] - best_cl[nd]

        if n_nodes > next_start:
            # rows of split nodes: default child first, then stored values
            for i in range(n_rows):
                nd = node_of_row[i]
                if nd >= level_start and nd < level_end and feature[nd] >= 0:
                    node_of_row[i] = left[nd] if default_left[nd] else right[nd]
            for nd in range(level_start, level_end):
                f = feature[nd]
                if f < 0:
                    continue
                dchild = left[nd] if default_left[nd] else right[nd]
                for e in range(col_ptr[f], col_ptr[f + 1]):
                    r = col_rows[e]
                    if node_of_row[r] == dchild:
                        # only rows that came from nd can sit in dchild now
                        node_of_row[r] = left[nd] if col_vals[e] < threshold[nd] else right[nd]

        level_start = next_start
        level_end = n_nodes
        depth += 1

    for nd in range(n_nodes):
        if feature[nd] < 0:
            value[nd] = -node_g[nd] / (node_h[nd] + lam)

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
            default_left[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@njit(cache=True, nogil=True)
def _lookup(indices, data, lo, hi, f):
    # binary search for column f inside one CSR row
    while lo < hi:
        mid = (lo + hi) // 2
        c = indices[mid]
        if c < f:
            lo = mid + 1
        elif c > f:
            hi = mid
        else:
            return data[mid], True
    return 0.0, False


@njit(cache=True, nogil=True)
def tree_outputs(indptr, indices, data, feature, threshold, default_left,
                 left, right, value, out, scale):
    """Add ``scale * leaf_weight`` of one tree to ``out`` for every CSR row."""
    n_rows = indptr.shape[0] - 1
    for i in range(n_rows):
        nd = 0
        lo = indptr[i]
        hi = indptr[i + 1]
        while feature[nd] >= 0:
            v, present = _lookup(indices, data, lo, hi, feature[nd])
            if not present or v == 0.0:
                nd = left[nd] if default_left[nd] else right[nd]
            elif v < threshold[nd]:
                nd = left[nd]
            else:
                nd = right[nd]
        out[i] += scale * value[nd]

"""Numba twin of boosting_np: identical tree semantics, loop-structured.

Kept in lockstep with the numpy path: same BFS node ids, same summation
order (unsorted cumulative total, sorted prefix sums per feature), same
first-strictly-best tie-breaking, so both backends emit identical trees.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LEAF_CLIP = 8.0
MIN_GAIN = 1e-12


@njit(cache=True)
def build_tree(X, g, h, max_depth, min_leaf, lam):
    n, m = X.shape
    max_nodes = 2 ** (max_depth + 1) - 1
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes, dtype=np.float64)

    # BFS queue over (node, start, end, depth); rows live in a shared index
    # buffer partitioned in place as nodes split.
    rows = np.arange(n, dtype=np.int64)
    scratch = np.empty(n, dtype=np.int64)
    q_node = np.empty(max_nodes, dtype=np.int64)
    q_start = np.empty(max_nodes, dtype=np.int64)
    q_end = np.empty(max_nodes, dtype=np.int64)
    q_depth = np.empty(max_nodes, dtype=np.int64)
    q_node[0], q_start[0], q_end[0], q_depth[0] = 0, 0, n, 0
    head, tail = 0, 1
    n_nodes = 1

    while head < tail:
        node = q_node[head]
        s = q_start[head]
        e = q_end[head]
        depth = q_depth[head]
        head += 1
        cnt = e - s

        gsum = 0.0
        hsum = 0.0
        for i in range(s, e):
            gsum += g[rows[i]]
            hsum += h[rows[i]]
        v = -gsum / (hsum + lam)
        if v > LEAF_CLIP:
            v = LEAF_CLIP
        elif v < -LEAF_CLIP:
            v = -LEAF_CLIP
        value[node] = v
        if depth >= max_depth or cnt < 2 * min_leaf:
            continue

        parent_score = gsum * gsum / (hsum + lam)
        best_gain = MIN_GAIN
        best_f = -1
        best_thr = 0.0
        xcol = np.empty(cnt, dtype=np.float64)
        for f in range(m):
            for i in range(cnt):
                xcol[i] = X[rows[s + i], f]
            order = np.argsort(xcol, kind="mergesort")
            gl = 0.0
            hl = 0.0
            for p in range(1, cnt - min_leaf + 1):
                gl += g[rows[s + order[p - 1]]]
                hl += h[rows[s + order[p - 1]]]
                if p < min_leaf:
                    continue
                lo = xcol[order[p - 1]]
                hi = xcol[order[p]]
                if lo >= hi:
                    continue
                gr = gsum - gl
                hr = hsum - hl
                gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent_score
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_thr = 0.5 * (lo + hi)
        if best_f < 0:
            continue

        # stable partition of rows[s:e] into scratch, left side first
        nl = 0
        for i in range(s, e):
            if X[rows[i], best_f] <= best_thr:
                scratch[s + nl] = rows[i]
                nl += 1
        nr = 0
        for i in range(s, e):
            if not (X[rows[i], best_f] <= best_thr):
                scratch[s + nl + nr] = rows[i]
                nr += 1
        for i in range(s, e):
            rows[i] = scratch[i]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        q_node[tail], q_start[tail], q_end[tail], q_depth[tail] = lid, s, s + nl, depth + 1
        tail += 1
        q_node[tail], q_start[tail], q_end[tail], q_depth[tail] = rid, s + nl, e, depth + 1
        tail += 1

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@njit(cache=True)
def tree_apply(feature, threshold, left, right, value, X):
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out

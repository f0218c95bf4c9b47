"""Pure-numpy regression-tree kernel (reference semantics for the numba twin).

A tree is five flat arrays indexed by node id: ``feature`` (-1 marks a leaf),
``threshold``, ``left``/``right`` child ids, and ``value`` (the Newton leaf
step, clipped to +-8). Splits maximize the second-order gain
GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam) subject to min_leaf rows per
side, scanning features in order and taking the first strictly-best gain.
"""

from __future__ import annotations

import numpy as np

LEAF_CLIP = 8.0
MIN_GAIN = 1e-12


def _leaf_value(gsum: float, hsum: float, lam: float) -> float:
    v = -gsum / (hsum + lam)
    return min(LEAF_CLIP, max(-LEAF_CLIP, v))


def build_tree(X, g, h, max_depth, min_leaf, lam):
    n, m = X.shape
    max_nodes = 2 ** (max_depth + 1) - 1
    feature = np.full(max_nodes, -1, dtype=np.int64)
    threshold = np.zeros(max_nodes, dtype=np.float64)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    value = np.zeros(max_nodes, dtype=np.float64)

    n_nodes = 1
    queue = [(0, np.arange(n, dtype=np.int64), 0)]
    while queue:
        node, rows, depth = queue.pop(0)
        cg_all = np.cumsum(g[rows])
        ch_all = np.cumsum(h[rows])
        gsum = float(cg_all[-1])
        hsum = float(ch_all[-1])
        value[node] = _leaf_value(gsum, hsum, lam)
        cnt = len(rows)
        if depth >= max_depth or cnt < 2 * min_leaf:
            continue

        parent_score = gsum * gsum / (hsum + lam)
        best_gain = MIN_GAIN
        best_f = -1
        best_thr = 0.0
        for f in range(m):
            xcol = X[rows, f]
            order = np.argsort(xcol, kind="stable")
            xs = xcol[order]
            cg = np.cumsum(g[rows[order]])
            ch = np.cumsum(h[rows[order]])
            p = np.arange(min_leaf, cnt - min_leaf + 1)
            valid = xs[p - 1] < xs[p]
            if not np.any(valid):
                continue
            p = p[valid]
            gl = cg[p - 1]
            hl = ch[p - 1]
            gr = gsum - gl
            hr = hsum - hl
            gains = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent_score
            i = int(np.argmax(gains))
            if gains[i] > best_gain:
                best_gain = float(gains[i])
                best_f = f
                best_thr = 0.5 * (xs[p[i] - 1] + xs[p[i]])
        if best_f < 0:
            continue

        go_left = X[rows, best_f] <= best_thr
        lid, rid = n_nodes, n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        queue.append((lid, rows[go_left], depth + 1))
        queue.append((rid, rows[~go_left], depth + 1))

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


def tree_apply(feature, threshold, left, right, value, X):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = feature[node] >= 0
    while np.any(active):
        idx = np.nonzero(active)[0]
        f = feature[node[idx]]
        thr = threshold[node[idx]]
        goes_left = X[idx, f] <= thr
        node[idx] = np.where(goes_left, left[node[idx]], right[node[idx]])
        active = feature[node] >= 0
    return value[node]

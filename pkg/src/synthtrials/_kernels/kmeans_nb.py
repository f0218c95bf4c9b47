"""Numba twin of kmeans_np."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _assign(X, centers):
    n = X.shape[0]
    k = centers.shape[0]
    d = X.shape[1]
    labels = np.empty(n, dtype=np.int64)
    best = np.empty(n, dtype=np.float64)
    for i in range(n):
        bj = 0
        bd = np.inf
        for j in range(k):
            acc = 0.0
            for t in range(d):
                diff = X[i, t] - centers[j, t]
                acc += diff * diff
            if acc < bd:
                bd = acc
                bj = j
        labels[i] = bj
        best[i] = bd
    return labels, best


@njit(cache=True)
def lloyd(X, centers, max_iter):
    centers = centers.copy()
    n = X.shape[0]
    k = centers.shape[0]
    d = X.shape[1]
    labels = np.full(n, -1, dtype=np.int64)
    counts = np.empty(k, dtype=np.int64)
    for _ in range(max_iter):
        new_labels, d2 = _assign(X, centers)
        for c in range(k):
            found = False
            for i in range(n):
                if new_labels[i] == c:
                    found = True
                    break
            if not found:
                far = int(np.argmax(d2))
                new_labels[far] = c
                d2[far] = 0.0
        same = True
        for i in range(n):
            if new_labels[i] != labels[i]:
                same = False
                break
        if same:
            break
        labels = new_labels
        counts[:] = 0
        sums = np.zeros((k, d), dtype=np.float64)
        for i in range(n):
            c = labels[i]
            counts[c] += 1
            for t in range(d):
                sums[c, t] += X[i, t]
        for c in range(k):
            if counts[c] > 0:  # a reseed can still leave another cluster empty
                for t in range(d):
                    centers[c, t] = sums[c, t] / counts[c]
    labels, d2 = _assign(X, centers)
    inertia = 0.0
    for i in range(n):
        inertia += d2[i]
    return centers, labels, inertia

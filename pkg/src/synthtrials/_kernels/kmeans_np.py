"""Pure-numpy Lloyd iteration (reference semantics for the numba twin).

Assign to the nearest centroid (ties to the lowest index), recompute means,
reseed an emptied cluster to the point farthest from its assigned centroid,
stop when assignments stop changing or max_iter is hit.
"""

from __future__ import annotations

import numpy as np


def _assign(X, centers):
    d2 = (
        np.sum(X * X, axis=1)[:, None]
        - 2.0 * X @ centers.T
        + np.sum(centers * centers, axis=1)[None, :]
    )
    labels = np.argmin(d2, axis=1)
    best = d2[np.arange(len(X)), labels]
    return labels.astype(np.int64), np.maximum(best, 0.0)


def lloyd(X, centers, max_iter):
    centers = centers.copy()
    k = centers.shape[0]
    labels = np.full(X.shape[0], -1, dtype=np.int64)
    for _ in range(max_iter):
        new_labels, d2 = _assign(X, centers)
        # reseed any emptied cluster to the currently worst-fit point
        for c in range(k):
            if not np.any(new_labels == c):
                far = int(np.argmax(d2))
                new_labels[far] = c
                d2[far] = 0.0
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = labels == c
            if np.any(members):  # a reseed can still leave another cluster empty
                centers[c] = X[members].mean(axis=0)
    labels, d2 = _assign(X, centers)
    return centers, labels, float(np.sum(d2))

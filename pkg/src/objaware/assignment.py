"""Exact minimum-cost bipartite assignment and the two cost constructors used
for matching predicted boxes to targets and predicted names to caption nouns.
"""

import numpy as np

from .geometry import box_pair_loss


def hungarian_solve(cost):
    """Minimum-cost assignment of every row to a distinct column.

    Shortest-augmenting-path form of Kuhn-Munkres with dual potentials,
    ``O(n^2 m)`` for an ``n x m`` matrix with ``n <= m``. Ties resolve to the
    lowest column index.

    Parameters
    ----------
    cost : array-like of shape (n_rows, n_cols)
        Finite costs, ``n_rows <= n_cols``.

    Returns
    -------
    cols : ndarray of int, shape (n_rows,)
        ``cols[i]`` is the column assigned to row ``i``.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {cost.shape}")
    n, m = cost.shape
    if n > m:
        raise ValueError(f"need rows <= cols, got {n}x{m}; transpose or truncate first")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite entries")
    if n == 0:
        return np.zeros(0, dtype=np.int64)

    # 1-based potentials; index 0 is the virtual source column
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    owner = [0] * (m + 1)  # owner[j]: row matched to column j (0 = free)
    way = [0] * (m + 1)
    inf = float("inf")
    c = cost.tolist()

    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = owner[j0]
            row = c[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = -1
            for j in range(1, m + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - ui0 - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[owner[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1

    cols = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if owner[j]:
            cols[owner[j] - 1] = j - 1
    return cols


def assignment_cost(cost, cols):
    cost = np.asarray(cost, dtype=np.float64)
    return float(cost[np.arange(len(cols)), cols].sum())


def box_match_cost(gt, pred):
    """``cost[i, j] = box_pair_loss(gt[i], pred[j])`` for center-format boxes."""
    pred = np.asarray(pred, dtype=np.float64).reshape(-1, 4)
    if len(pred) == 0:
        raise ValueError("need at least one predicted box")
    gt = np.asarray(gt, dtype=np.float64).reshape(-1, 4)
    if len(gt) == 0:
        return np.zeros((0, len(pred)))
    return box_pair_loss(gt[:, None, :], pred[None, :, :])


def noun_align_cost(nouns, names):
    """Negative cosine similarity between caption nouns (rows) and predicted
    object names (columns)."""
    nouns = np.asarray(nouns, dtype=np.float64)
    names = np.asarray(names, dtype=np.float64)
    if nouns.ndim != 2 or names.ndim != 2 or (len(nouns) and nouns.shape[1] != names.shape[1]):
        raise ValueError(f"embedding shapes do not align: {nouns.shape} vs {names.shape}")
    nn_ = np.linalg.norm(nouns, axis=1)
    hn = np.linalg.norm(names, axis=1)
    if np.any(nn_ == 0) or np.any(hn == 0):
        raise ValueError("zero-norm embedding")
    return -(nouns / nn_[:, None]) @ (names / hn[:, None]).T


def match_nouns(nouns, names):
    """Align each noun to a distinct predicted name; nouns beyond the number of
    names are dropped from the end. Returns ``(noun_idx, name_idx)``."""
    nouns = np.asarray(nouns, dtype=np.float64)
    names = np.asarray(names, dtype=np.float64)
    keep = min(len(nouns), len(names))
    if keep == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    cols = hungarian_solve(noun_align_cost(nouns[:keep], names))
    return np.arange(keep), cols

"""Hot loops for the tree ensemble and nearest-neighbour models.

Each kernel has a loop implementation (compiled with numba when present)
and a vectorised numpy implementation. Both evaluate the same
floating-point expressions in the same order, so they agree bit for bit.
"""

import numpy as np

from .._accel import HAVE_NUMBA, njit


# ---- split search ----------------------------------------------------------

def _best_split_loop(X, y, w, idx, feats):
    """Best Gini split of the node holding ``idx`` over candidate ``feats``.

    Returns (feature, threshold, gain); feature is -1 when no split exists.
    ``gain`` is the weighted impurity decrease W*g - W_L*g_L - W_R*g_R.
    """
    n = idx.shape[0]
    p0 = 0.0
    p1 = 0.0
    for i in range(n):
        if y[idx[i]] == 1:
            p1 += w[idx[i]]
        else:
            p0 += w[idx[i]]
    wt = p0 + p1
    parent = (p0 * p0 + p1 * p1) / wt
    best_f = -1
    best_t = 0.0
    best_g = 0.0
    vals = np.empty(n)
    for fi in range(feats.shape[0]):
        f = feats[fi]
        for i in range(n):
            vals[i] = X[idx[i], f]
        order = np.argsort(vals, kind="mergesort")
        l0 = 0.0
        l1 = 0.0
        for i in range(n - 1):
            j = idx[order[i]]
            if y[j] == 1:
                l1 += w[j]
            else:
                l0 += w[j]
            v = vals[order[i]]
            vn = vals[order[i + 1]]
            if v == vn:
                continue
            wl = l0 + l1
            r0 = p0 - l0
            r1 = p1 - l1
            wr = r0 + r1
            gain = (l0 * l0 + l1 * l1) / wl + (r0 * r0 + r1 * r1) / wr - parent
            if gain > best_g:
                best_g = gain
                best_f = f
                t = (v + vn) / 2.0
                if t == vn:
                    t = v
                best_t = t
    return best_f, best_t, best_g


def _best_split_np(X, y, w, idx, feats):
    sub = X[np.ix_(idx, feats)]
    order = np.argsort(sub, axis=0, kind="mergesort")
    vals = np.take_along_axis(sub, order, axis=0)
    ys = y[idx][order]
    ws = w[idx][order]
    w1 = np.where(ys == 1, ws, 0.0)
    w0 = np.where(ys == 1, 0.0, ws)
    # sequential cumsums reproduce the loop's summation order exactly
    node_w = w[idx]
    node_pos = y[idx] == 1
    p0 = float(np.cumsum(np.where(node_pos, 0.0, node_w))[-1])
    p1 = float(np.cumsum(np.where(node_pos, node_w, 0.0))[-1])
    parent = (p0 * p0 + p1 * p1) / (p0 + p1)
    l0 = np.cumsum(w0, axis=0)[:-1]
    l1 = np.cumsum(w1, axis=0)[:-1]
    wl = l0 + l1
    r0 = p0 - l0
    r1 = p1 - l1
    wr = r0 + r1
    valid = vals[:-1] != vals[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = (l0 * l0 + l1 * l1) / wl + (r0 * r0 + r1 * r1) / wr - parent
    gain = np.where(valid, gain, -np.inf)
    if gain.size == 0:
        return -1, 0.0, 0.0
    flat = gain.T.ravel()  # feature-major, matching the loop's visiting order
    k = int(np.argmax(flat))
    if not flat[k] > 0.0:
        return -1, 0.0, 0.0
    fi, pos = divmod(k, gain.shape[0])
    v = vals[pos, fi]
    vn = vals[pos + 1, fi]
    t = (v + vn) / 2.0
    if t == vn:
        t = v
    return int(feats[fi]), float(t), float(flat[k])


# ---- tree traversal --------------------------------------------------------

def _apply_tree_loop(X, feature, threshold, left, right, value):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def _apply_tree_np(X, feature, threshold, left, right, value):
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    while True:
        f = feature[node]
        active = f >= 0
        if not active.any():
            break
        go_left = X[rows[active], f[active]] <= threshold[node[active]]
        node[active] = np.where(go_left, left[node[active]], right[node[active]])
    return value[node]


# ---- nearest neighbours ----------------------------------------------------

def _knn_loop(Q, X, id_rank, k):
    """Indices of the k nearest rows of X for each query row.

    Squared Euclidean distances are accumulated dimension by dimension;
    exact ties go to the lower ``id_rank``.
    """
    nq = Q.shape[0]
    n = X.shape[0]
    d = X.shape[1]
    out = np.empty((nq, k), dtype=np.int64)
    dist = np.empty(n)
    taken = np.zeros(n, dtype=np.bool_)
    for q in range(nq):
        for i in range(n):
            acc = 0.0
            for j in range(d):
                diff = Q[q, j] - X[i, j]
                acc += diff * diff
            dist[i] = acc
            taken[i] = False
        for r in range(k):
            best = -1
            for i in range(n):
                if taken[i]:
                    continue
                if best < 0 or dist[i] < dist[best] or (dist[i] == dist[best] and id_rank[i] < id_rank[best]):
                    best = i
            taken[best] = True
            out[q, r] = best
    return out


def _knn_np(Q, X, id_rank, k):
    dist = np.zeros((Q.shape[0], X.shape[0]))
    for j in range(X.shape[1]):
        diff = Q[:, j, None] - X[None, :, j]
        dist += diff * diff
    out = np.empty((Q.shape[0], k), dtype=np.int64)
    for q in range(Q.shape[0]):
        out[q] = np.lexsort((id_rank, dist[q]))[:k]
    return out


if HAVE_NUMBA:
    _best_split_jit = njit(cache=True)(_best_split_loop)
    _apply_tree_jit = njit(cache=True)(_apply_tree_loop)
    _knn_jit = njit(cache=True)(_knn_loop)
    best_split = _best_split_jit
    apply_tree = _apply_tree_jit
    knn_indices = _knn_jit
else:
    best_split = _best_split_np
    apply_tree = _apply_tree_np
    knn_indices = _knn_np

"""Compiled CART kernels.

Trees are stored as flat node arrays. Internal nodes have ``feature >= 0`` and
route a sample left when ``x[feature] <= threshold``; leaves have
``feature == -1`` and carry ``value``. Child indices are local to the tree.
"""

import numpy as np
from numba import njit

# candidate must beat the incumbent by this fraction of the node SSE to win,
# so near-ties resolve to (lowest channel, lowest threshold) regardless of rounding
TIE_RTOL = 1e-12


@njit(cache=True, nogil=True)
def split_search(X, y, idx, lo, hi, min_leaf, xs):
    """Best (channel, threshold, child SSE) for samples ``idx[lo:hi]``.

    Returns channel -1 when no split leaves ``min_leaf`` samples on each side.
    """
    cnt = hi - lo
    p = X.shape[1]
    mean = 0.0
    for a in range(lo, hi):
        mean += y[idx[a]]
    mean /= cnt
    tot = 0.0
    tot2 = 0.0
    for a in range(lo, hi):
        d = y[idx[a]] - mean
        tot += d
        tot2 += d * d
    tol = TIE_RTOL * tot2

    best_f = -1
    best_t = 0.0
    best_imp = np.inf
    for f in range(p):
        for a in range(cnt):
            xs[a] = X[idx[lo + a], f]
        order = np.argsort(xs[:cnt], kind="mergesort")
        sl = 0.0
        sl2 = 0.0
        for a in range(cnt - 1):
            d = y[idx[lo + order[a]]] - mean
            sl += d
            sl2 += d * d
            nl = a + 1
            nr = cnt - nl
            if nl < min_leaf:
                continue
            if nr < min_leaf:
                break
            xa = xs[order[a]]
            xb = xs[order[a + 1]]
            if not xa < xb:
                continue
            sr = tot - sl
            sr2 = tot2 - sl2
            imp = (sl2 - sl * sl / nl) + (sr2 - sr * sr / nr)
            if imp < 0.0:
                imp = 0.0
            if imp < best_imp - tol:
                best_imp = imp
                best_f = f
                t = 0.5 * (xa + xb)
                if t >= xb:
                    t = xa
                best_t = t
    return best_f, best_t, best_imp


@njit(cache=True, nogil=True)
def fit_tree(X, y, sample_idx, max_depth, min_leaf):
    """Grow one regression tree on ``X[sample_idx]``; ``max_depth < 0`` means unlimited."""
    m = sample_idx.size
    cap = 2 * m - 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    value = np.zeros(cap, dtype=np.float64)

    idx = sample_idx.copy()
    xs = np.empty(m, dtype=np.float64)
    st_node = np.empty(cap, dtype=np.int64)
    st_lo = np.empty(cap, dtype=np.int64)
    st_hi = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    sp = 1
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = m
    st_depth[0] = 0
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        lo = st_lo[sp]
        hi = st_hi[sp]
        depth = st_depth[sp]
        cnt = hi - lo

        ymin = y[idx[lo]]
        ymax = ymin
        s = 0.0
        for a in range(lo, hi):
            v = y[idx[a]]
            s += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v

        is_leaf = cnt < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth) or ymin == ymax
        f = -1
        t = 0.0
        if not is_leaf:
            f, t, _ = split_search(X, y, idx, lo, hi, min_leaf, xs)
            is_leaf = f < 0
        if is_leaf:
            if ymin == ymax:
                value[node] = ymin
            else:
                v = s / cnt
                value[node] = min(max(v, ymin), ymax)
            continue

        i = lo
        j = hi - 1
        while i <= j:
            if X[idx[i], f] <= t:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                j -= 1
        mid = i

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = f
        threshold[node] = t
        left[node] = lid
        right[node] = rid
        st_node[sp] = rid
        st_lo[sp] = mid
        st_hi[sp] = hi
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lid
        st_lo[sp] = lo
        st_hi[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@njit(cache=True, nogil=True)
def tree_output(x, feature, threshold, left, right, value, base):
    node = 0
    while feature[base + node] >= 0:
        if x[feature[base + node]] <= threshold[base + node]:
            node = left[base + node]
        else:
            node = right[base + node]
    return value[base + node]


@njit(cache=True, nogil=True)
def predict_ensembles(X, feature, threshold, left, right, value, node_offsets, ensemble_offsets):
    """Per-ensemble mean of tree outputs, shape ``(len(X), n_ensembles)``.

    The mean is shifted by the first tree's output so identical outputs average
    to themselves exactly, and it is clipped to the outputs' range.
    """
    q = X.shape[0]
    n = ensemble_offsets.size - 1
    out = np.empty((q, n), dtype=np.float64)
    for r in range(q):
        x = X[r]
        for k in range(n):
            t0 = ensemble_offsets[k]
            t1 = ensemble_offsets[k + 1]
            v0 = tree_output(x, feature, threshold, left, right, value, node_offsets[t0])
            vmin = v0
            vmax = v0
            acc = 0.0
            for t in range(t0 + 1, t1):
                v = tree_output(x, feature, threshold, left, right, value, node_offsets[t])
                acc += v - v0
                if v < vmin:
                    vmin = v
                if v > vmax:
                    vmax = v
            mu = v0 + acc / (t1 - t0)
            out[r, k] = min(max(mu, vmin), vmax)
    return out


@njit(cache=True, nogil=True)
def tree_depths(left, right, node_offsets):
    """Maximum depth of each tree (a single leaf has depth 0)."""
    n_trees = node_offsets.size - 1
    out = np.zeros(n_trees, dtype=np.int64)
    for t in range(n_trees):
        base = node_offsets[t]
        size = node_offsets[t + 1] - base
        depth = np.zeros(size, dtype=np.int64)
        best = 0
        # children always have larger local indices than their parent
        for node in range(size):
            li = left[base + node]
            if li >= 0:
                d = depth[node] + 1
                depth[li] = d
                depth[right[base + node]] = d
                if d > best:
                    best = d
        out[t] = best
    return out

"""Compiled kernels for growing and evaluating CART trees.

A tree is stored as flat node arrays.  Leaves have ``feature == -1``.  Every
node also records the slice ``[start, end)`` of the tree's ``members`` array
holding the (bootstrap) training rows that reached it, which is what leaf
sampling draws from.

Nodes are expanded breadth-first from a single random stream, so every node
shallower than ``d`` is built before any node at depth ``d``.  Consequently a
tree grown without depth limit and read only down to depth ``d`` (see the
``max_depth`` argument of the evaluation kernels) is identical to the tree
grown with ``max_depth=d`` from the same seed.

Variance reduction is used for both tasks: on 0/1 targets the weighted
variance of a child is half its weighted Gini impurity, so both criteria pick
the same split.
"""

import numpy as np
from numba import njit

LEAF = -1
_TINY = 1e-12


@njit(cache=True)
def _sort_pairs(keys, vals, m):
    """In-place ascending sort of ``keys[:m]`` carrying ``vals`` along."""
    stack = np.empty(128, dtype=np.int64)
    sp = 0
    lo = 0
    hi = m - 1
    while True:
        if hi - lo < 16:
            for i in range(lo + 1, hi + 1):
                k = keys[i]
                v = vals[i]
                j = i - 1
                while j >= lo and keys[j] > k:
                    keys[j + 1] = keys[j]
                    vals[j + 1] = vals[j]
                    j -= 1
                keys[j + 1] = k
                vals[j + 1] = v
            if sp == 0:
                return
            sp -= 2
            lo = stack[sp]
            hi = stack[sp + 1]
            continue
        mid = (lo + hi) // 2
        # median of three moved to keys[hi]
        if keys[mid] < keys[lo]:
            keys[mid], keys[lo] = keys[lo], keys[mid]
            vals[mid], vals[lo] = vals[lo], vals[mid]
        if keys[hi] < keys[lo]:
            keys[hi], keys[lo] = keys[lo], keys[hi]
            vals[hi], vals[lo] = vals[lo], vals[hi]
        if keys[mid] < keys[hi]:
            keys[mid], keys[hi] = keys[hi], keys[mid]
            vals[mid], vals[hi] = vals[hi], vals[mid]
        pivot = keys[hi]
        i = lo
        for j in range(lo, hi):
            if keys[j] < pivot:
                keys[i], keys[j] = keys[j], keys[i]
                vals[i], vals[j] = vals[j], vals[i]
                i += 1
        keys[i], keys[hi] = keys[hi], keys[i]
        vals[i], vals[hi] = vals[hi], vals[i]
        # recurse into the smaller side first to bound the stack
        if i - lo < hi - i:
            stack[sp] = i + 1
            stack[sp + 1] = hi
            hi = i - 1
        else:
            stack[sp] = lo
            stack[sp + 1] = i - 1
            lo = i + 1
        sp += 2


@njit(cache=True)
def grow_tree(X, y, rows, max_depth, min_leaf, max_features, seed):
    np.random.seed(seed)
    n = rows.shape[0]
    p = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    start = np.zeros(cap, dtype=np.int64)
    end = np.zeros(cap, dtype=np.int64)
    depth = np.zeros(cap, dtype=np.int64)

    members = rows.copy()
    scratch = np.empty(n, dtype=np.int64)
    xbuf = np.empty(n)
    ybuf = np.empty(n)
    feats = np.arange(p)

    end[0] = n
    n_nodes = 1
    head = 0
    # nodes are numbered in creation order, which is also the BFS queue
    while head < n_nodes:
        node = head
        head += 1
        s = start[node]
        e = end[node]
        m = e - s
        tot = 0.0
        for k in range(s, e):
            tot += y[members[k]]
        mean = tot / m
        value[node] = mean
        if m < 2 * min_leaf:
            continue
        if max_depth >= 0 and depth[node] >= max_depth:
            continue
        parent_sse = 0.0
        for k in range(s, e):
            d = y[members[k]] - mean
            parent_sse += d * d
        if parent_sse <= _TINY * m:
            continue

        best_sse = parent_sse
        best_f = -1
        best_thr = 0.0
        tried = 0
        for fi in range(p):
            if tried >= max_features and best_f >= 0:
                break
            # partial Fisher-Yates: feats[fi] becomes a fresh uniform draw
            r = fi + np.random.randint(p - fi)
            f = feats[r]
            feats[r] = feats[fi]
            feats[fi] = f
            xmin = np.inf
            xmax = -np.inf
            for k in range(m):
                row = members[s + k]
                xv = X[row, f]
                xbuf[k] = xv
                ybuf[k] = y[row] - mean
                if xv < xmin:
                    xmin = xv
                if xv > xmax:
                    xmax = xv
            if xmin == xmax:
                continue
            tried += 1
            _sort_pairs(xbuf, ybuf, m)
            sl = 0.0
            s2l = 0.0
            tot = 0.0
            tot2 = 0.0
            for k in range(m):
                tot += ybuf[k]
                tot2 += ybuf[k] * ybuf[k]
            for k in range(1, m):
                v = ybuf[k - 1]
                sl += v
                s2l += v * v
                if k < min_leaf or m - k < min_leaf:
                    continue
                if xbuf[k - 1] == xbuf[k]:
                    continue
                sr = tot - sl
                s2r = tot2 - s2l
                sse = (s2l - sl * sl / k) + (s2r - sr * sr / (m - k))
                if sse < best_sse - _TINY * parent_sse:
                    best_sse = sse
                    best_f = f
                    thr = 0.5 * (xbuf[k - 1] + xbuf[k])
                    if thr >= xbuf[k]:
                        thr = xbuf[k - 1]
                    best_thr = thr
        if best_f < 0:
            continue

        nl = 0
        for k in range(s, e):
            if X[members[k], best_f] <= best_thr:
                scratch[nl] = members[k]
                nl += 1
        nr = nl
        for k in range(s, e):
            if X[members[k], best_f] > best_thr:
                scratch[nr] = members[k]
                nr += 1
        for k in range(m):
            members[s + k] = scratch[k]

        feature[node] = best_f
        threshold[node] = best_thr
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        start[lc] = s
        end[lc] = s + nl
        start[rc] = s + nl
        end[rc] = e
        depth[lc] = depth[node] + 1
        depth[rc] = depth[node] + 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        start[:n_nodes].copy(),
        end[:n_nodes].copy(),
        depth[:n_nodes].copy(),
        members,
    )


@njit(cache=True)
def apply_forest(X, offsets, feature, threshold, left, right, depth, max_depth):
    """Leaf index (global, into the packed node arrays) per row and tree."""
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.empty((n, n_trees), dtype=np.int64)
    for t in range(n_trees):
        base = offsets[t]
        for i in range(n):
            node = base
            while feature[node] != LEAF and (max_depth < 0 or depth[node] < max_depth):
                if X[i, feature[node]] <= threshold[node]:
                    node = base + left[node]
                else:
                    node = base + right[node]
            out[i, t] = node
    return out


@njit(cache=True)
def predict_forest(X, offsets, feature, threshold, left, right, value, depth, max_depth):
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.zeros(n)
    for t in range(n_trees):
        base = offsets[t]
        for i in range(n):
            node = base
            while feature[node] != LEAF and (max_depth < 0 or depth[node] < max_depth):
                if X[i, feature[node]] <= threshold[node]:
                    node = base + left[node]
                else:
                    node = base + right[node]
            out[i] += value[node]
    return out / n_trees


@njit(cache=True)
def sample_leaves(X, offsets, feature, threshold, left, right, depth, max_depth,
                  start, end, member_offsets, members, tree_pick, member_u):
    """One stored training row per input row.

    Row ``i`` is routed through tree ``tree_pick[i]``; within the reached
    leaf a member is chosen by the uniform draw ``member_u[i]``.
    """
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        t = tree_pick[i]
        base = offsets[t]
        node = base
        while feature[node] != LEAF and (max_depth < 0 or depth[node] < max_depth):
            if X[i, feature[node]] <= threshold[node]:
                node = base + left[node]
            else:
                node = base + right[node]
        size = end[node] - start[node]
        k = int(member_u[i] * size)
        if k >= size:
            k = size - 1
        out[i] = members[member_offsets[t] + start[node] + k]
    return out

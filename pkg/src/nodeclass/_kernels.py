"""Compiled inner loops over CSR adjacency (``indptr``, ``indices``).

All kernels release the GIL so callers can fan them out over threads.
"""

import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True)


@njit(**_OPTS)
def brandes_block(indptr, indices, start, stop):
    """Brandes accumulation for sources ``start..stop-1``.

    Returns (dependency sums over ordered pairs, reachable count, distance sum);
    the last two are per source and only filled for the block's sources.
    """
    n = indptr.shape[0] - 1
    bc = np.zeros(n)
    reach = np.zeros(n, np.int64)
    dsum = np.zeros(n, np.int64)
    dist = np.full(n, -1, np.int64)
    sigma = np.zeros(n)
    delta = np.zeros(n)
    order = np.empty(n, np.int64)
    for s in range(start, stop):
        head = 0
        tail = 1
        order[0] = s
        dist[s] = 0
        sigma[s] = 1.0
        while head < tail:
            v = order[head]
            head += 1
            dv = dist[v]
            for j in range(indptr[v], indptr[v + 1]):
                w = indices[j]
                if dist[w] < 0:
                    dist[w] = dv + 1
                    order[tail] = w
                    tail += 1
                if dist[w] == dv + 1:
                    sigma[w] += sigma[v]
        total = 0
        for i in range(1, tail):
            total += dist[order[i]]
        reach[s] = tail - 1
        dsum[s] = total
        for i in range(tail - 1, 0, -1):
            w = order[i]
            coeff = (1.0 + delta[w]) / sigma[w]
            dw = dist[w]
            for j in range(indptr[w], indptr[w + 1]):
                v = indices[j]
                if dist[v] == dw - 1:
                    delta[v] += sigma[v] * coeff
            bc[w] += delta[w]
        for i in range(tail):
            w = order[i]
            dist[w] = -1
            sigma[w] = 0.0
            delta[w] = 0.0
    return bc, reach, dsum


@njit(**_OPTS)
def triangles_per_node(indptr, indices):
    n = indptr.shape[0] - 1
    tri = np.zeros(n, np.int64)
    mark = np.full(n, -1, np.int64)
    for u in range(n):
        for j in range(indptr[u], indptr[u + 1]):
            mark[indices[j]] = u
        count = 0
        for j in range(indptr[u], indptr[u + 1]):
            v = indices[j]
            for k in range(indptr[v], indptr[v + 1]):
                if mark[indices[k]] == u:
                    count += 1
        tri[u] = count // 2
    return tri


@njit(**_OPTS)
def core_numbers(indptr, indices):
    """Batagelj-Zaversnik O(m) bucket peeling."""
    n = indptr.shape[0] - 1
    deg = np.empty(n, np.int64)
    md = 0
    for u in range(n):
        deg[u] = indptr[u + 1] - indptr[u]
        if deg[u] > md:
            md = deg[u]
    bin_ = np.zeros(md + 1, np.int64)
    for u in range(n):
        bin_[deg[u]] += 1
    start = 0
    for d in range(md + 1):
        num = bin_[d]
        bin_[d] = start
        start += num
    pos = np.empty(n, np.int64)
    vert = np.empty(n, np.int64)
    for u in range(n):
        pos[u] = bin_[deg[u]]
        vert[pos[u]] = u
        bin_[deg[u]] += 1
    for d in range(md, 0, -1):
        bin_[d] = bin_[d - 1]
    if md >= 0:
        bin_[0] = 0
    for i in range(n):
        v = vert[i]
        for j in range(indptr[v], indptr[v + 1]):
            u = indices[j]
            if deg[u] > deg[v]:
                du = deg[u]
                pu = pos[u]
                pw = bin_[du]
                w = vert[pw]
                if u != w:
                    pos[u] = pw
                    vert[pu] = w
                    pos[w] = pu
                    vert[pw] = u
                bin_[du] += 1
                deg[u] -= 1
    return deg


@njit(**_OPTS)
def component_labels(indptr, indices):
    n = indptr.shape[0] - 1
    comp = np.full(n, -1, np.int64)
    queue = np.empty(n, np.int64)
    c = 0
    for s in range(n):
        if comp[s] >= 0:
            continue
        comp[s] = c
        head = 0
        tail = 1
        queue[0] = s
        while head < tail:
            v = queue[head]
            head += 1
            for j in range(indptr[v], indptr[v + 1]):
                w = indices[j]
                if comp[w] < 0:
                    comp[w] = c
                    queue[tail] = w
                    tail += 1
        c += 1
    return comp


@njit(**_OPTS)
def max_eccentricity(indptr, indices):
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, np.int64)
    queue = np.empty(n, np.int64)
    best = 0
    for s in range(n):
        head = 0
        tail = 1
        queue[0] = s
        dist[s] = 0
        while head < tail:
            v = queue[head]
            head += 1
            for j in range(indptr[v], indptr[v + 1]):
                w = indices[j]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue[tail] = w
                    tail += 1
        if dist[queue[tail - 1]] > best:
            best = dist[queue[tail - 1]]
        for i in range(tail):
            dist[queue[i]] = -1
    return best


# ---------------------------------------------------------------------------
# Leiden: fast local moving and refinement on a weighted graph without loops.
# Gains are in edge-weight units: w(v, C) - gamma * k_v * K_C / (2m).


@njit(**_OPTS)
def leiden_move_nodes(indptr, indices, weights, k, comm, order, two_m, gamma):
    n = indptr.shape[0] - 1
    tot = np.zeros(n)
    size = np.zeros(n, np.int64)
    for v in range(n):
        tot[comm[v]] += k[v]
        size[comm[v]] += 1
    empty = np.empty(n, np.int64)
    n_empty = 0
    for c in range(n - 1, -1, -1):
        if size[c] == 0:
            empty[n_empty] = c
            n_empty += 1
    queue = np.empty(n, np.int64)
    in_queue = np.zeros(n, np.bool_)
    for i in range(n):
        queue[i] = order[i]
        in_queue[order[i]] = True
    head = 0
    count = n
    nw = np.zeros(n)
    touched = np.empty(n, np.int64)
    moves = 0
    while count > 0:
        v = queue[head]
        head = (head + 1) % n
        count -= 1
        in_queue[v] = False
        cur = comm[v]
        nt = 0
        for j in range(indptr[v], indptr[v + 1]):
            c = comm[indices[j]]
            if nw[c] == 0.0:
                touched[nt] = c
                nt += 1
            nw[c] += weights[j]
        tot[cur] -= k[v]
        size[cur] -= 1
        best = cur
        best_gain = nw[cur] - gamma * k[v] * tot[cur] / two_m
        for i in range(nt):
            c = touched[i]
            gain = nw[c] - gamma * k[v] * tot[c] / two_m
            if gain > best_gain + 1e-10:
                best_gain = gain
                best = c
        if best_gain < -1e-10:
            if size[cur] == 0:
                best = cur
            else:
                n_empty -= 1
                best = empty[n_empty]
        if size[cur] == 0 and best != cur:
            empty[n_empty] = cur
            n_empty += 1
        tot[best] += k[v]
        size[best] += 1
        comm[v] = best
        for i in range(nt):
            nw[touched[i]] = 0.0
        if best != cur:
            moves += 1
            for j in range(indptr[v], indptr[v + 1]):
                u = indices[j]
                if comm[u] != best and not in_queue[u]:
                    queue[(head + count) % n] = u
                    count += 1
                    in_queue[u] = True
    return moves


@njit(**_OPTS)
def leiden_refine(indptr, indices, weights, k, comm, order, uniforms, two_m, gamma, theta):
    """Merge singletons into well-connected sub-communities of ``comm``."""
    n = indptr.shape[0] - 1
    ref = np.arange(n)
    tot_s = np.zeros(n)
    for v in range(n):
        tot_s[comm[v]] += k[v]
    tot_r = k.copy()
    singleton = np.ones(n, np.bool_)
    ext = np.zeros(n)
    for v in range(n):
        for j in range(indptr[v], indptr[v + 1]):
            if comm[indices[j]] == comm[v]:
                ext[v] += weights[j]
    nw = np.zeros(n)
    touched = np.empty(n, np.int64)
    cand = np.empty(n + 1, np.int64)
    score = np.empty(n + 1)
    for idx in range(n):
        v = order[idx]
        if not singleton[v]:
            continue
        s = comm[v]
        if ext[v] < gamma * k[v] * (tot_s[s] - k[v]) / two_m:
            continue
        nt = 0
        for j in range(indptr[v], indptr[v + 1]):
            u = indices[j]
            if comm[u] != s:
                continue
            r = ref[u]
            if nw[r] == 0.0:
                touched[nt] = r
                nt += 1
            nw[r] += weights[j]
        cand[0] = ref[v]
        score[0] = 0.0
        nc = 1
        for i in range(nt):
            r = touched[i]
            if r == ref[v]:
                continue
            if ext[r] < gamma * tot_r[r] * (tot_s[s] - tot_r[r]) / two_m:
                continue
            gain = (nw[r] - gamma * k[v] * tot_r[r] / two_m) / (0.5 * two_m)
            if gain >= 0.0:
                cand[nc] = r
                score[nc] = gain
                nc += 1
        chosen = ref[v]
        if nc > 1:
            mx = score[0]
            for i in range(1, nc):
                if score[i] > mx:
                    mx = score[i]
            total = 0.0
            for i in range(nc):
                score[i] = np.exp((score[i] - mx) / theta)
                total += score[i]
            target = uniforms[idx] * total
            acc = 0.0
            chosen = cand[nc - 1]
            for i in range(nc):
                acc += score[i]
                if target < acc:
                    chosen = cand[i]
                    break
        if chosen != ref[v]:
            old = ref[v]
            ext[chosen] = ext[chosen] + ext[old] - 2.0 * nw[chosen]
            tot_r[chosen] += k[v]
            tot_r[old] = 0.0
            ref[v] = chosen
            singleton[v] = False
            singleton[chosen] = False
        for i in range(nt):
            nw[touched[i]] = 0.0
    return ref


# ---------------------------------------------------------------------------
# Decision trees. Node arrays: feature (-1 for leaves), threshold, left, right,
# class counts, leaf class. Rows go left when x[feature] <= threshold.


@njit(**_OPTS)
def _weighted_score(counts, total):
    s = 0.0
    for c in range(counts.shape[0]):
        s += counts[c] * counts[c]
    return s / total


@njit(**_OPTS)
def _sort_pairs(keys, vals, n):
    """In-place sort of ``keys[:n]`` carrying ``vals`` along (not stable)."""
    stack_lo = np.empty(64, np.int64)
    stack_hi = np.empty(64, np.int64)
    sp = 0
    stack_lo[0] = 0
    stack_hi[0] = n - 1
    sp = 1
    while sp > 0:
        sp -= 1
        lo = stack_lo[sp]
        hi = stack_hi[sp]
        while hi - lo > 16:
            mid = (lo + hi) >> 1
            # median of three into keys[mid]
            if keys[mid] < keys[lo]:
                keys[mid], keys[lo] = keys[lo], keys[mid]
                vals[mid], vals[lo] = vals[lo], vals[mid]
            if keys[hi] < keys[lo]:
                keys[hi], keys[lo] = keys[lo], keys[hi]
                vals[hi], vals[lo] = vals[lo], vals[hi]
            if keys[hi] < keys[mid]:
                keys[hi], keys[mid] = keys[mid], keys[hi]
                vals[hi], vals[mid] = vals[mid], vals[hi]
            pivot = keys[mid]
            i = lo
            j = hi
            while i <= j:
                while keys[i] < pivot:
                    i += 1
                while keys[j] > pivot:
                    j -= 1
                if i <= j:
                    keys[i], keys[j] = keys[j], keys[i]
                    vals[i], vals[j] = vals[j], vals[i]
                    i += 1
                    j -= 1
            # recurse into the smaller side first to bound the stack
            if j - lo < hi - i:
                if i < hi:
                    stack_lo[sp] = i
                    stack_hi[sp] = hi
                    sp += 1
                hi = j
            else:
                if lo < j:
                    stack_lo[sp] = lo
                    stack_hi[sp] = j
                    sp += 1
                lo = i
        for a in range(lo + 1, hi + 1):
            kk = keys[a]
            vv = vals[a]
            b = a - 1
            while b >= lo and keys[b] > kk:
                keys[b + 1] = keys[b]
                vals[b + 1] = vals[b]
                b -= 1
            keys[b + 1] = kk
            vals[b + 1] = vv


@njit(**_OPTS)
def build_tree(X, y, w, num_classes, max_features, min_leaf, max_depth, seed):
    """Grow one CART tree on rows with positive integer weight ``w``.

    Every feature is sorted once; a split stably partitions each feature's
    sorted row list, so nodes never re-sort. ``max_depth < 0`` means
    unlimited. Returns node arrays plus the per-feature weighted impurity
    decrease (unnormalized).
    """
    np.random.seed(seed)
    n_rows, d = X.shape
    rows = np.flatnonzero(w > 0)
    n = rows.shape[0]
    wf = w.astype(np.float64)
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    counts = np.zeros((cap, num_classes))
    depth = np.zeros(cap, np.int64)
    lo_arr = np.zeros(cap, np.int64)
    hi_arr = np.zeros(cap, np.int64)
    importance = np.zeros(d)
    total_w = 0.0
    for i in range(n):
        total_w += wf[rows[i]]

    srt = np.empty((d, n), np.int64)
    sval = np.empty((d, n))
    keys = np.empty(n)
    tmp = np.empty(n, np.int64)
    tmpv = np.empty(n)
    for f in range(d):
        for i in range(n):
            keys[i] = X[rows[i], f]
            tmp[i] = rows[i]
        _sort_pairs(keys, tmp, n)
        for i in range(n):
            srt[f, i] = tmp[i]
            sval[f, i] = keys[i]
    goes_left = np.zeros(n_rows, np.bool_)

    n_nodes = 1
    lo_arr[0] = 0
    hi_arr[0] = n
    stack = np.empty(cap, np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    perm = np.arange(d)
    feats = np.empty(d, np.int64)
    left_c = np.zeros(num_classes)
    right_c = np.zeros(num_classes)
    while sp > 0:
        sp -= 1
        node = stack[sp]
        lo = lo_arr[node]
        hi = hi_arr[node]
        node_w = 0.0
        for i in range(lo, hi):
            r = srt[0, i]
            counts[node, y[r]] += wf[r]
            node_w += wf[r]
        nonzero = 0
        for c in range(num_classes):
            if counts[node, c] > 0:
                nonzero += 1
        if nonzero <= 1 or node_w < 2 * min_leaf or (max_depth >= 0 and depth[node] >= max_depth):
            continue
        # draw features without replacement (partial Fisher-Yates), skipping
        # ones that are constant within the node
        for t in range(d):
            perm[t] = t
        nf = 0
        for t in range(d):
            jdx = t + np.random.randint(0, d - t)
            f = perm[jdx]
            perm[jdx] = perm[t]
            perm[t] = f
            if sval[f, lo] != sval[f, hi - 1]:
                feats[nf] = f
                nf += 1
                if nf == max_features:
                    break
        if nf == 0:
            continue
        for a in range(1, nf):
            fa = feats[a]
            b = a - 1
            while b >= 0 and feats[b] > fa:
                feats[b + 1] = feats[b]
                b -= 1
            feats[b + 1] = fa
        parent_score = _weighted_score(counts[node], node_w)
        best_gain = -1.0
        best_f = -1
        best_t = 0.0
        for fi in range(nf):
            f = feats[fi]
            for c in range(num_classes):
                left_c[c] = 0.0
                right_c[c] = counts[node, c]
            lw = 0.0
            for i in range(lo, hi - 1):
                r = srt[f, i]
                left_c[y[r]] += wf[r]
                right_c[y[r]] -= wf[r]
                lw += wf[r]
                a = sval[f, i]
                b = sval[f, i + 1]
                if a == b:
                    continue
                rw = node_w - lw
                if lw < min_leaf or rw < min_leaf:
                    continue
                gain = _weighted_score(left_c, lw) + _weighted_score(right_c, rw) - parent_score
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_t = a + (b - a) / 2.0
                    if best_t >= b:
                        best_t = a
        if best_f < 0:
            continue
        nl = 0
        for i in range(lo, hi):
            r = srt[best_f, i]
            gl = sval[best_f, i] <= best_t
            goes_left[r] = gl
            if gl:
                nl += 1
        for f in range(d):
            li = lo
            ri = 0
            for i in range(lo, hi):
                r = srt[f, i]
                if goes_left[r]:
                    srt[f, li] = r
                    sval[f, li] = sval[f, i]
                    li += 1
                else:
                    tmp[ri] = r
                    tmpv[ri] = sval[f, i]
                    ri += 1
            for i in range(ri):
                srt[f, li + i] = tmp[i]
                sval[f, li + i] = tmpv[i]
        feature[node] = best_f
        threshold[node] = best_t
        importance[best_f] += best_gain / total_w
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        depth[lc] = depth[node] + 1
        depth[rc] = depth[node] + 1
        lo_arr[lc] = lo
        hi_arr[lc] = lo + nl
        lo_arr[rc] = lo + nl
        hi_arr[rc] = hi
        stack[sp] = rc
        sp += 1
        stack[sp] = lc
        sp += 1
    leaf_class = np.zeros(n_nodes, np.int64)
    for i in range(n_nodes):
        best = 0
        for c in range(1, num_classes):
            if counts[i, c] > counts[i, best]:
                best = c
        leaf_class[i] = best
    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        counts[:n_nodes].copy(),
        leaf_class,
        importance,
    )


@njit(**_OPTS)
def tree_apply(feature, threshold, left, right, X):
    out = np.empty(X.shape[0], np.int64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out

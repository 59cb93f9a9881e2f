"""Compiled inner loops.

All kernels work on 0-based integer row arrays of shape (n, s) and on the
weight-model tuple produced by :meth:`ProblemInstance.kernel_model`:

    (kind, tensor, strides, edges, factors, root, integral)

kind 0 reads a flat int8 tensor, kind 1 combines pairwise edge weights
(sum, or root of squares when ``root`` is set), kind 2 multiplies per-dimension
factors. Search kernels mutate the rows in place and return whether any
improving move was applied.
"""

import numpy as np
from numba import njit

TENSOR = 0
EDGES = 1
PRODUCT = 2

# slack for "strictly better": integral models move in steps >= 1
REL_TOL = 1e-9
INT_TOL = 0.5

_PERMS3 = np.array(
    [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]], dtype=np.int64
)


@njit(cache=True)
def vector_weight(model, v):
    kind, tensor, strides, edges, factors, root, integral = model
    s = v.shape[0]
    if kind == TENSOR:
        idx = 0
        for j in range(s):
            idx += v[j] * strides[j]
        return float(tensor[idx])
    if kind == EDGES:
        total = 0.0
        if root:
            for a in range(s - 1):
                for b in range(a + 1, s):
                    e = edges[a, b, v[a], v[b]]
                    total += e * e
            return np.sqrt(total)
        for a in range(s - 1):
            for b in range(a + 1, s):
                total += edges[a, b, v[a], v[b]]
        return total
    total = 1.0
    for j in range(s):
        total *= factors[j, v[j]]
    return total


@njit(cache=True)
def substituted_weight(model, rows, r, d, val):
    """Weight of ``rows[r]`` with coordinate d replaced by ``val``."""
    kind, tensor, strides, edges, factors, root, integral = model
    s = rows.shape[1]
    if kind == TENSOR:
        idx = (val - rows[r, d]) * strides[d]
        for j in range(s):
            idx += rows[r, j] * strides[j]
        return float(tensor[idx])
    if kind == EDGES:
        total = 0.0
        for a in range(s - 1):
            xa = val if a == d else rows[r, a]
            for b in range(a + 1, s):
                xb = val if b == d else rows[r, b]
                e = edges[a, b, xa, xb]
                total += e * e if root else e
        return np.sqrt(total) if root else total
    total = 1.0
    for j in range(s):
        total *= factors[j, val if j == d else rows[r, j]]
    return total


@njit(cache=True)
def row_weights(model, rows):
    n = rows.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = vector_weight(model, rows[i])
    return out


@njit(cache=True)
def total_weight(model, rows):
    total = 0.0
    for i in range(rows.shape[0]):
        total += vector_weight(model, rows[i])
    return total


@njit(cache=True)
def _tolerance(model, total):
    if model[6]:
        return INT_TOL
    return REL_TOL * max(1.0, abs(total))


@njit(cache=True)
def solve_ap(cost):
    """Shortest augmenting path Hungarian method, O(n^3).

    Returns ``sigma`` with row i matched to column sigma[i].
    """
    n = cost.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1)
    used = np.zeros(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = np.inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = np.inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    sigma = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        sigma[p[j] - 1] = j - 1
    return sigma


@njit(cache=True)
def _extend(model, v, d, partial):
    """Partial measure after fixing coordinate d, given dims < d are fixed.

    For edge models the measure is the sum (or sum of squares) of the edges
    among fixed dimensions; for products it is the running product.
    """
    kind, tensor, strides, edges, factors, root, integral = model
    if kind == EDGES:
        total = partial
        for a in range(d):
            e = edges[a, d, v[a], v[d]]
            total += e * e if root else e
        return total
    if kind == PRODUCT:
        return partial * factors[d, v[d]]
    return partial


@njit(cache=True)
def greedy(model, n, s, lower_bound, prunable):
    """Repeatedly take the lightest vector over still-unused coordinates.

    Candidates are visited depth-first in lexicographic order, so the first
    minimum wins ties. When partial measures never decrease as dimensions are
    added (``prunable``), branches whose prefix already reaches the incumbent
    are cut. A step ends early once ``lower_bound`` is reached.
    """
    kind = model[0]
    root = model[5]
    rows = np.empty((n, s), dtype=np.int64)
    used = np.zeros((s, n), dtype=np.bool_)
    avail = np.empty((s, n), dtype=np.int64)
    idx = np.zeros(s, dtype=np.int64)
    v = np.empty(s, dtype=np.int64)
    best_v = np.empty(s, dtype=np.int64)
    partial = np.empty(s + 1)
    start = 1.0 if kind == PRODUCT else 0.0
    bound = lower_bound * lower_bound if (kind == EDGES and root) else lower_bound
    for step in range(n):
        m = n - step
        for d in range(s):
            c = 0
            for x in range(n):
                if not used[d, x]:
                    avail[d, c] = x
                    c += 1
        best = np.inf
        partial[0] = start
        d = 0
        idx[0] = 0
        while d >= 0:
            if idx[d] >= m:
                d -= 1
                if d >= 0:
                    idx[d] += 1
                continue
            v[d] = avail[d, idx[d]]
            if d == s - 1:
                if kind == TENSOR:
                    wv = vector_weight(model, v)
                else:
                    wv = _extend(model, v, d, partial[d])
                if wv < best:
                    best = wv
                    best_v[:] = v
                    if wv <= bound:
                        break
                idx[d] += 1
                continue
            partial[d + 1] = _extend(model, v, d, partial[d])
            if prunable and partial[d + 1] >= best:
                idx[d] += 1
                continue
            d += 1
            idx[d] = 0
        rows[step] = best_v
        for d in range(s):
            used[d, best_v[d]] = True
    return rows


@njit(cache=True)
def _split_optimum(model, rows, mask, cost, buf, sigma_out):
    """Best re-matching of free parts to fixed parts; returns (current, candidate)."""
    n, s = rows.shape
    current = 0.0
    for i in range(n):
        for j in range(n):
            for d in range(s):
                if mask[d]:
                    buf[d] = rows[i, d]
                else:
                    buf[d] = rows[j, d]
            cost[i, j] = vector_weight(model, buf)
        current += cost[i, i]
    sigma = solve_ap(cost)
    candidate = 0.0
    for i in range(n):
        candidate += cost[i, sigma[i]]
        sigma_out[i] = sigma[i]
    return current, candidate


@njit(cache=True)
def _rematch(rows, old, mask, sigma):
    n, s = rows.shape
    old[:, :] = rows
    for i in range(n):
        for d in range(s):
            if not mask[d]:
                rows[i, d] = old[sigma[i], d]


@njit(cache=True)
def dimensionwise(model, rows, splits):
    """kDV over the given fixed-dimension masks.

    The first round applies the best split of all, so the result is never
    worse than the best single move from the input; later sweeps apply every
    improving split as it is met.
    """
    n, s = rows.shape
    cost = np.empty((n, n))
    buf = np.empty(s, dtype=np.int64)
    old = np.empty_like(rows)
    sigma = np.empty(n, dtype=np.int64)
    best_sigma = np.empty(n, dtype=np.int64)
    tol = _tolerance(model, total_weight(model, rows))
    best_gain = tol
    best_t = -1
    for t in range(splits.shape[0]):
        current, candidate = _split_optimum(model, rows, splits[t], cost, buf, sigma)
        if current - candidate > best_gain:
            best_gain = current - candidate
            best_t = t
            best_sigma[:] = sigma
    if best_t < 0:
        return False
    _rematch(rows, old, splits[best_t], best_sigma)
    while True:
        improved = False
        for t in range(splits.shape[0]):
            current, candidate = _split_optimum(model, rows, splits[t], cost, buf, sigma)
            if candidate < current - tol:
                _rematch(rows, old, splits[t], sigma)
                improved = True
        if not improved:
            break
    return True


@njit(cache=True)
def two_opt(model, rows):
    n, s = rows.shape
    w = row_weights(model, rows)
    tol = _tolerance(model, w.sum())
    bu = np.empty(s, dtype=np.int64)
    bv = np.empty(s, dtype=np.int64)
    n_masks = 1 << (s - 1)
    any_improved = False
    while True:
        improved = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                base = w[i] + w[j]
                best = -tol
                best_mask = 0
                best_wu = 0.0
                best_wv = 0.0
                for mask in range(1, n_masks):
                    for d in range(s):
                        if d > 0 and (mask >> (d - 1)) & 1:
                            bu[d] = rows[j, d]
                            bv[d] = rows[i, d]
                        else:
                            bu[d] = rows[i, d]
                            bv[d] = rows[j, d]
                    wu = vector_weight(model, bu)
                    wv = vector_weight(model, bv)
                    delta = wu + wv - base
                    if delta < best:
                        best = delta
                        best_mask = mask
                        best_wu = wu
                        best_wv = wv
                if best_mask:
                    for d in range(1, s):
                        if (best_mask >> (d - 1)) & 1:
                            tmp = rows[i, d]
                            rows[i, d] = rows[j, d]
                            rows[j, d] = tmp
                    w[i] = best_wu
                    w[j] = best_wv
                    improved = True
                    any_improved = True
        if not improved:
            break
    return any_improved


@njit(cache=True)
def three_opt(model, rows):
    n, s = rows.shape
    w = row_weights(model, rows)
    tol = _tolerance(model, w.sum())
    perms = _PERMS3
    n_combos = 1
    for _ in range(s - 1):
        n_combos *= 6
    trio = np.empty(3, dtype=np.int64)
    choice = np.zeros(s, dtype=np.int64)
    b = np.empty((3, s), dtype=np.int64)
    best_b = np.empty((3, s), dtype=np.int64)
    new_w = np.empty(3)
    best_w = np.empty(3)
    any_improved = False
    while True:
        improved = False
        for i in range(n - 2):
            for j in range(i + 1, n - 1):
                for k in range(j + 1, n):
                    trio[0] = i
                    trio[1] = j
                    trio[2] = k
                    base = w[i] + w[j] + w[k]
                    best = -tol
                    found = False
                    for combo in range(1, n_combos):
                        c = combo
                        for d in range(1, s):
                            choice[d] = c % 6
                            c //= 6
                        for a in range(3):
                            b[a, 0] = rows[trio[a], 0]
                            for d in range(1, s):
                                b[a, d] = rows[trio[perms[choice[d], a]], d]
                        delta = -base
                        for a in range(3):
                            new_w[a] = vector_weight(model, b[a])
                            delta += new_w[a]
                        if delta < best:
                            best = delta
                            best_b[:, :] = b
                            best_w[:] = new_w
                            found = True
                    if found:
                        for a in range(3):
                            rows[trio[a]] = best_b[a]
                            w[trio[a]] = best_w[a]
                        improved = True
                        any_improved = True
        if not improved:
            break
    return any_improved


@njit(cache=True)
def _mixed_weight(model, rows, r, other, mask):
    """Weight of ``rows[r]`` with the dimensions in ``mask`` taken from ``rows[other]``.

    Bit d-1 of ``mask`` stands for dimension d; dimension 0 never moves.
    """
    kind, tensor, strides, edges, factors, root, integral = model
    s = rows.shape[1]
    if kind == TENSOR:
        idx = 0
        for j in range(s):
            src = other if j > 0 and (mask >> (j - 1)) & 1 else r
            idx += rows[src, j] * strides[j]
        return float(tensor[idx])
    buf = np.empty(s, dtype=np.int64)
    for j in range(s):
        src = other if j > 0 and (mask >> (j - 1)) & 1 else r
        buf[j] = rows[src, j]
    return vector_weight(model, buf)


@njit(cache=True)
def _swap_mask(rows, a, b, mask):
    for j in range(1, rows.shape[1]):
        if (mask >> (j - 1)) & 1:
            tmp = rows[a, j]
            rows[a, j] = rows[b, j]
            rows[b, j] = tmp


@njit(cache=True)
def _chain(model, rows, w, start, first_dim, tol, in_chain, rec, rec_w, multi):
    """One ejection chain from ``start``; keeps the best prefix, if positive.

    The chain head swaps coordinates with a partner outside the chain, which
    closes the head and makes the partner the new head. ``partial`` counts the
    closed vectors' gains plus the head's original weight, so the real gain of
    a prefix is ``partial - w[head]``. The first step moves ``first_dim``
    only; later steps may move any set of dimensions when ``multi`` is set.
    """
    n, s = rows.shape
    in_chain[:] = False
    in_chain[start] = True
    head = start
    partial = w[start]
    best_gain = 0.0
    best_len = 0
    steps = 0
    all_masks = 1 << (s - 1)
    for step in range(n - 1):
        best_crit = -np.inf
        best_v = -1
        best_m = 0
        best_wh = 0.0
        best_wv = 0.0
        for v in range(n):
            if in_chain[v]:
                continue
            for k in range(1, all_masks):
                if step == 0:
                    if k != 1 << (first_dim - 1):
                        continue
                elif not multi and (k & (k - 1)) != 0:
                    continue
                wh = _mixed_weight(model, rows, head, v, k)
                crit = w[v] - wh
                if crit < best_crit - tol:
                    continue
                # ties on the chain criterion go to the lighter new head
                wv = _mixed_weight(model, rows, v, head, k)
                if crit > best_crit + tol or wv < best_wv - tol:
                    best_crit = crit
                    best_v = v
                    best_m = k
                    best_wh = wh
                    best_wv = wv
        if best_v < 0:
            break
        rec[steps, 0] = head
        rec[steps, 1] = best_v
        rec[steps, 2] = best_m
        rec_w[steps, 0] = w[head]
        rec_w[steps, 1] = w[best_v]
        _swap_mask(rows, head, best_v, best_m)
        partial += best_crit
        w[head] = best_wh
        w[best_v] = best_wv
        steps += 1
        head = best_v
        in_chain[head] = True
        gain = partial - w[head]
        if gain > best_gain + tol:
            best_gain = gain
            best_len = steps
        if partial <= tol:
            break
    for k in range(steps - 1, best_len - 1, -1):
        a = rec[k, 0]
        b = rec[k, 1]
        _swap_mask(rows, a, b, rec[k, 2])
        w[a] = rec_w[k, 0]
        w[b] = rec_w[k, 1]
    return best_len > 0


@njit(cache=True)
def v_opt(model, rows, multi=True):
    """Variable-depth chains of single-coordinate swaps.

    Every (start vector, first dimension) pair seeds a chain. Each step picks
    the partner and dimension that make the closing vector lightest relative
    to the partner's weight; interim losses are allowed while the partial gain
    stays positive. Sweeps repeat until no chain improves.
    """
    n, s = rows.shape
    w = row_weights(model, rows)
    tol = _tolerance(model, w.sum())
    in_chain = np.zeros(n, dtype=np.bool_)
    rec = np.empty((max(n - 1, 1), 3), dtype=np.int64)
    rec_w = np.empty((max(n - 1, 1), 2))
    any_improved = False
    while True:
        improved = False
        for u in range(n):
            for d in range(1, s):
                if _chain(model, rows, w, u, d, tol, in_chain, rec, rec_w, multi):
                    improved = True
                    any_improved = True
        if not improved:
            break
    return any_improved

"""Compiled inner loops for the network simplex.

Node numbering: supply ``i`` is node ``i``, demand ``j`` is node ``n + j``.
Arc ``(i, j)`` has index ``i * m + j`` and carries flow from ``i`` to ``n + j``.
The spanning tree is stored as parent pointers with a doubly linked child list
per node; ``flow[v]`` is the flow on ``parent_arc[v]``.
"""

import numpy as np
from numba import njit

INT64_MAX = np.iinfo(np.int64).max


@njit(cache=True)
def price_full(cs, n, m, pi, first_negative):
    best = -1
    best_r = 0
    scanned = 0
    for i in range(n):
        pi_i = pi[i]
        base = i * m
        for j in range(m):
            r = cs[base + j] - pi_i + pi[n + j]
            scanned += 1
            if r < best_r:
                best_r = r
                best = base + j
                if first_negative:
                    return best, best_r, scanned
    return best, best_r, scanned


@njit(cache=True)
def price_subset(cs, n, m, pi, arcs, first_negative):
    best = -1
    best_r = 0
    scanned = 0
    for k in range(arcs.shape[0]):
        a = arcs[k]
        r = cs[a] - pi[a // m] + pi[n + a % m]
        scanned += 1
        if r < best_r:
            best_r = r
            best = a
            if first_negative:
                return best, best_r, scanned
    return best, best_r, scanned


@njit(cache=True)
def reduced_costs(cs, n, m, pi, arcs, out):
    for k in range(arcs.shape[0]):
        a = arcs[k]
        out[k] = cs[a] - pi[a // m] + pi[n + a % m]


@njit(cache=True)
def reduced_costs_dense(cs, n, m, pi, out):
    for i in range(n):
        pi_i = pi[i]
        base = i * m
        for j in range(m):
            out[base + j] = cs[base + j] - pi_i + pi[n + j]


@njit(cache=True)
def pivot(n, m, e, r_e, parent, parent_arc, flow, depth,
          first_child, next_sib, prev_sib, pi, in_basis, stack):
    """Enter arc ``e`` (reduced cost ``r_e``); return ``(leaving_arc, delta)``.

    Leaving arc: smallest flow among arcs whose flow decreases around the
    cycle, ties broken by smallest arc index.
    """
    ni = e // m
    nj = n + e % m
    a = ni
    b = nj
    delta = INT64_MAX
    leave = -1
    leave_node = -1
    leave_on_i = False
    # i-side arcs decrease when the lower node is a supply node,
    # j-side arcs when it is a demand node.
    while a != b:
        if depth[a] >= depth[b]:
            if a < n:
                f = flow[a]
                arc = parent_arc[a]
                if f < delta or (f == delta and arc < leave):
                    delta = f
                    leave = arc
                    leave_node = a
                    leave_on_i = True
            a = parent[a]
        else:
            if b >= n:
                f = flow[b]
                arc = parent_arc[b]
                if f < delta or (f == delta and arc < leave):
                    delta = f
                    leave = arc
                    leave_node = b
                    leave_on_i = False
            b = parent[b]
    lca = a

    if delta > 0:
        a = ni
        while a != lca:
            if a < n:
                flow[a] -= delta
            else:
                flow[a] += delta
            a = parent[a]
        b = nj
        while b != lca:
            if b >= n:
                flow[b] -= delta
            else:
                flow[b] += delta
            b = parent[b]

    if leave_on_i:
        q = ni
        new_par = nj
        shift = r_e
    else:
        q = nj
        new_par = ni
        shift = -r_e

    # reverse the path q -> leave_node so that q hangs from the entering arc
    u = q
    new_arc = e
    new_flow = delta
    while True:
        op = parent[u]
        oa = parent_arc[u]
        of = flow[u]
        ps = prev_sib[u]
        ns = next_sib[u]
        if ps != -1:
            next_sib[ps] = ns
        else:
            first_child[op] = ns
        if ns != -1:
            prev_sib[ns] = ps
        h = first_child[new_par]
        next_sib[u] = h
        prev_sib[u] = -1
        if h != -1:
            prev_sib[h] = u
        first_child[new_par] = u
        parent[u] = new_par
        parent_arc[u] = new_arc
        flow[u] = new_flow
        if u == leave_node:
            break
        new_par = u
        new_arc = oa
        new_flow = of
        u = op

    in_basis[e] = 1
    in_basis[leave] = 0

    top = 0
    stack[0] = q
    while top >= 0:
        v = stack[top]
        top -= 1
        depth[v] = depth[parent[v]] + 1
        pi[v] += shift
        c = first_child[v]
        while c != -1:
            top += 1
            stack[top] = c
            c = next_sib[c]
    return leave, delta


@njit(cache=True)
def run(cs, n, m, arcs, full, parent, parent_arc, flow, depth,
        first_child, next_sib, prev_sib, pi, in_basis, stack,
        bland_only, streak_limit, streak, use_bland, max_pivots):
    """Price and pivot until optimal over the scope or ``max_pivots`` is hit.

    Scope is every arc when ``full`` else the sorted index array ``arcs``.
    Dantzig pricing switches to first-negative (Bland) pricing once
    ``streak_limit`` consecutive degenerate pivots occur and switches back
    after the next nondegenerate pivot.
    """
    pivots = 0
    evals = 0
    obj_delta = 0
    degenerate = 0
    optimal = False
    while pivots < max_pivots:
        if full:
            e, r, scanned = price_full(cs, n, m, pi, use_bland)
        else:
            e, r, scanned = price_subset(cs, n, m, pi, arcs, use_bland)
        evals += scanned
        if e < 0:
            optimal = True
            break
        leave, delta = pivot(n, m, e, r, parent, parent_arc, flow, depth,
                             first_child, next_sib, prev_sib, pi, in_basis, stack)
        pivots += 1
        obj_delta += delta * r
        if delta == 0:
            degenerate += 1
            streak += 1
            if streak >= streak_limit:
                use_bland = True
        else:
            streak = 0
            use_bland = bland_only
    return pivots, evals, obj_delta, optimal, streak, use_bland, degenerate


@njit(cache=True)
def scan_negatives(cs, n, m, pi, mark, out):
    """Price every arc; flag negative ones in ``mark`` and list them in ``out``.

    Returns ``(min_reduced_cost, first_argmin, negative_count)``.
    """
    best = 0
    best_r = cs[0] - pi[0] + pi[n]
    count = 0
    for i in range(n):
        pi_i = pi[i]
        base = i * m
        for j in range(m):
            r = cs[base + j] - pi_i + pi[n + j]
            if r < best_r:
                best_r = r
                best = base + j
            if r < 0:
                mark[base + j] = 1
                out[count] = base + j
                count += 1
            else:
                mark[base + j] = 0
    return best_r, best, count


@njit(cache=True)
def compact_unmarked(data, mark, out):
    k = 0
    for x in data:
        if mark[x] == 0:
            out[k] = x
            k += 1
    return k


@njit(cache=True)
def log_sweep(neg_cost, log_target, log_other, out, transpose):
    """One log-domain Sinkhorn half-step with per-row max subtraction.

    ``out[i] = log_target[i] - logsumexp_j(neg_cost[i, j] + log_other[j])``,
    or over the columns of ``neg_cost`` when ``transpose`` is set.  Returns the
    max-norm change against the previous contents of ``out``.
    """
    n, m = neg_cost.shape
    change = 0.0
    if not transpose:
        for i in range(n):
            mx = -np.inf
            for j in range(m):
                z = neg_cost[i, j] + log_other[j]
                if z > mx:
                    mx = z
            acc = 0.0
            for j in range(m):
                acc += np.exp(neg_cost[i, j] + log_other[j] - mx)
            val = log_target[i] - (mx + np.log(acc))
            d = abs(val - out[i])
            if d > change:
                change = d
            out[i] = val
    else:
        mx = np.full(m, -np.inf)
        for i in range(n):
            for j in range(m):
                z = neg_cost[i, j] + log_other[i]
                if z > mx[j]:
                    mx[j] = z
        acc = np.zeros(m)
        for i in range(n):
            for j in range(m):
                acc[j] += np.exp(neg_cost[i, j] + log_other[i] - mx[j])
        for j in range(m):
            val = log_target[j] - (mx[j] + np.log(acc[j]))
            d = abs(val - out[j])
            if d > change:
                change = d
            out[j] = val
    return change

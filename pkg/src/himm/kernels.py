"""Array kernels for the hot loops.

Every kernel works on the node arrays of :class:`himm.core.HierarchyIndex`:
nodes are global integers, machines are integers in parent-before-child
(BFS) order with machine 0 the root. Undefined transitions are ``-1`` in
``trans_next``. The same source runs compiled under numba or as plain
Python over numpy arrays (see :mod:`himm._jit`).

All Dijkstra variants share one binary heap keyed by ``(cost, seq)`` where
``seq`` is the push counter, and relax only on strict improvement, so ties
resolve to the earliest-discovered path on both backends.
"""

import numpy as np

from ._jit import njit

INF = np.inf


@njit
def heap_push(hk, hs, hv, size, key, seq, val):
    i = size
    hk[i] = key
    hs[i] = seq
    hv[i] = val
    while i > 0:
        p = (i - 1) >> 1
        if hk[p] < hk[i] or (hk[p] == hk[i] and hs[p] < hs[i]):
            break
        hk[p], hk[i] = hk[i], hk[p]
        hs[p], hs[i] = hs[i], hs[p]
        hv[p], hv[i] = hv[i], hv[p]
        i = p
    return size + 1


@njit
def heap_pop(hk, hs, hv, size):
    key = hk[0]
    seq = hs[0]
    val = hv[0]
    size -= 1
    if size > 0:
        hk[0] = hk[size]
        hs[0] = hs[size]
        hv[0] = hv[size]
        i = 0
        while True:
            left = 2 * i + 1
            if left >= size:
                break
            best = left
            right = left + 1
            if right < size and (
                hk[right] < hk[left] or (hk[right] == hk[left] and hs[right] < hs[left])
            ):
                best = right
            if hk[i] < hk[best] or (hk[i] == hk[best] and hs[i] < hs[best]):
                break
            hk[i], hk[best] = hk[best], hk[i]
            hs[i], hs[best] = hs[best], hs[i]
            hv[i], hv[best] = hv[best], hv[i]
            i = best
    return key, seq, val, size


@njit
def derive_tree(start_node, node_child, parent_node, node_machine):
    """Machine depths (root = 1) and the leaf reached by following start states."""
    n = start_node.shape[0]
    depth = np.ones(n, dtype=np.int64)
    for m in range(1, n):
        depth[m] = depth[node_machine[parent_node[m]]] + 1
    start_leaf = np.empty(n, dtype=np.int64)
    for m in range(n - 1, -1, -1):
        s = start_node[m]
        c = node_child[s]
        if c < 0:
            start_leaf[m] = s
        else:
            start_leaf[m] = start_leaf[c]
    return depth, start_leaf


@njit
def exit_tables(offsets, start_node, node_child, trans_next, trans_cost):
    """Optimal exit costs of every machine, children before parents.

    For machine ``m`` a Dijkstra runs from its start state over the
    augmented machine: a defined ``(q, x)`` edge weighs ``c_x^q + cost``,
    an undefined one leads to the sink ``E_x`` with weight ``c_x^q``.
    Edges whose child exit cost is infinite are skipped.

    Returns ``(cost[N, k], exit_pred[N, k], pred_node[T], pred_input[T])``;
    the witness for ``(m, x)`` ends with step ``(exit_pred[m, x], x)`` and
    is recovered by walking ``pred_node``/``pred_input`` back to the start.
    """
    n_machines = start_node.shape[0]
    n_nodes = trans_next.shape[0]
    k = trans_next.shape[1]
    cost = np.full((n_machines, k), INF)
    exit_pred = np.full((n_machines, k), -1, dtype=np.int64)
    pred_node = np.full(n_nodes, -1, dtype=np.int64)
    pred_input = np.full(n_nodes, -1, dtype=np.int64)
    dist = np.full(n_nodes, INF)
    done = np.zeros(n_nodes, dtype=np.bool_)
    exit_done = np.zeros(k, dtype=np.bool_)

    widest = 0
    for m in range(n_machines):
        w = offsets[m + 1] - offsets[m]
        if w > widest:
            widest = w
    cap = widest * k + 1
    hk = np.empty(cap)
    hs = np.empty(cap, dtype=np.int64)
    hv = np.empty(cap, dtype=np.int64)

    for m in range(n_machines - 1, -1, -1):
        for x in range(k):
            exit_done[x] = False
        src = start_node[m]
        dist[src] = 0.0
        size = heap_push(hk, hs, hv, 0, 0.0, 0, src)
        seq = 1
        remaining = k
        while size > 0 and remaining > 0:
            d, _, v, size = heap_pop(hk, hs, hv, size)
            if v < 0:
                x = -v - 1
                if not exit_done[x]:
                    exit_done[x] = True
                    remaining -= 1
                continue
            if done[v]:
                continue
            done[v] = True
            ch = node_child[v]
            for x in range(k):
                c = 0.0
                if ch >= 0:
                    c = cost[ch, x]
                    if c == INF:
                        continue
                t = trans_next[v, x]
                if t >= 0:
                    nd = d + (c + trans_cost[v, x])
                    if nd < dist[t]:
                        dist[t] = nd
                        pred_node[t] = v
                        pred_input[t] = x
                        size = heap_push(hk, hs, hv, size, nd, seq, t)
                        seq += 1
                else:
                    nd = d + c
                    if nd < cost[m, x]:
                        cost[m, x] = nd
                        exit_pred[m, x] = v
                        size = heap_push(hk, hs, hv, size, nd, seq, -x - 1)
                        seq += 1
    return cost, exit_pred, pred_node, pred_input


@njit
def flatten(leaf_nodes, leaf_index, trans_next, trans_cost, node_child,
            node_machine, parent_node, start_leaf, machine_depth):
    """Materialise psi/chi for every (state, input) of the hierarchy.

    ``level[f, x]`` is the depth of the machine whose transition was taken
    (0 when no ancestor defines ``x``); it tells which subtrees a step leaves.
    """
    n_states = leaf_nodes.shape[0]
    k = trans_next.shape[1]
    nxt = np.full((n_states, k), -1, dtype=np.int64)
    cost = np.zeros((n_states, k))
    level = np.zeros((n_states, k), dtype=np.int32)
    for f in range(n_states):
        v0 = leaf_nodes[f]
        for x in range(k):
            u = v0
            while u >= 0:
                t = trans_next[u, x]
                if t >= 0:
                    c = node_child[t]
                    land = t
                    if c >= 0:
                        land = start_leaf[c]
                    nxt[f, x] = leaf_index[land]
                    cost[f, x] = trans_cost[u, x]
                    level[f, x] = machine_depth[node_machine[u]]
                    break
                u = parent_node[node_machine[u]]
    return nxt, cost, level


@njit
def flat_search(nxt, cost, src, dst):
    """Single-pair Dijkstra on a flat machine; stops once ``dst`` is settled.

    Returns ``(dist, pred, pred_input, settled)``.
    """
    n_states = nxt.shape[0]
    k = nxt.shape[1]
    dist = np.full(n_states, INF)
    pred = np.full(n_states, -1, dtype=np.int64)
    pred_input = np.full(n_states, -1, dtype=np.int64)
    done = np.zeros(n_states, dtype=np.bool_)
    cap = n_states * k + 1
    hk = np.empty(cap)
    hs = np.empty(cap, dtype=np.int64)
    hv = np.empty(cap, dtype=np.int64)
    dist[src] = 0.0
    size = heap_push(hk, hs, hv, 0, 0.0, 0, src)
    seq = 1
    settled = 0
    while size > 0:
        d, _, v, size = heap_pop(hk, hs, hv, size)
        if done[v]:
            continue
        done[v] = True
        settled += 1
        if v == dst:
            break
        for x in range(k):
            t = nxt[v, x]
            if t < 0:
                continue
            nd = d + cost[v, x]
            if nd < dist[t]:
                dist[t] = nd
                pred[t] = v
                pred_input[t] = x
                size = heap_push(hk, hs, hv, size, nd, seq, t)
                seq += 1
    return dist, pred, pred_input, settled


@njit
def machine_search(src, lo, hi, trans_next, trans_cost, node_child, exit_cost,
                   sink0, sink1, exit_open):
    """Dijkstra inside one machine of a reduced hierarchy.

    Vertices ``0..n-1`` are the machine's nodes (``node - lo``) and
    ``n + x`` is the pseudo-target for leaving the machine with ``x``.
    ``sink0``/``sink1`` are nodes refined into kept machines: they are
    reachable but never expanded, and add no child exit cost. Every other
    refined node adds its child's exit cost to each edge out of it.
    Exit edges exist only where ``exit_open[x]``.
    """
    n = hi - lo
    k = trans_next.shape[1]
    size_v = n + k
    dist = np.full(size_v, INF)
    pred_v = np.full(size_v, -1, dtype=np.int64)
    pred_x = np.full(size_v, -1, dtype=np.int64)
    done = np.zeros(size_v, dtype=np.bool_)
    cap = n * k + 1
    hk = np.empty(cap)
    hs = np.empty(cap, dtype=np.int64)
    hv = np.empty(cap, dtype=np.int64)
    s = src - lo
    dist[s] = 0.0
    size = heap_push(hk, hs, hv, 0, 0.0, 0, s)
    seq = 1
    while size > 0:
        d, _, iv, size = heap_pop(hk, hs, hv, size)
        if done[iv]:
            continue
        done[iv] = True
        if iv >= n:
            continue
        v = lo + iv
        if v == sink0 or v == sink1:
            continue
        ch = node_child[v]
        for x in range(k):
            c = 0.0
            if ch >= 0:
                c = exit_cost[ch, x]
                if c == INF:
                    continue
            t = trans_next[v, x]
            if t >= 0:
                nd = d + (c + trans_cost[v, x])
                ti = t - lo
            else:
                if not exit_open[x]:
                    continue
                nd = d + c
                ti = n + x
            if nd < dist[ti]:
                dist[ti] = nd
                pred_v[ti] = iv
                pred_x[ti] = x
                size = heap_push(hk, hs, hv, size, nd, seq, ti)
                seq += 1
    return dist, pred_v, pred_x


def warmup():
    """Compile every kernel on a two-machine hierarchy so timings exclude JIT."""
    offsets = np.array([0, 2, 4], dtype=np.int64)
    start_node = np.array([0, 2], dtype=np.int64)
    node_child = np.array([1, -1, -1, -1], dtype=np.int64)
    parent_node = np.array([-1, 0], dtype=np.int64)
    node_machine = np.array([0, 0, 1, 1], dtype=np.int64)
    trans_next = np.array([[1, -1], [0, -1], [3, -1], [-1, 2]], dtype=np.int64)
    trans_cost = np.ones((4, 2))
    depth, start_leaf = derive_tree(start_node, node_child, parent_node, node_machine)
    cost, _, _, _ = exit_tables(offsets, start_node, node_child, trans_next, trans_cost)
    leaf_nodes = np.array([1, 2, 3], dtype=np.int64)
    leaf_index = np.array([-1, 0, 1, 2], dtype=np.int64)
    nxt, fcost, _ = flatten(leaf_nodes, leaf_index, trans_next, trans_cost, node_child,
                            node_machine, parent_node, start_leaf, depth)
    flat_search(nxt, fcost, 0, 2)
    machine_search(0, 0, 2, trans_next, trans_cost, node_child, cost, -1, -1,
                   np.ones(2, dtype=np.bool_))

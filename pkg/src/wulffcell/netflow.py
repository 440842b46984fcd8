"""Primal network simplex for maximum-gain circulations.

Solves::

    maximize   sum_e gain[e] * f[e]
    subject to sum_{e out of k} f[e] - sum_{e into k} f[e] = 0   for every node k
               0 <= f[e] <= cap[e]

The basis is a spanning tree of the (undirected) node graph.  Node
potentials ``pi`` make every tree arc tight, ``gain + pi[src] - pi[dst] = 0``;
at optimality arcs at their lower bound have nonpositive reduced gain and
arcs at their upper bound nonnegative reduced gain.  The potentials are
therefore an optimal solution of the dual problem::

    minimize sum_e cap[e] * (gain[e] + pi[src] - pi[dst])^+
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import InputError, IterativeFailure

LOWER, UPPER, TREE = 0, 1, 2


@dataclass
class CirculationResult:
    flow: np.ndarray
    potential: np.ndarray
    reduced: np.ndarray
    pivots: int


def _initial_tree(n, src, dst):
    adj = [[] for _ in range(n)]
    for e, (s, t) in enumerate(zip(src, dst)):
        if s != t:
            adj[s].append(e)
            adj[t].append(e)
    in_tree = np.zeros(len(src), dtype=bool)
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        a = queue.popleft()
        for e in adj[a]:
            b = dst[e] if src[e] == a else src[e]
            if not seen[b]:
                seen[b] = True
                in_tree[e] = True
                queue.append(b)
    if not seen.all():
        raise InputError("node graph is not connected", "disconnected")
    return in_tree


def max_gain_circulation(n, src, dst, cap, gain, max_pivots=None) -> CirculationResult:
    """Optimal circulation and node potentials (potential of node 0 is 0).

    Pricing is Dantzig's rule; after a run of degenerate pivots the
    solver falls back to Bland's smallest-index rule, which cannot cycle.
    Ties in the ratio test always go to the smallest arc index, so the
    result is a deterministic function of the input.
    """
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    cap = np.asarray(cap, dtype=float)
    gain = np.asarray(gain, dtype=float)
    m = len(src)
    if max_pivots is None:
        max_pivots = 50 * (m + n) + 1000

    in_tree = _initial_tree(n, src, dst)
    state = np.where(in_tree, TREE, LOWER)
    flow = np.zeros(m)
    scale = 1.0 + (np.abs(gain).max() if m else 0.0)
    tol = 1e-12 * scale
    cap_tol = 1e-13 * (1.0 + (cap.max() if m else 0.0))

    tree_adj = [[] for _ in range(n)]
    for e in np.flatnonzero(in_tree):
        tree_adj[src[e]].append(e)
        tree_adj[dst[e]].append(e)

    pi = np.zeros(n)
    parent_arc = np.full(n, -1, dtype=np.int64)
    depth = np.zeros(n, dtype=np.int64)

    def rebuild():
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        pi[0] = 0.0
        parent_arc[0] = -1
        depth[0] = 0
        queue = deque([0])
        while queue:
            a = queue.popleft()
            for e in tree_adj[a]:
                if src[e] == a:
                    b, val = dst[e], pi[a] + gain[e]
                else:
                    b, val = src[e], pi[a] - gain[e]
                if not seen[b]:
                    seen[b] = True
                    pi[b] = val
                    parent_arc[b] = e
                    depth[b] = depth[a] + 1
                    queue.append(b)

    def other(e, a):
        return dst[e] if src[e] == a else src[e]

    degenerate_run = 0
    pivots = 0
    rebuild()
    while True:
        red = gain + pi[src] - pi[dst]
        viol = np.where(state == LOWER, red, np.where(state == UPPER, -red, 0.0))
        eligible = viol > tol
        if not eligible.any():
            break
        if pivots >= max_pivots:
            raise IterativeFailure("network simplex exceeded its pivot budget",
                                   gap=float(viol.max()), iterations=pivots)
        if degenerate_run > n + 10:
            enter = int(np.flatnonzero(eligible)[0])
        else:
            enter = int(np.argmax(np.where(eligible, viol, -np.inf)))
        pivots += 1

        # flow is pushed a -> b along the entering arc, then b -> a in the tree
        if state[enter] == LOWER:
            a, b = src[enter], dst[enter]
        else:
            a, b = dst[enter], src[enter]
        cycle = []  # (arc, +1 if flow increases on it, else -1)
        # walk b -> lca and a -> lca
        x, y = b, a
        up_b, up_a = [], []
        while x != y:
            if depth[x] >= depth[y]:
                e = parent_arc[x]
                up_b.append((e, 1 if src[e] == x else -1))
                x = other(e, x)
            else:
                e = parent_arc[y]
                # traversed lca -> a downwards, i.e. from parent to y
                up_a.append((e, 1 if dst[e] == y else -1))
                y = other(e, y)
        cycle = [(enter, 1 if state[enter] == LOWER else -1)] + up_b + up_a[::-1]

        delta = np.inf
        leave = -1
        for e, sgn in cycle:
            res = cap[e] - flow[e] if sgn > 0 else flow[e]
            if res < delta - cap_tol or (abs(res - delta) <= cap_tol and e < leave):
                delta, leave = res, e
        delta = max(delta, 0.0)
        for e, sgn in cycle:
            flow[e] += sgn * delta
        degenerate_run = degenerate_run + 1 if delta <= cap_tol else 0

        leave_sign = dict(cycle)[leave]
        if leave == enter:
            state[enter] = UPPER if state[enter] == LOWER else LOWER
            flow[enter] = cap[enter] if state[enter] == UPPER else 0.0
            continue
        state[leave] = UPPER if leave_sign > 0 else LOWER
        flow[leave] = cap[leave] if leave_sign > 0 else 0.0
        state[enter] = TREE
        tree_adj[src[leave]].remove(leave)
        tree_adj[dst[leave]].remove(leave)
        tree_adj[src[enter]].append(enter)
        tree_adj[dst[enter]].append(enter)
        rebuild()

    np.clip(flow, 0.0, cap, out=flow)
    red = gain + pi[src] - pi[dst]
    return CirculationResult(flow=flow, potential=pi.copy(), reduced=red, pivots=pivots)

"""Independent reference implementations used as test oracles."""

import math

import numpy as np


def grid_edges(values, passable, connectivity=8, weighted=True):
    """(u, v, w) for every directed edge between passable neighbours; nodes are row-major cell indices."""
    h, w = values.shape
    steps = [(0, 1), (1, 0), (0, -1), (-1, 0)]
    if connectivity == 8:
        steps += [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    out = []
    for i in range(h):
        for j in range(w):
            if not passable[i, j]:
                continue
            for di, dj in steps:
                a, b = i + di, j + dj
                if 0 <= a < h and 0 <= b < w and passable[a, b]:
                    step = math.sqrt(2.0) if di and dj else 1.0
                    cost = step * 0.5 * (values[i, j] + values[a, b]) if weighted else step
                    out.append((i * w + j, a * w + b, cost))
    return out


def enumerate_min_cost(values, passable, start, goal, connectivity=8, weighted=True):
    """Minimum cost over every simple path from ``start`` to ``goal`` (cells as (i, j)); inf when none exists."""
    h, w = values.shape
    adj = {}
    for u, v, c in grid_edges(values, passable, connectivity, weighted):
        adj.setdefault(u, []).append((v, c))
    s, g = start[0] * w + start[1], goal[0] * w + goal[1]
    best = math.inf
    stack = [(s, 0.0, frozenset([s]))]
    while stack:
        node, cost, seen = stack.pop()
        if node == g:
            best = min(best, cost)
            continue
        for nxt, c in adj.get(node, ()):
            if nxt not in seen:
                stack.append((nxt, cost + c, seen | {nxt}))
    return best


def floyd_warshall_min(values, passable, start, goal, connectivity=8, weighted=True):
    """All-pairs shortest path relaxation over a dense matrix; returns the start-goal distance."""
    h, w = values.shape
    n = h * w
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for u, v, c in grid_edges(values, passable, connectivity, weighted):
        d[u, v] = min(d[u, v], c)
    for k in range(n):
        d = np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :])
    return float(d[start[0] * w + start[1], goal[0] * w + goal[1]])


def branch_and_bound_min(values, passable, start, goal, connectivity=8, weighted=True):
    """Exhaustive depth-first search over simple paths, pruning partial paths already costlier than the best.

    Edge weights are non-negative, so pruning never discards an optimum.
    """
    h, w = values.shape
    adj = {}
    for u, v, c in grid_edges(values, passable, connectivity, weighted):
        adj.setdefault(u, []).append((c, v))
    for edges in adj.values():
        edges.sort()
    s, g = start[0] * w + start[1], goal[0] * w + goal[1]
    best = math.inf
    seen = [False] * (h * w)
    seen[s] = True

    def visit(node, cost):
        nonlocal best
        if cost >= best:
            return
        if node == g:
            best = cost
            return
        for c, nxt in adj.get(node, ()):
            if not seen[nxt]:
                seen[nxt] = True
                visit(nxt, cost + c)
                seen[nxt] = False

    visit(s, 0.0)
    return best

"""Pure-Python/numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels`` must return identical results.
"""

import heapq
import math

import numpy as np

SQRT2 = math.sqrt(2.0)

# (drow, dcol, step length in cells); 4-neighbours first so ties break the same way in both kernels
NEIGHBOURS_8 = (
    (-1, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (0, -1, 1.0),
    (-1, 1, SQRT2), (1, 1, SQRT2), (1, -1, SQRT2), (-1, -1, SQRT2),
)


def bilinear_sample(image, rows, cols):
    """Sample a 2-D float64 image at fractional (row, col) positions.

    A position is valid when it lies inside the pixel extent of the image,
    i.e. ``-0.5 <= row <= H - 0.5`` and likewise for columns. Positions in the
    outer half-pixel are clamped to the border pixel before interpolation.
    Invalid positions get value 0.
    """
    image = np.ascontiguousarray(image, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)
    h, w = image.shape
    valid = (rows >= -0.5) & (rows <= h - 0.5) & (cols >= -0.5) & (cols <= w - 0.5)
    valid &= np.isfinite(rows) & np.isfinite(cols)
    r = np.clip(np.where(valid, rows, 0.0), 0.0, h - 1.0)
    c = np.clip(np.where(valid, cols, 0.0), 0.0, w - 1.0)
    r0 = np.minimum(np.floor(r).astype(np.intp), max(h - 2, 0))
    c0 = np.minimum(np.floor(c).astype(np.intp), max(w - 2, 0))
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = r - r0
    fc = c - c0
    top = image[r0, c0] * (1.0 - fc) + image[r0, c1] * fc
    bottom = image[r1, c0] * (1.0 - fc) + image[r1, c1] * fc
    out = top * (1.0 - fr) + bottom * fr
    out[~valid] = 0.0
    return out, valid


def dijkstra_grid(cost, passable, start, goal, connectivity=8, weighted=True):
    """Minimum-cost path between two cells of a 2-D grid.

    Edge weight is ``step * 0.5 * (cost[a] + cost[b])`` when ``weighted`` and
    ``step`` otherwise; ``step`` is 1 or sqrt(2) in cell units.

    Returns ``(path, total)`` with ``path`` a list of flat cell indices from
    start to goal, or ``([], inf)`` when the goal is unreachable.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    passable = np.ascontiguousarray(passable, dtype=np.uint8)
    h, w = cost.shape
    n = h * w
    flat_cost = cost.ravel().tolist()
    flat_pass = passable.ravel().tolist()
    moves = NEIGHBOURS_8[:4] if connectivity == 4 else NEIGHBOURS_8
    dist = [math.inf] * n
    prev = [-1] * n
    done = [False] * n
    dist[start] = 0.0
    heap = [(0.0, start)]
    while heap:
        d, idx = heapq.heappop(heap)
        if done[idx]:
            continue
        done[idx] = True
        if idx == goal:
            break
        r, c = divmod(idx, w)
        for dr, dc, step in moves:
            nr = r + dr
            nc = c + dc
            if nr < 0 or nr >= h or nc < 0 or nc >= w:
                continue
            nidx = nr * w + nc
            if not flat_pass[nidx] or done[nidx]:
                continue
            if weighted:
                wgt = step * (0.5 * (flat_cost[idx] + flat_cost[nidx]))
            else:
                wgt = step
            nd = d + wgt
            if nd < dist[nidx]:
                dist[nidx] = nd
                prev[nidx] = idx
                heapq.heappush(heap, (nd, nidx))
    if not done[goal]:
        return [], math.inf
    path = [goal]
    while path[-1] != start:
        path.append(prev[path[-1]])
    path.reverse()
    return path, dist[goal]

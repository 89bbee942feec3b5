# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels in ``_kernels_py``; same semantics, same results."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, INFINITY, sqrt, isfinite
from libc.stdlib cimport malloc, realloc, free

cnp.import_array()


def bilinear_sample(image, rows, cols):
    cdef const double[:, ::1] img = np.ascontiguousarray(image, dtype=np.float64)
    r_arr = np.ascontiguousarray(rows, dtype=np.float64)
    c_arr = np.ascontiguousarray(cols, dtype=np.float64)
    shape = r_arr.shape
    cdef const double[::1] rv = r_arr.ravel()
    cdef const double[::1] cv = c_arr.ravel()
    cdef Py_ssize_t n = rv.shape[0]
    out = np.zeros(n, dtype=np.float64)
    valid = np.zeros(n, dtype=np.bool_)
    cdef double[::1] ov = out
    cdef cnp.npy_bool[::1] vv = valid
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    cdef Py_ssize_t i, r0, c0, r1, c1
    cdef Py_ssize_t rmax = h - 2 if h >= 2 else 0
    cdef Py_ssize_t cmax = w - 2 if w >= 2 else 0
    cdef double r, c, fr, fc, top, bottom
    with nogil:
        for i in range(n):
            r = rv[i]
            c = cv[i]
            if not (isfinite(r) and isfinite(c)):
                continue
            if r < -0.5 or r > h - 0.5 or c < -0.5 or c > w - 0.5:
                continue
            if r < 0.0:
                r = 0.0
            elif r > h - 1.0:
                r = h - 1.0
            if c < 0.0:
                c = 0.0
            elif c > w - 1.0:
                c = w - 1.0
            r0 = <Py_ssize_t>floor(r)
            c0 = <Py_ssize_t>floor(c)
            if r0 > rmax:
                r0 = rmax
            if c0 > cmax:
                c0 = cmax
            r1 = r0 + 1 if r0 + 1 < h else h - 1
            c1 = c0 + 1 if c0 + 1 < w else w - 1
            fr = r - r0
            fc = c - c0
            top = img[r0, c0] * (1.0 - fc) + img[r0, c1] * fc
            bottom = img[r1, c0] * (1.0 - fc) + img[r1, c1] * fc
            ov[i] = top * (1.0 - fr) + bottom * fr
            vv[i] = 1
    return out.reshape(shape), valid.reshape(shape)


cdef struct HeapItem:
    double key
    Py_ssize_t idx


cdef inline bint _less(HeapItem a, HeapItem b) nogil:
    return a.key < b.key or (a.key == b.key and a.idx < b.idx)


cdef struct Heap:
    HeapItem* items
    Py_ssize_t size
    Py_ssize_t cap


cdef int _push(Heap* hp, double key, Py_ssize_t idx) nogil:
    cdef HeapItem* grown
    cdef Py_ssize_t pos, parent
    cdef HeapItem item
    if hp.size == hp.cap:
        grown = <HeapItem*>realloc(hp.items, 2 * hp.cap * sizeof(HeapItem))
        if grown == NULL:
            return -1
        hp.items = grown
        hp.cap = 2 * hp.cap
    item.key = key
    item.idx = idx
    pos = hp.size
    hp.size += 1
    while pos > 0:
        parent = (pos - 1) >> 1
        if _less(item, hp.items[parent]):
            hp.items[pos] = hp.items[parent]
            pos = parent
        else:
            break
    hp.items[pos] = item
    return 0


cdef HeapItem _pop(Heap* hp) nogil:
    cdef HeapItem top = hp.items[0]
    cdef HeapItem last
    cdef Py_ssize_t pos = 0, child
    hp.size -= 1
    if hp.size > 0:
        last = hp.items[hp.size]
        while True:
            child = 2 * pos + 1
            if child >= hp.size:
                break
            if child + 1 < hp.size and _less(hp.items[child + 1], hp.items[child]):
                child += 1
            if _less(hp.items[child], last):
                hp.items[pos] = hp.items[child]
                pos = child
            else:
                break
        hp.items[pos] = last
    return top


def dijkstra_grid(cost, passable, Py_ssize_t start, Py_ssize_t goal, int connectivity=8, bint weighted=True):
    cdef const double[:, ::1] cst = np.ascontiguousarray(cost, dtype=np.float64)
    cdef const cnp.uint8_t[:, ::1] ok = np.ascontiguousarray(passable, dtype=np.uint8)
    cdef Py_ssize_t h = cst.shape[0], w = cst.shape[1]
    cdef Py_ssize_t n = h * w
    dist_arr = np.full(n, np.inf, dtype=np.float64)
    prev_arr = np.full(n, -1, dtype=np.intp)
    done_arr = np.zeros(n, dtype=np.uint8)
    cdef double[::1] dist = dist_arr
    cdef Py_ssize_t[::1] prev = prev_arr
    cdef cnp.uint8_t[::1] done = done_arr
    cdef Py_ssize_t dr[8]
    cdef Py_ssize_t dc[8]
    cdef double step[8]
    cdef double s2 = sqrt(2.0)
    dr[:] = [-1, 0, 1, 0, -1, 1, 1, -1]
    dc[:] = [0, 1, 0, -1, 1, 1, -1, -1]
    step[:] = [1.0, 1.0, 1.0, 1.0, s2, s2, s2, s2]
    cdef int nmoves = 4 if connectivity == 4 else 8
    cdef Heap hp
    hp.cap = 64
    hp.size = 0
    hp.items = <HeapItem*>malloc(hp.cap * sizeof(HeapItem))
    if hp.items == NULL:
        raise MemoryError()
    cdef HeapItem cur
    cdef Py_ssize_t r, c, nr, nc, nidx, k
    cdef double d, wgt, nd
    cdef int failed = 0
    with nogil:
        dist[start] = 0.0
        _push(&hp, 0.0, start)
        while hp.size > 0:
            cur = _pop(&hp)
            if done[cur.idx]:
                continue
            done[cur.idx] = 1
            if cur.idx == goal:
                break
            d = cur.key
            r = cur.idx // w
            c = cur.idx - r * w
            for k in range(nmoves):
                nr = r + dr[k]
                nc = c + dc[k]
                if nr < 0 or nr >= h or nc < 0 or nc >= w:
                    continue
                nidx = nr * w + nc
                if not ok[nr, nc] or done[nidx]:
                    continue
                if weighted:
                    wgt = step[k] * (0.5 * (cst[r, c] + cst[nr, nc]))
                else:
                    wgt = step[k]
                nd = d + wgt
                if nd < dist[nidx]:
                    dist[nidx] = nd
                    prev[nidx] = cur.idx
                    if _push(&hp, nd, nidx) != 0:
                        failed = 1
                        break
            if failed:
                break
    free(hp.items)
    if failed:
        raise MemoryError()
    if not done[goal]:
        return [], float("inf")
    # wraparound is off in this module, so walk the chain with a C index instead of path[-1]
    cdef Py_ssize_t node = goal
    path = [node]
    while node != start:
        node = prev[node]
        path.append(node)
    path.reverse()
    return path, float(dist[goal])

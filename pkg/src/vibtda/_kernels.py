"""Compiled kernels for the Rips coboundary reduction.

Simplices are encoded as base-``n`` integers of their sorted vertex tuple (most
significant vertex first), so integer order equals lexicographic order.
Column additions are lazy: the working column is a heap that may hold
repeated entries, and repeats cancel in pairs only when they reach the top.
"""

import heapq

import numpy as np
from numba import njit, types
from numba.typed import Dict, List


@njit(cache=True)
def coboundary(verts, diam, dist, cap):
    n = dist.shape[0]
    k1 = verts.shape[0]
    codes = np.empty(n, np.int64)
    diams = np.empty(n, np.float64)
    m = 0
    p = 0
    for v in range(n):
        if p < k1 and verts[p] == v:
            p += 1
            continue
        d = diam
        for t in range(k1):
            x = dist[verts[t], v]
            if x > d:
                d = x
        if d > cap:
            continue
        code = 0
        for t in range(p):
            code = code * n + verts[t]
        code = code * n + v
        for t in range(p, k1):
            code = code * n + verts[t]
        codes[m] = code
        diams[m] = d
        m += 1
    return codes[:m].copy(), diams[:m].copy()


@njit(cache=True)
def pivot_index(codes, diams):
    best = 0
    for t in range(1, codes.shape[0]):
        if diams[t] < diams[best] or (diams[t] == diams[best] and codes[t] < codes[best]):
            best = t
    return best


@njit(cache=True)
def _pop_pivot(heap):
    """Pop entries until one with odd multiplicity surfaces; (inf, -1) if empty."""
    while len(heap) > 0:
        top = heapq.heappop(heap)
        count = 1
        while len(heap) > 0 and heap[0][1] == top[1]:
            heapq.heappop(heap)
            count += 1
        if count % 2 == 1:
            return top
    return (np.inf, np.int64(-1))


@njit(cache=True)
def _push_column(heap, verts, diam, dist, cap):
    codes, diams = coboundary(verts, diam, dist, cap)
    for t in range(codes.shape[0]):
        heapq.heappush(heap, (diams[t], codes[t]))


@njit(cache=True)
def reduce_coboundary(col_verts, col_diams, dist, cap):
    """Reduce coboundary columns given in ascending filtration order.

    Columns are processed from the last to the first. The working column is a
    lazy binary heap of ``(diameter, code)`` entries; only the reduction
    matrix (which columns were summed) is stored. Returns, per column, the
    death value (``inf`` when the column reduces to zero) and the pivot code
    (-1 when none).
    """
    ncol = col_verts.shape[0]
    deaths = np.full(ncol, np.inf)
    pivots_out = np.full(ncol, -1, np.int64)
    owner = Dict.empty(key_type=types.int64, value_type=types.int64)
    # reduction-matrix columns, only kept for columns that needed additions
    stored_v = List()
    stored_v.append(np.empty(0, np.int64))
    slot = np.zeros(ncol, np.int64)
    for idx in range(ncol - 1, -1, -1):
        codes, diams = coboundary(col_verts[idx], col_diams[idx], dist, cap)
        if codes.shape[0] == 0:
            continue
        b = pivot_index(codes, diams)
        if codes[b] not in owner:
            # apparent/emergent pair: no additions needed
            owner[codes[b]] = idx
            pivots_out[idx] = codes[b]
            deaths[idx] = diams[b]
            continue
        heap = [(diams[t], codes[t]) for t in range(codes.shape[0])]
        heapq.heapify(heap)
        v_idx = [idx]
        while True:
            top = _pop_pivot(heap)
            if top[1] < 0:
                break
            piv = top[1]
            if piv not in owner:
                heapq.heappush(heap, top)
                break
            heapq.heappush(heap, top)
            other = owner[piv]
            if slot[other] > 0:
                vo = stored_v[slot[other]]
                for t in range(vo.shape[0]):
                    _push_column(heap, col_verts[vo[t]], col_diams[vo[t]], dist, cap)
                    v_idx.append(vo[t])
            else:
                _push_column(heap, col_verts[other], col_diams[other], dist, cap)
                v_idx.append(other)
        if len(heap) == 0:
            continue
        top = heap[0]
        owner[top[1]] = idx
        pivots_out[idx] = top[1]
        deaths[idx] = top[0]
        # keep the reduction column with Z/2 cancellation of repeated indices
        arr = np.sort(np.array(v_idx, dtype=np.int64))
        keep = np.empty(arr.shape[0], np.int64)
        m = 0
        t = 0
        while t < arr.shape[0]:
            u = t
            while u < arr.shape[0] and arr[u] == arr[t]:
                u += 1
            if (u - t) % 2 == 1:
                keep[m] = arr[t]
                m += 1
            t = u
        slot[idx] = len(stored_v)
        stored_v.append(keep[:m].copy())
    return deaths, pivots_out


@njit(cache=True)
def count_triangles(ei, ej, ed, dist, cap):
    n = dist.shape[0]
    total = 0
    for e in range(ei.shape[0]):
        i = ei[e]
        j = ej[e]
        for v in range(j + 1, n):
            if dist[i, v] <= cap and dist[j, v] <= cap:
                total += 1
    return total


@njit(cache=True)
def enumerate_triangles(ei, ej, ed, dist, cap, total):
    n = dist.shape[0]
    verts = np.empty((total, 3), np.int64)
    diams = np.empty(total, np.float64)
    codes = np.empty(total, np.int64)
    m = 0
    for e in range(ei.shape[0]):
        i = ei[e]
        j = ej[e]
        for v in range(j + 1, n):
            a = dist[i, v]
            b = dist[j, v]
            if a <= cap and b <= cap:
                d = ed[e]
                if a > d:
                    d = a
                if b > d:
                    d = b
                verts[m, 0] = i
                verts[m, 1] = j
                verts[m, 2] = v
                diams[m] = d
                codes[m] = (i * n + j) * n + v
                m += 1
    return verts, diams, codes


@njit(cache=True)
def union_find_h0(n, ei, ej):
    """Kruskal pass over sorted edges; returns a mask of component-merging edges."""
    parent = np.arange(n)
    merging = np.zeros(ei.shape[0], np.bool_)
    for e in range(ei.shape[0]):
        a = ei[e]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        b = ej[e]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a != b:
            if a < b:
                parent[b] = a
            else:
                parent[a] = b
            merging[e] = True
    return merging

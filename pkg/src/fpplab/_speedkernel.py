"""Optional numba kernel for the speed-bound experiment.

The pure-python bidirectional search in ``harness.lazy_time_below_cap`` is
exact but costs ~0.5 ms per trial at the largest scale; the millions of
trials the deep-tail speed events need make that the single slowest part of
the suite.  This kernel is the same algorithm jitted, with the same splitmix
hash (bit-identical uniforms) and libm's log1p (within 1 ulp of numpy's SIMD
log1p; event flips from that are measure-zero and the suite cross-checks
event agreement).

Falls back silently when numba is unavailable: HAVE_NUMBA gates use.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*a, **k):
        def wrap(f):
            return f

        return wrap


_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SEED0 = np.uint64(0x6A09E667F3BCC909)
_INV = 1.0 / float(1 << 53)


@njit(cache=True, inline="always")
def _mix(x):
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


@njit(cache=True, inline="always")
def _edge_uniform(seed, e):
    # hash_words(seed, e, 0, 0) with python-int semantics
    h = _mix(_SEED0)
    h = _mix(h + _GAMMA * np.uint64(1) + seed)
    h = _mix(h + _GAMMA * np.uint64(2) + e)
    h = _mix(h + _GAMMA * np.uint64(3))
    h = _mix(h + _GAMMA * np.uint64(4))
    return (h >> np.uint64(11)) * _INV


@njit(cache=True)
def _bidi_below_cap(indptr, nbr, eid, n_edges, sid, tid, cap, seed, mean):
    if sid == tid:
        return 0.0 < cap
    n = indptr.size - 1
    inf = np.inf
    dist = np.full((2, n), inf)
    dist[0, sid] = 0.0
    dist[1, tid] = 0.0
    wc = np.full(n_edges, -1.0)
    # binary heaps, lazy deletion
    cap_heap = 4 * n + 8
    hk = np.empty((2, cap_heap))
    hv = np.empty((2, cap_heap), np.int64)
    hn = np.zeros(2, np.int64)
    hk[0, 0] = 0.0
    hv[0, 0] = sid
    hk[1, 0] = 0.0
    hv[1, 0] = tid
    hn[0] = 1
    hn[1] = 1
    best = inf
    while hn[0] > 0 and hn[1] > 0:
        if hk[0, 0] + hk[1, 0] >= cap or best < cap:
            break
        side = 0 if hk[0, 0] <= hk[1, 0] else 1
        other = 1 - side
        # pop root
        d = hk[side, 0]
        u = hv[side, 0]
        hn[side] -= 1
        last = hn[side]
        lk = hk[side, last]
        lv = hv[side, last]
        i = 0
        while True:
            c = 2 * i + 1
            if c >= last:
                break
            if c + 1 < last and hk[side, c + 1] < hk[side, c]:
                c += 1
            if hk[side, c] < lk:
                hk[side, i] = hk[side, c]
                hv[side, i] = hv[side, c]
                i = c
            else:
                break
        if last > 0:
            hk[side, i] = lk
            hv[side, i] = lv
        if d > dist[side, u]:
            continue
        for kk in range(indptr[u], indptr[u + 1]):
            e = eid[kk]
            w = wc[e]
            if w < 0.0:
                w = -mean * math.log1p(-_edge_uniform(seed, np.uint64(e)))
                wc[e] = w
            nd = d + w
            if nd < cap:
                v = nbr[kk]
                if nd < dist[side, v]:
                    dist[side, v] = nd
                    # push
                    j = hn[side]
                    hn[side] += 1
                    while j > 0:
                        p = (j - 1) // 2
                        if hk[side, p] > nd:
                            hk[side, j] = hk[side, p]
                            hv[side, j] = hv[side, p]
                            j = p
                        else:
                            break
                    hk[side, j] = nd
                    hv[side, j] = v
                ov = dist[other, v]
                if ov < inf and nd + ov < best:
                    best = nd + ov
    return best < cap


@njit(cache=True)
def _multi_dijkstra(indptr, nbr, eid, w, sources):
    n = indptr.size - 1
    out = np.empty((sources.size, n))
    dist = np.empty(n)
    cap_heap = 4 * n + 8
    hk = np.empty(cap_heap)
    hv = np.empty(cap_heap, np.int64)
    for si in range(sources.size):
        for i in range(n):
            dist[i] = np.inf
        s = sources[si]
        dist[s] = 0.0
        hk[0] = 0.0
        hv[0] = s
        hn = 1
        while hn > 0:
            d = hk[0]
            u = hv[0]
            hn -= 1
            lk = hk[hn]
            lv = hv[hn]
            i = 0
            while True:
                c = 2 * i + 1
                if c >= hn:
                    break
                if c + 1 < hn and hk[c + 1] < hk[c]:
                    c += 1
                if hk[c] < lk:
                    hk[i] = hk[c]
                    hv[i] = hv[c]
                    i = c
                else:
                    break
            if hn > 0:
                hk[i] = lk
                hv[i] = lv
            if d > dist[u]:
                continue
            for kk in range(indptr[u], indptr[u + 1]):
                nd = d + w[eid[kk]]
                v = nbr[kk]
                if nd < dist[v]:
                    dist[v] = nd
                    j = hn
                    hn += 1
                    while j > 0:
                        p = (j - 1) // 2
                        if hk[p] > nd:
                            hk[j] = hk[p]
                            hv[j] = hv[p]
                            j = p
                        else:
                            break
                    hk[j] = nd
                    hv[j] = v
        out[si] = dist
    return out


def multi_dijkstra_float(box, weights_f64: np.ndarray, sources: np.ndarray) -> np.ndarray:
    """Jitted source-by-source Dijkstra rows (float64 weights)."""
    indptr, nbr, eid = box.incidence
    return _multi_dijkstra(indptr, nbr, eid, weights_f64, np.asarray(sources, np.int64))


@njit(cache=True)
def _multi_dijkstra_targets(indptr, nbr, eid, w, sources, targets):
    n = indptr.size - 1
    is_target = np.zeros(n, np.uint8)
    for t in targets:
        is_target[t] = 1
    out = np.empty((sources.size, targets.size))
    dist = np.empty(n)
    cap_heap = 4 * n + 8
    hk = np.empty(cap_heap)
    hv = np.empty(cap_heap, np.int64)
    for si in range(sources.size):
        for i in range(n):
            dist[i] = np.inf
        s = sources[si]
        dist[s] = 0.0
        hk[0] = 0.0
        hv[0] = s
        hn = 1
        remaining = targets.size
        while hn > 0 and remaining > 0:
            d = hk[0]
            u = hv[0]
            hn -= 1
            lk = hk[hn]
            lv = hv[hn]
            i = 0
            while True:
                c = 2 * i + 1
                if c >= hn:
                    break
                if c + 1 < hn and hk[c + 1] < hk[c]:
                    c += 1
                if hk[c] < lk:
                    hk[i] = hk[c]
                    hv[i] = hv[c]
                    i = c
                else:
                    break
            if hn > 0:
                hk[i] = lk
                hv[i] = lv
            if d > dist[u]:
                continue
            if is_target[u] == 1:
                is_target[u] = 2  # settled
                remaining -= 1
            for kk in range(indptr[u], indptr[u + 1]):
                nd = d + w[eid[kk]]
                v = nbr[kk]
                if nd < dist[v]:
                    dist[v] = nd
                    j = hn
                    hn += 1
                    while j > 0:
                        p = (j - 1) // 2
                        if hk[p] > nd:
                            hk[j] = hk[p]
                            hv[j] = hv[p]
                            j = p
                        else:
                            break
                    hk[j] = nd
                    hv[j] = v
        for ti in range(targets.size):
            out[si, ti] = dist[targets[ti]]
            is_target[targets[ti]] = 1  # reset for the next source
    return out


def pairwise_times_float(box, weights_f64: np.ndarray, vertex_ids: np.ndarray) -> np.ndarray:
    """t(v, w) matrix between the given vertices; early-terminating Dijkstras."""
    ids = np.asarray(vertex_ids, np.int64)
    indptr, nbr, eid = box.incidence
    return _multi_dijkstra_targets(indptr, nbr, eid, weights_f64, ids, ids)


@njit(cache=True)
def _triangle_ok(t):
    n = t.shape[0]
    for v in range(n):
        for u in range(n):
            tvu = t[v, u]
            row = t[u]
            for w in range(n):
                if tvu + row[w] < t[v, w]:
                    return False
    return True


def triangle_holds(t_int32: np.ndarray) -> bool:
    """All-triples triangle check t[v,w] <= t[v,u] + t[u,w] on int32 input."""
    if HAVE_NUMBA:
        return bool(_triangle_ok(t_int32))
    n = t_int32.shape[0]
    best = np.full_like(t_int32, np.iinfo(np.int32).max)
    for lo in range(0, n, 32):
        hi = min(lo + 32, n)
        cand = (t_int32[:, lo:hi, None] + t_int32[None, lo:hi, :]).min(axis=1)
        np.minimum(best, cand, out=best)
    return bool(np.array_equal(best, t_int32))


def exp_time_below_cap(box, mean: float, master_seed: int, a, b, cap: float) -> bool:
    """Jitted twin of lazy_time_below_cap for exponential weights."""
    indptr, nbr, eid = box.incidence
    return bool(
        _bidi_below_cap(
            indptr,
            nbr,
            eid,
            box.n_edges,
            box.vertex_id(a),
            box.vertex_id(b),
            cap,
            np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF),
            mean,
        )
    )

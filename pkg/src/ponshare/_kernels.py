"""Hot inner loops, JIT-compiled with numba when available.

Backend selection happens once at import time from the PONSHARE_BACKEND
environment variable:

* ``numba`` - require numba (ImportError if it is missing),
* ``numpy`` - run the same functions as plain Python over numpy arrays,
* unset / ``auto`` - numba when importable, plain otherwise.

Both lanes execute identical source with identical IEEE-754 semantics,
so results are bit-for-bit equal; the numpy lane is the slow reference
path. ``python -m ponshare.benchmark`` times one against the other.

All functions below work on flat arrays prepared by
:mod:`ponshare.pathing`; none of them touch Python objects, which is
what lets the numba lane release the GIL (``nogil=True``) and scale
across the experiment runner's worker threads.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = "PONSHARE_BACKEND"


def _pick_backend() -> str:
    choice = os.environ.get(_ENV_FLAG, "auto").strip().lower() or "auto"
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"{_ENV_FLAG} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if choice == "numba":
            raise
        return "numpy"
    return "numba"


BACKEND = _pick_backend()
USING_NUMBA = BACKEND == "numba"


def _maybe_jit(fn):
    if not USING_NUMBA:
        return fn
    from numba import njit

    return njit(cache=True, nogil=True)(fn)


def _bfs_all_impl(out_start, arc_to, src_verts, src_is_ic, onu_vert, olt_vertex, dist, parc):
    """Breadth-first search from every service source over the split graph.

    Expansion is in ascending head-vertex order (arcs come CSR-sorted).
    ONU vertices other than the source are never expanded, and a search
    that starts at an ONU does not expand the OLT either: the head end
    could physically turn traffic around, but a path that reaches the
    OLT never needs the detour, so those turns are excluded.
    """
    n_src = src_verts.shape[0]
    n_vert = dist.shape[1]
    queue = np.empty(n_vert, np.int32)
    for si in range(n_src):
        for v in range(n_vert):
            dist[si, v] = -1
            parc[si, v] = -1
        src = src_verts[si]
        ic = src_is_ic[si]
        dist[si, src] = 0
        queue[0] = src
        lo = 0
        hi = 1
        while lo < hi:
            u = queue[lo]
            lo += 1
            if u != src and onu_vert[u]:
                continue
            if ic and u == olt_vertex:
                continue
            for a in range(out_start[u], out_start[u + 1]):
                w = arc_to[a]
                if dist[si, w] < 0:
                    dist[si, w] = dist[si, u] + 1
                    parc[si, w] = a
                    queue[hi] = w
                    hi += 1


def _count_alts_impl(dist, onu_verts, src_pos, onu_pos, self_ok, n_src_used, counts):
    n_onu = onu_verts.shape[0]
    for oi in range(n_onu):
        c = 1 if self_ok[oi] else 0
        ov = onu_verts[oi]
        op = onu_pos[oi]
        for si in range(n_src_used):
            if src_pos[si] != op and dist[si, ov] >= 0:
                c += 1
        counts[oi] = c


def _fill_alts_impl(
    dist,
    onu_verts,
    src_pos,
    onu_pos,
    self_ok,
    n_src_used,
    rank_of_pos,
    n_nodes,
    alt_start,
    alt_rank,
    alt_hops,
):
    """Write each ONU's service alternatives sorted by (hops, source id).

    The zero-hop self entry (an IC ONU feeding itself through its own
    external ingress) sorts first by construction; remaining ties break
    on the source's node position, i.e. ascending node id.
    """
    n_onu = onu_verts.shape[0]
    stride = np.int64(n_nodes + 1)
    for oi in range(n_onu):
        base = alt_start[oi]
        m = alt_start[oi + 1] - base
        if m == 0:
            continue
        keys = np.empty(m, np.int64)
        ranks = np.empty(m, np.int32)
        hops = np.empty(m, np.int32)
        k = 0
        op = onu_pos[oi]
        if self_ok[oi]:
            keys[0] = np.int64(op)
            ranks[0] = rank_of_pos[op]
            hops[0] = 0
            k = 1
        ov = onu_verts[oi]
        for si in range(n_src_used):
            if src_pos[si] == op:
                continue
            d = dist[si, ov]
            if d < 0:
                continue
            keys[k] = np.int64(d) * stride + np.int64(src_pos[si])
            ranks[k] = si
            hops[k] = d
            k += 1
        order = np.argsort(keys)
        for j in range(m):
            alt_rank[base + j] = ranks[order[j]]
            alt_hops[base + j] = hops[order[j]]


def _grant_fibers_impl(fibers, dirs, k, resid_down, resid_up, resid_ingress, ingress_pos, remaining):
    """Grant along one alternative: min over every touched residual.

    ``fibers[:k]``/``dirs[:k]`` are the hops (0 = downstream, 1 =
    upstream); ``ingress_pos >= 0`` caps the grant by that node's
    external ingress as well. All touched residuals are decremented by
    the granted amount.
    """
    take = remaining
    for t in range(k):
        f = fibers[t]
        if dirs[t] == 0:
            r = resid_down[f]
        else:
            r = resid_up[f]
        if r < take:
            take = r
    if ingress_pos >= 0:
        r = resid_ingress[ingress_pos]
        if r < take:
            take = r
    if take > 0.0:
        for t in range(k):
            f = fibers[t]
            if dirs[t] == 0:
                resid_down[f] -= take
            else:
                resid_up[f] -= take
        if ingress_pos >= 0:
            resid_ingress[ingress_pos] -= take
    return take


grant_fibers = _maybe_jit(_grant_fibers_impl)


def _allocate_impl(
    order,
    demand,
    alt_start,
    alt_rank,
    alt_hops,
    src_verts,
    src_pos,
    onu_verts,
    parc,
    arc_from,
    arc_fiber,
    arc_dir,
    resid_down,
    resid_up,
    resid_ingress,
    granted,
    trace_onu,
    trace_rank,
    trace_amt,
    record_trace,
):
    """Serve ONUs in the given order, splitting leftover demand across
    successive alternatives. Source rank 0 is the OLT (no ingress cap);
    every other rank is an IC ONU whose ingress is consumed by each
    grant it sources, including the zero-hop self grant. Returns the
    number of trace rows written.
    """
    n_vert = parc.shape[1]
    fib_buf = np.empty(n_vert, np.int32)
    dir_buf = np.empty(n_vert, np.uint8)
    tn = 0
    for t in range(order.shape[0]):
        oi = order[t]
        rem = demand[oi]
        got = 0.0
        for ai in range(alt_start[oi], alt_start[oi + 1]):
            if rem <= 0.0:
                break
            si = alt_rank[ai]
            k = 0
            if alt_hops[ai] > 0:
                v = onu_verts[oi]
                sv = src_verts[si]
                while v != sv:
                    a = parc[si, v]
                    fib_buf[k] = arc_fiber[a]
                    dir_buf[k] = arc_dir[a]
                    k += 1
                    v = arc_from[a]
            if si > 0:
                ingress = int(src_pos[si])
            else:
                ingress = -1
            amt = grant_fibers(
                fib_buf, dir_buf, k, resid_down, resid_up, resid_ingress, ingress, rem
            )
            if amt > 0.0:
                got += amt
                rem -= amt
                if record_trace:
                    trace_onu[tn] = oi
                    trace_rank[tn] = si
                    trace_amt[tn] = amt
                    tn += 1
        granted[oi] = got
    return tn


bfs_all = _maybe_jit(_bfs_all_impl)
count_alts = _maybe_jit(_count_alts_impl)
fill_alts = _maybe_jit(_fill_alts_impl)
allocate = _maybe_jit(_allocate_impl)

"""Directed access graph and shortest service paths.

Downstream frames normally flow root-to-leaf, but an ONU with an
external inter-network feed can also act as a service source: its
traffic climbs upstream and is turned back downstream by an active
remote node. A passive splitter cannot turn traffic around, so plain
shortest-path search on the tree would produce physically impossible
routes. The fix is the split-vertex construction: every passive RN
becomes two vertices, one carrying only downstream-directed arcs and
one carrying only upstream-directed arcs, while active nodes keep a
single vertex where a turn is possible. Breadth-first search on that
graph yields exactly the realisable paths.

An :class:`Alternative` is one way to serve an ONU: the path from the
OLT, a path from an IC ONU, or - when the ONU itself has the external
feed *and* sits below an active RN so the feed can reach the tree at
all - a zero-hop entry for serving itself directly from its ingress.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import _kernels
from .topology import NodeKind, PonGraph, is_onu


class Direction(Enum):
    DOWN = "down"
    UP = "up"


class VertexRole(Enum):
    PLAIN = "plain"
    PASSIVE_DOWN = "passive-down"
    PASSIVE_UP = "passive-up"


Hop = tuple[tuple[int, int], Direction]


@dataclass(frozen=True)
class Alternative:
    """One service path for an ONU.

    ``source`` is the node id granting the bitrate (OLT or an IC ONU).
    ``hops`` walks from the source to the target ONU; each hop names a
    fiber as (parent_id, child_id) plus the direction it is traversed.
    A zero-hop alternative (``hops == ()``) is the ONU serving itself
    from its own external ingress; its source is the ONU itself.
    """

    source: int
    hops: tuple[Hop, ...]

    @property
    def hop_count(self) -> int:
        return len(self.hops)

    @property
    def is_self(self) -> bool:
        return not self.hops


class AccessArrays(NamedTuple):
    """Flat representation of the split-vertex graph (kernel input).

    Vertices are numbered node-major in node-id order; a passive RN
    contributes its downstream vertex first, then its upstream vertex.
    Arcs are CSR-sorted by (tail, head). Fibers are indexed by child
    position rank, and every fiber yields exactly one downstream and
    one upstream arc.
    """

    root: int
    n_nodes: int
    n_fibers: int
    n_verts: int
    fiber_parent: np.ndarray  # position of each fiber's parent node
    fiber_child: np.ndarray  # position of each fiber's child node
    fiber_of: np.ndarray  # fiber index per node position, -1 at root
    vert_down: np.ndarray  # downstream-capable vertex per node position
    vert_up: np.ndarray  # upstream-capable vertex per node position
    vert_node: np.ndarray  # node position per vertex
    vert_role: np.ndarray  # 0 plain, 1 passive-down, 2 passive-up
    out_start: np.ndarray  # CSR offsets per vertex
    arc_from: np.ndarray
    arc_to: np.ndarray
    arc_fiber: np.ndarray
    arc_dir: np.ndarray  # 0 down, 1 up
    onu_pos: np.ndarray  # node positions of ONUs, ascending
    onu_vertex: np.ndarray
    onu_vert_mask: np.ndarray
    olt_vertex: int
    active_above: np.ndarray  # per node position: any active RN strictly above


def build_access_arrays(pon: PonGraph) -> AccessArrays:
    """Lower a PonGraph to the flat arrays used by the kernels."""
    n = pon.n_nodes
    kinds = pon.kinds
    parents = pon.parents
    root = pon.root_pos

    nonroot = np.flatnonzero(parents >= 0).astype(np.int32)
    n_fibers = int(nonroot.size)
    fiber_child = nonroot
    fiber_parent = parents[nonroot]
    fiber_of = np.full(n, -1, dtype=np.int32)
    fiber_of[nonroot] = np.arange(n_fibers, dtype=np.int32)

    is_prn = kinds == NodeKind.PASSIVE_RN
    width = 1 + is_prn.astype(np.int64)
    vert_down = (np.cumsum(width) - width).astype(np.int32)
    vert_up = (vert_down + is_prn).astype(np.int32)
    n_verts = int(width.sum())

    vert_node = np.empty(n_verts, dtype=np.int32)
    vert_node[vert_down] = np.arange(n, dtype=np.int32)
    vert_node[vert_up] = np.arange(n, dtype=np.int32)
    vert_role = np.zeros(n_verts, dtype=np.uint8)
    vert_role[vert_down[is_prn]] = 1
    vert_role[vert_up[is_prn]] = 2

    fibers = np.arange(n_fibers, dtype=np.int32)
    tail = np.concatenate((vert_down[fiber_parent], vert_up[fiber_child]))
    head = np.concatenate((vert_down[fiber_child], vert_up[fiber_parent]))
    arc_fiber = np.concatenate((fibers, fibers))
    arc_dir = np.concatenate(
        (np.zeros(n_fibers, np.uint8), np.ones(n_fibers, np.uint8))
    )
    order = np.lexsort((head, tail))
    arc_from = tail[order].astype(np.int32)
    arc_to = head[order].astype(np.int32)
    arc_fiber = arc_fiber[order].astype(np.int32)
    arc_dir = arc_dir[order]
    out_start = np.concatenate(
        ([0], np.cumsum(np.bincount(arc_from, minlength=n_verts)))
    ).astype(np.int64)

    onu_pos = np.flatnonzero(
        (kinds == NodeKind.ONU) | (kinds == NodeKind.IC_ONU)
    ).astype(np.int32)
    onu_vertex = vert_down[onu_pos]
    onu_vert_mask = np.zeros(n_verts, dtype=bool)
    onu_vert_mask[onu_vertex] = True

    # per node: is there an active RN strictly above it
    active_above = np.zeros(n, dtype=bool)
    is_arn = kinds == NodeKind.ACTIVE_RN
    child_count = np.bincount(fiber_parent, minlength=n)
    grouped = fiber_child[np.argsort(fiber_parent, kind="stable")].astype(np.int64)
    starts = np.concatenate(([0], np.cumsum(child_count)))
    frontier = np.array([root], dtype=np.int64)
    while frontier.size:
        counts = child_count[frontier]
        kids = grouped[
            np.repeat(starts[frontier], counts)
            + (np.arange(int(counts.sum())) - np.repeat(np.cumsum(counts) - counts, counts))
        ]
        par = np.repeat(frontier, counts)
        active_above[kids] = active_above[par] | is_arn[par]
        frontier = kids

    return AccessArrays(
        root=root,
        n_nodes=n,
        n_fibers=n_fibers,
        n_verts=n_verts,
        fiber_parent=fiber_parent.astype(np.int32),
        fiber_child=fiber_child,
        fiber_of=fiber_of,
        vert_down=vert_down,
        vert_up=vert_up,
        vert_node=vert_node,
        vert_role=vert_role,
        out_start=out_start,
        arc_from=arc_from,
        arc_to=arc_to,
        arc_fiber=arc_fiber,
        arc_dir=arc_dir,
        onu_pos=onu_pos,
        onu_vertex=onu_vertex,
        onu_vert_mask=onu_vert_mask,
        olt_vertex=int(vert_down[root]),
        active_above=active_above,
    )


class ServiceSources(NamedTuple):
    """Service sources in rank order: rank 0 is the OLT, then IC ONUs
    ascending by node id."""

    verts: np.ndarray
    pos: np.ndarray
    is_ic: np.ndarray
    rank_of_pos: np.ndarray


def service_sources(pon: PonGraph, arrays: AccessArrays, include_ic: bool = True) -> ServiceSources:
    if include_ic:
        ic_pos = np.flatnonzero(pon.kinds == NodeKind.IC_ONU).astype(np.int32)
    else:
        ic_pos = np.empty(0, dtype=np.int32)
    pos = np.concatenate(([arrays.root], ic_pos)).astype(np.int32)
    verts = arrays.vert_down[pos]
    is_ic = np.zeros(pos.size, dtype=bool)
    is_ic[1:] = True
    rank_of_pos = np.full(arrays.n_nodes, -1, dtype=np.int32)
    rank_of_pos[pos] = np.arange(pos.size, dtype=np.int32)
    return ServiceSources(verts=verts, pos=pos, is_ic=is_ic, rank_of_pos=rank_of_pos)


class AlternativeTable(NamedTuple):
    """All alternatives of all ONUs in flat, sorted CSR form."""

    alt_start: np.ndarray  # per ONU-list index, len N+1
    alt_rank: np.ndarray  # source rank per alternative
    alt_hops: np.ndarray
    dist: np.ndarray  # per (rank, vertex) BFS distances
    parc: np.ndarray  # per (rank, vertex) BFS parent arcs
    sources: ServiceSources


def compute_alternatives(
    pon: PonGraph, arrays: AccessArrays, include_ic: bool = True
) -> AlternativeTable:
    """Run BFS from every service source and tabulate sorted alternatives."""
    sources = service_sources(pon, arrays, include_ic)
    n_src = sources.verts.size
    dist = np.empty((n_src, arrays.n_verts), dtype=np.int32)
    parc = np.empty((n_src, arrays.n_verts), dtype=np.int32)
    _kernels.bfs_all(
        arrays.out_start,
        arrays.arc_to,
        sources.verts,
        sources.is_ic,
        arrays.onu_vert_mask,
        arrays.olt_vertex,
        dist,
        parc,
    )

    n_onu = arrays.onu_pos.size
    if include_ic:
        self_ok = (pon.kinds[arrays.onu_pos] == NodeKind.IC_ONU) & arrays.active_above[
            arrays.onu_pos
        ]
    else:
        self_ok = np.zeros(n_onu, dtype=bool)
    counts = np.empty(n_onu, dtype=np.int64)
    _kernels.count_alts(
        dist, arrays.onu_vertex, sources.pos, arrays.onu_pos, self_ok, n_src, counts
    )
    alt_start = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    total = int(alt_start[-1])
    alt_rank = np.empty(total, dtype=np.int32)
    alt_hops = np.empty(total, dtype=np.int32)
    _kernels.fill_alts(
        dist,
        arrays.onu_vertex,
        sources.pos,
        arrays.onu_pos,
        self_ok,
        n_src,
        sources.rank_of_pos,
        arrays.n_nodes,
        alt_start,
        alt_rank,
        alt_hops,
    )
    return AlternativeTable(
        alt_start=alt_start,
        alt_rank=alt_rank,
        alt_hops=alt_hops,
        dist=dist,
        parc=parc,
        sources=sources,
    )


def _decode_path(
    pon: PonGraph, arrays: AccessArrays, parc_row: np.ndarray, src_vert: int, target_vert: int
) -> tuple[Hop, ...]:
    hops: list[Hop] = []
    v = target_vert
    while v != src_vert:
        a = int(parc_row[v])
        f = int(arrays.arc_fiber[a])
        parent_id = int(pon.ids[arrays.fiber_parent[f]])
        child_id = int(pon.ids[arrays.fiber_child[f]])
        direction = Direction.DOWN if arrays.arc_dir[a] == 0 else Direction.UP
        hops.append(((parent_id, child_id), direction))
        v = int(arrays.arc_from[a])
    hops.reverse()
    return tuple(hops)


# -- public API ------------------------------------------------------------


@dataclass(frozen=True)
class AccessVertex:
    node_id: int
    role: VertexRole


@dataclass(frozen=True)
class AccessArc:
    tail: int
    head: int
    edge: tuple[int, int]
    direction: Direction


class DirectedAccessGraph:
    """Split-vertex directed view of a PON, with the node back-mapping.

    Every passive RN maps to two vertices (downstream-only and
    upstream-only); every other node maps to one. Arc count is exactly
    twice the fiber count.
    """

    def __init__(self, pon: PonGraph):
        self.pon = pon
        self.arrays = build_access_arrays(pon)

    @property
    def n_vertices(self) -> int:
        return self.arrays.n_verts

    @property
    def n_arcs(self) -> int:
        return int(self.arrays.arc_from.size)

    @property
    def vertices(self) -> list[AccessVertex]:
        arr = self.arrays
        roles = [VertexRole.PLAIN, VertexRole.PASSIVE_DOWN, VertexRole.PASSIVE_UP]
        return [
            AccessVertex(int(self.pon.ids[arr.vert_node[v]]), roles[arr.vert_role[v]])
            for v in range(arr.n_verts)
        ]

    @property
    def arcs(self) -> list[AccessArc]:
        arr = self.arrays
        out = []
        for a in range(arr.arc_from.size):
            f = int(arr.arc_fiber[a])
            edge = (
                int(self.pon.ids[arr.fiber_parent[f]]),
                int(self.pon.ids[arr.fiber_child[f]]),
            )
            out.append(
                AccessArc(
                    tail=int(arr.arc_from[a]),
                    head=int(arr.arc_to[a]),
                    edge=edge,
                    direction=Direction.DOWN if arr.arc_dir[a] == 0 else Direction.UP,
                )
            )
        return out

    def vertices_of(self, node_id: int) -> list[int]:
        pos = self.pon.pos_of(node_id)
        arr = self.arrays
        if arr.vert_down[pos] == arr.vert_up[pos]:
            return [int(arr.vert_down[pos])]
        return [int(arr.vert_down[pos]), int(arr.vert_up[pos])]


def split_rns(pon: PonGraph) -> DirectedAccessGraph:
    """Build the split-vertex directed graph for shortest-path search."""
    return DirectedAccessGraph(pon)


class ShortestPathTree:
    """BFS tree over the split graph from one service source."""

    def __init__(self, dag: DirectedAccessGraph, source: int):
        kind = dag.pon.kind_of(source)
        if kind not in (NodeKind.OLT, NodeKind.IC_ONU):
            raise ValueError(
                f"shortest-path sources must be the OLT or an IC ONU, got {kind.name}"
            )
        self.dag = dag
        self.source = source
        arr = dag.arrays
        pos = dag.pon.pos_of(source)
        self._src_vert = int(arr.vert_down[pos])
        self.distances = np.empty((1, arr.n_verts), dtype=np.int32)
        self.parent_arcs = np.empty((1, arr.n_verts), dtype=np.int32)
        _kernels.bfs_all(
            arr.out_start,
            arr.arc_to,
            np.array([self._src_vert], dtype=np.int32),
            np.array([kind == NodeKind.IC_ONU]),
            arr.onu_vert_mask,
            arr.olt_vertex,
            self.distances,
            self.parent_arcs,
        )

    def distance_to(self, node_id: int) -> int | None:
        """Hop count to an ONU (None when unreachable)."""
        pon = self.dag.pon
        if not is_onu(pon.kind_of(node_id)):
            raise ValueError("distance_to expects an ONU")
        d = int(self.distances[0, self.dag.arrays.vert_down[pon.pos_of(node_id)]])
        return None if d < 0 else d


def shortest_path_tree(dag: DirectedAccessGraph, source: int) -> ShortestPathTree:
    """BFS by hop count from a service source (the OLT or an IC ONU)."""
    return ShortestPathTree(dag, source)


def trace(tree: ShortestPathTree, node_id: int) -> Alternative | None:
    """Follow parent pointers from an ONU back to the tree's source.

    Returns None when the ONU is unreachable; absence of a path is a
    value, not an error.
    """
    d = tree.distance_to(node_id)
    if d is None:
        return None
    arr = tree.dag.arrays
    pon = tree.dag.pon
    target_vert = int(arr.vert_down[pon.pos_of(node_id)])
    hops = _decode_path(pon, arr, tree.parent_arcs[0], tree._src_vert, target_vert)
    return Alternative(source=tree.source, hops=hops)


def find_alternatives(pon: PonGraph) -> dict[int, list[Alternative]]:
    """All service alternatives per ONU, sorted by (hop count, source id).

    Sources are the OLT and every IC ONU. An IC ONU also gets the
    zero-hop self alternative when an active RN sits above it; with no
    active node on its upstream path its ingress cannot reach the tree,
    so the entry is omitted (and serving any other node is impossible
    too). Every ONU keeps at least the OLT alternative.
    """
    arrays = build_access_arrays(pon)
    table = compute_alternatives(pon, arrays)
    out: dict[int, list[Alternative]] = {}
    for oi, opos in enumerate(arrays.onu_pos):
        onu_id = int(pon.ids[opos])
        alts: list[Alternative] = []
        for ai in range(table.alt_start[oi], table.alt_start[oi + 1]):
            rank = int(table.alt_rank[ai])
            if table.alt_hops[ai] == 0:
                alts.append(Alternative(source=onu_id, hops=()))
                continue
            src_pos = int(table.sources.pos[rank])
            hops = _decode_path(
                pon,
                arrays,
                table.parc[rank],
                int(table.sources.verts[rank]),
                int(arrays.onu_vertex[oi]),
            )
            alts.append(Alternative(source=int(pon.ids[src_pos]), hops=hops))
        out[onu_id] = alts
    return out

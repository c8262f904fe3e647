"""PON data model, line-oriented serialization, and the random generator.

A PON here is a rooted tree: one optical line terminal (OLT) at the
root, remote nodes (passive or active splitters) inside, and optical
network units (ONUs) at the leaves. An ONU either has an external
inter-network feed ("IC") or not. Fibers are the tree edges, oriented
parent -> child; that orientation defines "downstream".

The generator builds the three-stage layout used by the experiments:
the OLT feeds a single first-stage splitter, first- and second-stage
splitter outputs continue to a next-stage splitter with probability
``s`` (otherwise they terminate in an ONU), and third-stage outputs are
all ONUs. Node ids are dense integers in generation order with the OLT
at 0, which gives deterministic tie-breaking everywhere downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Iterator, Union

import numpy as np

from ._rng import MASK64, UniformStream, mix64


class NodeKind(IntEnum):
    """Role of a node in the tree."""

    OLT = 0
    PASSIVE_RN = 1
    ACTIVE_RN = 2
    ONU = 3
    IC_ONU = 4


_KIND_TOKENS = {
    NodeKind.OLT: "olt",
    NodeKind.PASSIVE_RN: "prn",
    NodeKind.ACTIVE_RN: "arn",
    NodeKind.ONU: "onu",
    NodeKind.IC_ONU: "ic-onu",
}
_TOKEN_KINDS = {v: k for k, v in _KIND_TOKENS.items()}


def is_rn(kind: NodeKind | int) -> bool:
    return kind in (NodeKind.PASSIVE_RN, NodeKind.ACTIVE_RN)


def is_onu(kind: NodeKind | int) -> bool:
    return kind in (NodeKind.ONU, NodeKind.IC_ONU)


class StructureError(ValueError):
    """The node/edge data does not form a valid rooted PON tree."""


class PonParseError(ValueError):
    """Malformed PON file; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(eq=False)
class PonGraph:
    """Immutable-by-convention rooted tree of one OLT, RNs and ONUs.

    ``ids`` are strictly increasing node ids, ``kinds`` the NodeKind
    code per node, and ``parents`` the *position* (index into ``ids``)
    of each node's parent, -1 at the root. Positions are id-ordered, so
    "ascending position" and "ascending node id" agree.
    """

    ids: np.ndarray
    kinds: np.ndarray
    parents: np.ndarray

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.kinds = np.asarray(self.kinds, dtype=np.uint8)
        self.parents = np.asarray(self.parents, dtype=np.int32)
        _validate_tree(self.ids, self.kinds, self.parents)

    # -- construction ---------------------------------------------------

    @classmethod
    def from_nodes_edges(
        cls,
        nodes: Iterable[tuple[int, NodeKind]],
        edges: Iterable[tuple[int, int]],
    ) -> "PonGraph":
        """Build and validate a PON from id-level node and edge lists."""
        node_list = list(nodes)
        edge_list = list(edges)
        raw_ids = [int(i) for i, _ in node_list]
        if len(set(raw_ids)) != len(raw_ids):
            raise StructureError("duplicate node ids")
        order = np.argsort(np.asarray(raw_ids, dtype=np.int64), kind="stable")
        ids = np.asarray(raw_ids, dtype=np.int64)[order]
        kinds = np.asarray([int(k) for _, k in node_list], dtype=np.uint8)[order]
        pos_of = {int(i): p for p, i in enumerate(ids)}

        parents = np.full(len(ids), -1, dtype=np.int32)
        seen_child = set()
        for parent_id, child_id in edge_list:
            if parent_id not in pos_of or child_id not in pos_of:
                raise StructureError(
                    f"edge ({parent_id}, {child_id}) references an unknown node"
                )
            if child_id in seen_child:
                raise StructureError(f"node {child_id} has more than one parent")
            seen_child.add(child_id)
            parents[pos_of[child_id]] = pos_of[parent_id]
        if len(edge_list) != len(ids) - 1:
            raise StructureError(
                f"expected {len(ids) - 1} edges for {len(ids)} nodes, got {len(edge_list)}"
            )
        return cls(ids=ids, kinds=kinds, parents=parents)

    # -- derived views ---------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return int(self.ids.size)

    @property
    def num_onus(self) -> int:
        """N: number of ONUs (leaves)."""
        return int(np.count_nonzero(self._onu_mask))

    @property
    def num_rns(self) -> int:
        """R: number of remote nodes (passive + active)."""
        return int(
            np.count_nonzero(
                (self.kinds == NodeKind.PASSIVE_RN) | (self.kinds == NodeKind.ACTIVE_RN)
            )
        )

    @property
    def _onu_mask(self) -> np.ndarray:
        return (self.kinds == NodeKind.ONU) | (self.kinds == NodeKind.IC_ONU)

    @property
    def olt_id(self) -> int:
        return int(self.ids[self.root_pos])

    @property
    def root_pos(self) -> int:
        return int(np.flatnonzero(self.parents < 0)[0])

    @property
    def onu_ids(self) -> np.ndarray:
        return self.ids[self._onu_mask]

    @property
    def ic_onu_ids(self) -> np.ndarray:
        return self.ids[self.kinds == NodeKind.IC_ONU]

    def pos_of(self, node_id: int) -> int:
        pos = int(np.searchsorted(self.ids, node_id))
        if pos >= self.ids.size or self.ids[pos] != node_id:
            raise KeyError(f"no node with id {node_id}")
        return pos

    def kind_of(self, node_id: int) -> NodeKind:
        return NodeKind(int(self.kinds[self.pos_of(node_id)]))

    def parent_of(self, node_id: int) -> int | None:
        p = int(self.parents[self.pos_of(node_id)])
        return None if p < 0 else int(self.ids[p])

    def nodes(self) -> Iterator[tuple[int, NodeKind]]:
        for i in range(self.n_nodes):
            yield int(self.ids[i]), NodeKind(int(self.kinds[i]))

    def edges(self) -> list[tuple[int, int]]:
        """Fibers as (parent_id, child_id), sorted."""
        out = []
        for pos in range(self.n_nodes):
            p = int(self.parents[pos])
            if p >= 0:
                out.append((int(self.ids[p]), int(self.ids[pos])))
        out.sort()
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, PonGraph):
            return NotImplemented
        return (
            np.array_equal(self.ids, other.ids)
            and np.array_equal(self.kinds, other.kinds)
            and np.array_equal(self.parents, other.parents)
        )

    def __repr__(self) -> str:
        return (
            f"PonGraph(n_nodes={self.n_nodes}, onus={self.num_onus}, "
            f"rns={self.num_rns})"
        )


def _validate_tree(ids: np.ndarray, kinds: np.ndarray, parents: np.ndarray) -> None:
    n = ids.size
    if n == 0:
        raise StructureError("empty graph")
    if ids.size != kinds.size or ids.size != parents.size:
        raise StructureError("ids, kinds and parents must have equal length")
    if np.any(ids < 0):
        raise StructureError("node ids must be non-negative")
    if n > 1 and np.any(np.diff(ids) <= 0):
        raise StructureError("node ids must be unique")
    if not np.all(np.isin(kinds, [int(k) for k in NodeKind])):
        raise StructureError("unknown node kind code")

    olt_positions = np.flatnonzero(kinds == NodeKind.OLT)
    if olt_positions.size != 1:
        raise StructureError(f"expected exactly one OLT, found {olt_positions.size}")
    roots = np.flatnonzero(parents < 0)
    if roots.size != 1:
        raise StructureError(f"expected exactly one root, found {roots.size}")
    root = int(roots[0])
    if kinds[root] != NodeKind.OLT:
        raise StructureError("the root node must be the OLT")
    if np.any(parents >= n):
        raise StructureError("parent position out of range")
    if np.any(parents == np.arange(n)):
        raise StructureError("a node cannot be its own parent")

    child_count = np.bincount(parents[parents >= 0], minlength=n)

    # reachability from the root doubles as the acyclicity check: a node
    # on a parent cycle is never reached, because every node has at most
    # one parent
    seen = np.zeros(n, dtype=bool)
    seen[root] = True
    nonroot = np.flatnonzero(parents >= 0)
    order = np.argsort(parents[nonroot], kind="stable")
    grouped_children = nonroot[order].astype(np.int64)
    starts = np.concatenate(([0], np.cumsum(child_count)))
    frontier = np.array([root], dtype=np.int64)
    while frontier.size:
        counts = child_count[frontier]
        total = int(counts.sum())
        if total == 0:
            break
        idx = np.repeat(starts[frontier], counts) + (
            np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        )
        kids = grouped_children[idx]
        seen[kids] = True
        frontier = kids
    if not seen.all():
        raise StructureError("graph is not connected to the OLT (cycle or orphan)")

    if child_count[root] != 1:
        raise StructureError("the OLT must have exactly one child (the feeder fiber)")
    onu_mask = (kinds == NodeKind.ONU) | (kinds == NodeKind.IC_ONU)
    if np.any(child_count[onu_mask] != 0):
        raise StructureError("ONUs must be leaves")
    rn_mask = (kinds == NodeKind.PASSIVE_RN) | (kinds == NodeKind.ACTIVE_RN)
    if np.any(child_count[rn_mask] == 0):
        raise StructureError("remote nodes must be internal (at least one child)")


# -- generator ------------------------------------------------------------


@dataclass(frozen=True)
class FixedStages:
    """RN activity chosen by generator stage: stages listed are active.

    The default marks stage 2 active with stages 1 and 3 passive, the
    fixed placement used by the first evaluation scenario.
    """

    active_stages: frozenset = frozenset((2,))

    def __post_init__(self):
        stages = frozenset(int(s) for s in self.active_stages)
        if not stages <= {1, 2, 3}:
            raise ValueError("active_stages must be a subset of {1, 2, 3}")
        object.__setattr__(self, "active_stages", stages)


@dataclass(frozen=True)
class RandomActive:
    """Each RN is independently active with probability q."""

    q: float

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must lie in [0, 1]")


RnPolicy = Union[FixedStages, RandomActive]


@dataclass(frozen=True)
class GenParams:
    """Parameters of the three-stage random PON generator.

    g: splitter fan-out (every RN has exactly g outputs).
    s: probability that a stage-1/stage-2 output continues to a
       next-stage RN rather than terminating in an ONU.
    rn_policy: how RN activity is assigned.
    ic_prob: probability that an ONU has the inter-network feed.
    seed: 64-bit stream seed; equal seeds give identical PONs.
    """

    g: int
    s: float
    rn_policy: RnPolicy = field(default_factory=FixedStages)
    ic_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if int(self.g) < 1:
            raise ValueError("g must be >= 1")
        if not 0.0 <= self.s <= 1.0:
            raise ValueError("s must lie in [0, 1]")
        if not 0.0 <= self.ic_prob <= 1.0:
            raise ValueError("ic_prob must lie in [0, 1]")
        if not isinstance(self.rn_policy, (FixedStages, RandomActive)):
            raise ValueError("rn_policy must be FixedStages or RandomActive")
        object.__setattr__(self, "g", int(self.g))
        object.__setattr__(self, "seed", int(self.seed) & MASK64)


def expected_counts(g: int, s: float) -> tuple[float, float]:
    """Closed-form mean ONU and RN counts of the three-stage generator.

    E[N] = g(1 - s + gs(1 - s + gs)) and E[R] = 1 + gs(1 + gs).
    """
    if g < 1:
        raise ValueError("g must be >= 1")
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    gs = g * s
    mean_onus = g * (1.0 - s + gs * (1.0 - s + gs))
    mean_rns = 1.0 + gs * (1.0 + gs)
    return mean_onus, mean_rns


def generate_pon(params: GenParams) -> PonGraph:
    """Generate one random three-stage PON, deterministically from the seed.

    Draw order (fixed; the stream makes it reproducible): one uniform
    per stage-1 output, one per stage-2 output grouped by parent id,
    then one per RN in id order when the policy is RandomActive, then
    one per ONU in id order for the IC assignment.
    """
    stream = UniformStream(params.seed)
    g = params.g

    # ids: 0 = OLT, 1 = stage-1 RN, children numbered in output order
    branch1 = stream.draw(g) < params.s
    n2 = int(branch1.sum())
    stage1_children = np.arange(2, 2 + g, dtype=np.int64)
    stage2_rns = stage1_children[branch1]

    branch2 = stream.draw(n2 * g) < params.s
    stage2_children = np.arange(2 + g, 2 + g + n2 * g, dtype=np.int64)
    stage3_rns = stage2_children[branch2]
    n3 = int(stage3_rns.size)

    stage3_children = np.arange(
        2 + g + n2 * g, 2 + g + n2 * g + n3 * g, dtype=np.int64
    )

    n = 2 + g + n2 * g + n3 * g
    kinds = np.full(n, int(NodeKind.ONU), dtype=np.uint8)
    parents = np.full(n, -1, dtype=np.int32)
    kinds[0] = NodeKind.OLT
    parents[1] = 0
    parents[stage1_children] = 1
    if n2:
        parents[stage2_children] = np.repeat(stage2_rns, g).astype(np.int32)
    if n3:
        parents[stage3_children] = np.repeat(stage3_rns, g).astype(np.int32)

    rn_positions = np.concatenate(([1], stage2_rns, stage3_rns)).astype(np.int64)
    rn_stages = np.concatenate(
        (
            [1],
            np.full(n2, 2, dtype=np.int64),
            np.full(n3, 3, dtype=np.int64),
        )
    )
    if isinstance(params.rn_policy, FixedStages):
        active = np.isin(rn_stages, sorted(params.rn_policy.active_stages))
    else:
        # one Bernoulli(q) per RN, in node-id order
        rn_order = np.argsort(rn_positions)
        active = np.empty(rn_positions.size, dtype=bool)
        active[rn_order] = stream.draw(rn_positions.size) < params.rn_policy.q
    kinds[rn_positions] = np.where(
        active, int(NodeKind.ACTIVE_RN), int(NodeKind.PASSIVE_RN)
    ).astype(np.uint8)

    onu_positions = np.flatnonzero(
        (kinds == NodeKind.ONU) | (kinds == NodeKind.IC_ONU)
    )
    ic = stream.draw(onu_positions.size) < params.ic_prob
    kinds[onu_positions[ic]] = NodeKind.IC_ONU

    return PonGraph(ids=np.arange(n, dtype=np.int64), kinds=kinds, parents=parents)


def reassign_ic(pon: PonGraph, ic_prob: float, seed: int) -> PonGraph:
    """Redraw every ONU's IC capability with the given probability.

    One Bernoulli draw per ONU in ascending id order; the topology and
    RN activity are kept.
    """
    if not 0.0 <= ic_prob <= 1.0:
        raise ValueError("ic_prob must lie in [0, 1]")
    kinds = pon.kinds.copy()
    onu_positions = np.flatnonzero(pon._onu_mask)
    draws = UniformStream(mix64(seed, 0x1C)).draw(onu_positions.size) < ic_prob
    kinds[onu_positions] = np.where(
        draws, int(NodeKind.IC_ONU), int(NodeKind.ONU)
    ).astype(np.uint8)
    return PonGraph(ids=pon.ids.copy(), kinds=kinds, parents=pon.parents.copy())


# -- serialization --------------------------------------------------------

_FORMAT_HEADER = "pon 1"


def serialize_pon(pon: PonGraph) -> str:
    """Render a PON in the line-oriented text format (canonical order)."""
    lines = [_FORMAT_HEADER]
    for node_id, kind in pon.nodes():
        lines.append(f"node {node_id} {_KIND_TOKENS[kind]}")
    for parent_id, child_id in pon.edges():
        lines.append(f"edge {parent_id} {child_id}")
    return "\n".join(lines) + "\n"


def parse_pon(text: str) -> PonGraph:
    """Parse the line-oriented PON format.

    Raises PonParseError (with line number) for malformed input and
    StructureError when the parsed graph is not a valid PON tree.
    """

    def parse_id(token: str, lineno: int) -> int:
        if not token.isdigit():
            raise PonParseError(f"expected a non-negative integer id, got {token!r}", lineno)
        return int(token)

    nodes: list[tuple[int, NodeKind]] = []
    edges: list[tuple[int, int]] = []
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not seen_header:
            if line != _FORMAT_HEADER:
                raise PonParseError(f"expected header {_FORMAT_HEADER!r}", lineno)
            seen_header = True
            continue
        fields = line.split()
        if fields[0] == "node":
            if len(fields) != 3:
                raise PonParseError("node lines are 'node <id> <kind>'", lineno)
            kind = _TOKEN_KINDS.get(fields[2])
            if kind is None:
                raise PonParseError(f"unknown node kind {fields[2]!r}", lineno)
            nodes.append((parse_id(fields[1], lineno), kind))
        elif fields[0] == "edge":
            if len(fields) != 3:
                raise PonParseError("edge lines are 'edge <parent-id> <child-id>'", lineno)
            edges.append((parse_id(fields[1], lineno), parse_id(fields[2], lineno)))
        else:
            raise PonParseError(f"unknown directive {fields[0]!r}", lineno)
    if not seen_header:
        raise PonParseError("empty input; expected header 'pon 1'", 1)
    return PonGraph.from_nodes_edges(nodes, edges)

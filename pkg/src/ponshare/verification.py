"""Brute-force oracles for certifying the fast path on small instances.

Everything here is reimplemented from scratch against the id-level
PonGraph accessors: no split-vertex graph, no shared search or
allocation code. Paths are enumerated by walking the raw tree with an
explicit direction state, which is a different mechanism than the
split-vertex search the main modules use; allocation is replayed with
dictionary bookkeeping. Agreement between the two stacks is what the
equivalence checks certify.

Exponential enumeration is intentional and bounded: these oracles are
for desk-scale certification only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ._rng import mix64
from .topology import NodeKind, PonGraph, is_onu

_MAX_PATH_NODES = 30
_MAX_REPLAY_ONUS = 50

HopSpec = tuple[tuple[int, int], str]  # ((parent_id, child_id), "down" | "up")


class OracleSizeError(ValueError):
    """Instance exceeds the size bound of the brute-force search."""


def _maps(pon: PonGraph):
    children: dict[int, list[int]] = {node_id: [] for node_id, _ in pon.nodes()}
    parent: dict[int, int] = {}
    for parent_id, child_id in pon.edges():
        children[parent_id].append(child_id)
        parent[child_id] = parent_id
    for kids in children.values():
        kids.sort()
    return children, parent


def _kind_map(pon: PonGraph) -> dict[int, NodeKind]:
    return {node_id: kind for node_id, kind in pon.nodes()}


def enumerate_paths(pon: PonGraph, source_id: int) -> dict[int, list[tuple[HopSpec, ...]]]:
    """Every valid directed simple path from a service source to each ONU.

    Valid means: directions follow the (up)*(down)* pattern, the turn
    from up to down happens only at an active RN, a search from an ONU
    treats the OLT as a dead end, and no path relays through an ONU.
    Paths to the source itself are not service paths and are skipped.
    """
    if pon.n_nodes > _MAX_PATH_NODES:
        raise OracleSizeError(
            f"path enumeration is bounded to {_MAX_PATH_NODES} nodes, got {pon.n_nodes}"
        )
    kinds = _kind_map(pon)
    src_kind = kinds[source_id]
    if src_kind not in (NodeKind.OLT, NodeKind.IC_ONU):
        raise ValueError("paths start at the OLT or an IC ONU")
    children, parent = _maps(pon)
    found: dict[int, list[tuple[HopSpec, ...]]] = {}

    def descend(node: int, prefix: list[HopSpec]) -> None:
        for child in children[node]:
            hop: HopSpec = ((node, child), "down")
            if is_onu(kinds[child]):
                if child != source_id:
                    found.setdefault(child, []).append(tuple(prefix + [hop]))
                continue  # ONUs never relay
            descend(child, prefix + [hop])

    if src_kind == NodeKind.OLT:
        descend(source_id, [])
        return found

    # climb from the ONU; every active RN passed is a possible turn
    climb: list[HopSpec] = []
    node = source_id
    while node in parent:
        up = parent[node]
        climb.append(((up, node), "up"))
        node = up
        if kinds[node] == NodeKind.OLT:
            break  # dead end for ONU-sourced searches: no turning at the head end
        if kinds[node] == NodeKind.ACTIVE_RN:
            descend(node, list(climb))
    return found


def minimal_hop_counts(pon: PonGraph, source_id: int) -> dict[int, int]:
    """Fewest hops per reachable ONU, derived from full enumeration."""
    return {
        target: min(len(p) for p in paths)
        for target, paths in enumerate_paths(pon, source_id).items()
    }


def _self_feed_usable(pon: PonGraph, onu_id: int) -> bool:
    # the external feed reaches the tree only via an active RN above
    kinds = _kind_map(pon)
    _, parent = _maps(pon)
    node = onu_id
    while node in parent:
        node = parent[node]
        if kinds[node] == NodeKind.ACTIVE_RN:
            return True
    return False


@dataclass(frozen=True)
class ReplayResult:
    """Naive replay outcome: the mean ratio plus the full grant ledger.

    Ledger rows are (onu_id, source_id, amount); source_id equal to the
    ONU's own id marks the zero-hop self grant.
    """

    performance: float
    ledger: tuple[tuple[int, int, float], ...]
    granted: dict[int, float]


def replay_allocation(pon: PonGraph, load: float, cfg) -> ReplayResult:
    """Literal re-run of the greedy allocation with dict bookkeeping."""
    kinds = _kind_map(pon)
    onus = sorted(i for i, k in kinds.items() if is_onu(k))
    if len(onus) > _MAX_REPLAY_ONUS:
        raise OracleSizeError(
            f"allocation replay is bounded to {_MAX_REPLAY_ONUS} ONUs, got {len(onus)}"
        )
    if not onus:
        raise ValueError("PON has no ONUs")
    olt = pon.olt_id
    demand = cfg.c_down * load / len(onus)

    # alternatives per ONU: (hops, tie-break id, source, path)
    alts: dict[int, list[tuple[int, int, int, tuple[HopSpec, ...]]]] = {o: [] for o in onus}
    sources = [olt] + sorted(i for i, k in kinds.items() if k == NodeKind.IC_ONU)
    for src in sources:
        for target, paths in enumerate_paths(pon, src).items():
            best = min(len(p) for p in paths)
            shortest = [p for p in paths if len(p) == best]
            assert len(shortest) == 1, "tree shortest paths must be unique"
            alts[target].append((best, src, src, shortest[0]))
    for onu in onus:
        if kinds[onu] == NodeKind.IC_ONU and _self_feed_usable(pon, onu):
            alts[onu].append((0, onu, onu, ()))
    for onu in onus:
        alts[onu].sort(key=lambda a: (a[0], a[1]))

    edge_res: dict[tuple[tuple[int, int], str], float] = {}
    for edge in pon.edges():
        edge_res[(edge, "down")] = float(cfg.c_down)
        edge_res[(edge, "up")] = float(cfg.c_up)
    ingress = {i: float(cfg.c_ic) for i, k in kinds.items() if k == NodeKind.IC_ONU}

    ledger: list[tuple[int, int, float]] = []
    granted: dict[int, float] = {}
    for onu in sorted(onus, key=lambda o: (len(alts[o]), o)):
        remaining = demand
        got = 0.0
        for hops, _, source, path in alts[onu]:
            if remaining <= 0.0:
                break
            bottleneck = remaining
            for hop in path:
                bottleneck = min(bottleneck, edge_res[hop])
            if source != olt:
                bottleneck = min(bottleneck, ingress[source])
            if bottleneck > 0.0:
                for hop in path:
                    edge_res[hop] -= bottleneck
                if source != olt:
                    ingress[source] -= bottleneck
                got += bottleneck
                remaining -= bottleneck
                ledger.append((onu, source, bottleneck))
        granted[onu] = got

    ratios = [granted[o] / demand if demand > 0 else 1.0 for o in onus]
    return ReplayResult(
        performance=sum(ratios) / len(ratios),
        ledger=tuple(ledger),
        granted=granted,
    )


# -- equivalence driver -----------------------------------------------------


@dataclass(frozen=True)
class OracleCheckReport:
    instances: int
    mismatches: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.mismatches


def _random_small_pon(seed: int):
    # deterministic rotation through small-generator parameters
    from .topology import FixedStages, GenParams, RandomActive, generate_pon

    g_options = (2, 3)
    s_options = (0.0, 0.2, 0.4, 0.6)
    r_options = (0.0, 0.3, 0.7, 1.0)
    policies = (
        FixedStages(),
        FixedStages(frozenset((1, 3))),
        RandomActive(q=0.0),
        RandomActive(q=0.4),
        RandomActive(q=1.0),
    )
    for attempt in range(1000):
        pick = mix64(seed, attempt)
        params = GenParams(
            g=g_options[pick % len(g_options)],
            s=s_options[(pick >> 8) % len(s_options)],
            rn_policy=policies[(pick >> 16) % len(policies)],
            ic_prob=r_options[(pick >> 24) % len(r_options)],
            seed=mix64(seed, attempt, 99),
        )
        pon = generate_pon(params)
        if pon.n_nodes <= _MAX_PATH_NODES:
            return pon
    raise RuntimeError("could not draw a small PON")


def oracle_check(
    instances: int = 1000,
    seed: int = 0,
    loads: tuple[float, ...] = (1.0, 1.4, 2.0),
    tolerance: float = 1e-9,
) -> OracleCheckReport:
    """Certify the fast path against the oracles on random small PONs.

    Compares, per instance: the reachable (source, ONU) pairs and their
    minimal hop counts, the presence of zero-hop self alternatives, and
    the performance figure of a full evaluation.
    """
    from .allocation import CapacityConfig, calculate_performance
    from .pathing import find_alternatives

    cfg = CapacityConfig()
    mismatches: list[str] = []
    for i in range(instances):
        pon = _random_small_pon(mix64(seed, i))
        fast = find_alternatives(pon)
        kinds = _kind_map(pon)
        sources = [pon.olt_id] + sorted(
            n for n, k in kinds.items() if k == NodeKind.IC_ONU
        )
        expected: dict[int, dict[int, int]] = {s: minimal_hop_counts(pon, s) for s in sources}
        for onu, alts in fast.items():
            got_pairs = {
                (a.source, a.hop_count) for a in alts if not a.is_self
            }
            want_pairs = {
                (s, table[onu]) for s, table in expected.items() if onu in table
            }
            if got_pairs != want_pairs:
                mismatches.append(
                    f"instance {i}: ONU {onu} alternatives {sorted(got_pairs)} "
                    f"!= oracle {sorted(want_pairs)}"
                )
            has_self = any(a.is_self for a in alts)
            want_self = kinds[onu] == NodeKind.IC_ONU and _self_feed_usable(pon, onu)
            if has_self != want_self:
                mismatches.append(
                    f"instance {i}: ONU {onu} self alternative {has_self} != {want_self}"
                )
        load = loads[i % len(loads)]
        fast_perf = calculate_performance(pon, load, cfg).performance
        slow_perf = replay_allocation(pon, load, cfg).performance
        if not math.isclose(fast_perf, slow_perf, rel_tol=0.0, abs_tol=tolerance):
            mismatches.append(
                f"instance {i}: performance {fast_perf!r} != replay {slow_perf!r} "
                f"(load {load})"
            )
        if len(mismatches) > 20:
            break
    return OracleCheckReport(instances=instances, mismatches=tuple(mismatches))

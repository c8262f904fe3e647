"""Greedy downstream bitrate allocation and the performance figure.

The evaluation starts from an unloaded tree and tries to grant every
ONU its requested downstream bitrate. ONUs are served in order of
increasing alternative count (fewer options first, ties by ascending
node id). Each ONU walks its alternatives shortest-first; a grant is
the bottleneck minimum over the residual capacity of every hop, plus
the source's external-ingress residual for IC-sourced grants, and
leftover demand carries over to the next alternative. The resulting
per-ONU granted/requested ratios average into the performance figure,
an upper bound in the sense that bitrate granted through an IC ONU is
counted without asking whether the neighbouring network would accept
the diverted traffic.

Capacities are directional: every fiber offers the full downstream
rate to leaf-ward flows and the full upstream rate to climbing flows;
the tree's own upstream traffic is not modelled, so diverted traffic
competes only with other diverted traffic for upstream capacity.
Remote nodes themselves impose no capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .pathing import (
    AccessArrays,
    Alternative,
    Direction,
    build_access_arrays,
    compute_alternatives,
)
from .topology import NodeKind, PonGraph, StructureError, is_onu


@dataclass(frozen=True)
class CapacityConfig:
    """Link rates in Gb/s: downstream and upstream per fiber, plus the
    per-IC-ONU external ingress rate."""

    c_down: float = 10.0
    c_up: float = 2.5
    c_ic: float = 2.5

    def __post_init__(self):
        for name in ("c_down", "c_up", "c_ic"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class DemandProfile:
    """Requested downstream bitrate per ONU.

    Either a single uniform rate or an explicit per-ONU mapping. The
    uniform constructor implements b = c * load / n_onus.
    """

    rate: float | None = None
    per_onu: Mapping[int, float] | None = None

    def __post_init__(self):
        if (self.rate is None) == (self.per_onu is None):
            raise ValueError("specify exactly one of rate or per_onu")
        if self.rate is not None and (not math.isfinite(self.rate) or self.rate < 0):
            raise ValueError("demand rate must be finite and >= 0")
        if self.per_onu is not None:
            bad = [k for k, v in self.per_onu.items() if not math.isfinite(v) or v < 0]
            if bad:
                raise ValueError(f"negative or non-finite demand for ONUs {bad}")

    @classmethod
    def uniform(cls, capacity: float, load: float, n_onus: int) -> "DemandProfile":
        if n_onus <= 0:
            raise ValueError("n_onus must be positive")
        return cls(rate=capacity * load / n_onus)

    @classmethod
    def explicit(cls, per_onu: Mapping[int, float]) -> "DemandProfile":
        return cls(per_onu=dict(per_onu))

    def vector_for(self, pon: PonGraph) -> np.ndarray:
        onu_ids = pon.onu_ids
        if self.rate is not None:
            return np.full(onu_ids.size, float(self.rate))
        given = set(self.per_onu)
        expected = {int(i) for i in onu_ids}
        if given != expected:
            raise StructureError(
                "demand profile ONU ids do not match the PON "
                f"(missing {sorted(expected - given)[:5]}, "
                f"unknown {sorted(given - expected)[:5]})"
            )
        return np.array([float(self.per_onu[int(i)]) for i in onu_ids])


class ResidualState:
    """Remaining per-direction fiber capacity and per-IC-ONU ingress.

    Residuals only ever decrease during one evaluation; they are
    created from a CapacityConfig and mutated by grants.
    """

    def __init__(self, pon: PonGraph, cfg: CapacityConfig, arrays: AccessArrays | None = None):
        self.pon = pon
        self.arrays = arrays if arrays is not None else build_access_arrays(pon)
        self.down = np.full(self.arrays.n_fibers, float(cfg.c_down))
        self.up = np.full(self.arrays.n_fibers, float(cfg.c_up))
        self.ingress = np.zeros(pon.n_nodes)
        self.ingress[pon.kinds == NodeKind.IC_ONU] = float(cfg.c_ic)

    def _fiber_index(self, edge: tuple[int, int]) -> int:
        parent_id, child_id = edge
        child_pos = self.pon.pos_of(child_id)
        f = int(self.arrays.fiber_of[child_pos])
        if f < 0 or int(self.pon.ids[self.arrays.fiber_parent[f]]) != parent_id:
            raise KeyError(f"no fiber {edge}")
        return f

    def residual(self, edge: tuple[int, int], direction: Direction) -> float:
        f = self._fiber_index(edge)
        return float(self.down[f] if direction is Direction.DOWN else self.up[f])

    def ingress_residual(self, onu_id: int) -> float:
        return float(self.ingress[self.pon.pos_of(onu_id)])


def grant_db(
    state: ResidualState,
    onu_id: int,
    demand: float,
    alternatives: Sequence[Alternative],
) -> float:
    """Grant up to ``demand`` to one ONU along its sorted alternatives.

    Alternatives must come sorted by ascending hop count (the order
    find_alternatives produces). Returns the total granted bitrate in
    [0, demand]; zero is a valid outcome. Touched residuals in
    ``state`` are decremented in place.
    """
    if demand < 0:
        raise ValueError("demand must be >= 0")
    hop_counts = [a.hop_count for a in alternatives]
    if hop_counts != sorted(hop_counts):
        raise ValueError("alternatives must be sorted by ascending hop count")
    pon = state.pon
    if not is_onu(pon.kind_of(onu_id)):
        raise ValueError(f"node {onu_id} is not an ONU")

    remaining = float(demand)
    got = 0.0
    for alt in alternatives:
        if remaining <= 0.0:
            break
        fibers = np.empty(alt.hop_count, dtype=np.int32)
        dirs = np.empty(alt.hop_count, dtype=np.uint8)
        for t, (edge, direction) in enumerate(alt.hops):
            fibers[t] = state._fiber_index(edge)
            dirs[t] = 0 if direction is Direction.DOWN else 1
        src_kind = pon.kind_of(alt.source)
        if src_kind == NodeKind.IC_ONU:
            ingress_pos = pon.pos_of(alt.source)
        elif src_kind == NodeKind.OLT:
            ingress_pos = -1
        else:
            raise ValueError(f"alternative source {alt.source} is neither OLT nor IC ONU")
        amt = _kernels.grant_fibers(
            fibers,
            dirs,
            alt.hop_count,
            state.down,
            state.up,
            state.ingress,
            ingress_pos,
            remaining,
        )
        got += amt
        remaining -= amt
    return got


@dataclass(frozen=True)
class PerformanceReport:
    """Outcome of one evaluation: per-ONU grants and the mean ratio."""

    load: float
    n_onus: int
    onu_ids: np.ndarray
    requested: np.ndarray
    granted: np.ndarray
    ratios: np.ndarray
    performance: float
    trace: tuple[tuple[int, int, float], ...] | None = None

    def ratio_of(self, onu_id: int) -> float:
        idx = int(np.searchsorted(self.onu_ids, onu_id))
        if idx >= self.onu_ids.size or self.onu_ids[idx] != onu_id:
            raise KeyError(f"no ONU with id {onu_id}")
        return float(self.ratios[idx])


def calculate_performance(
    pon: PonGraph,
    load: float,
    cfg: CapacityConfig = CapacityConfig(),
    demands: DemandProfile | None = None,
    include_ic: bool = True,
    record_trace: bool = False,
) -> PerformanceReport:
    """Evaluate the downstream performance of one PON under a load.

    ``demands`` defaults to the uniform profile b = c_down * load / N.
    ``include_ic=False`` ignores every IC alternative (the no-sharing
    reference), in which case the result is exactly min(1, 1/load) for
    uniform demand. ``record_trace`` attaches the grant ledger as
    (onu_id, source_id, amount) rows, source_id == onu_id meaning the
    zero-hop self grant.
    """
    if load < 0 or not math.isfinite(load):
        raise ValueError("load must be finite and >= 0")
    n_onus = pon.num_onus
    if n_onus == 0:
        raise StructureError("PON has no ONUs to serve")
    if demands is None:
        demands = DemandProfile.uniform(cfg.c_down, load, n_onus)
    demand_vec = demands.vector_for(pon)

    arrays = build_access_arrays(pon)
    table = compute_alternatives(pon, arrays, include_ic=include_ic)

    counts = np.diff(table.alt_start)
    order = np.argsort(counts, kind="stable").astype(np.int32)

    resid_down = np.full(arrays.n_fibers, float(cfg.c_down))
    resid_up = np.full(arrays.n_fibers, float(cfg.c_up))
    resid_ingress = np.zeros(arrays.n_nodes)
    resid_ingress[pon.kinds == NodeKind.IC_ONU] = float(cfg.c_ic)

    granted = np.zeros(n_onus)
    total_alts = int(table.alt_start[-1])
    cap = max(total_alts, 1)
    trace_onu = np.empty(cap if record_trace else 1, dtype=np.int32)
    trace_rank = np.empty(cap if record_trace else 1, dtype=np.int32)
    trace_amt = np.empty(cap if record_trace else 1, dtype=np.float64)
    n_trace = _kernels.allocate(
        order,
        demand_vec,
        table.alt_start,
        table.alt_rank,
        table.alt_hops,
        table.sources.verts,
        table.sources.pos,
        arrays.onu_vertex,
        table.parc,
        arrays.arc_from,
        arrays.arc_fiber,
        arrays.arc_dir,
        resid_down,
        resid_up,
        resid_ingress,
        granted,
        trace_onu,
        trace_rank,
        trace_amt,
        record_trace,
    )

    positive = demand_vec > 0.0
    ratios = np.where(positive, granted / np.where(positive, demand_vec, 1.0), 1.0)
    trace = None
    if record_trace:
        onu_ids = pon.ids[arrays.onu_pos]
        src_ids = pon.ids[table.sources.pos]
        trace = tuple(
            (int(onu_ids[trace_onu[t]]), int(src_ids[trace_rank[t]]), float(trace_amt[t]))
            for t in range(n_trace)
        )
    return PerformanceReport(
        load=float(load),
        n_onus=n_onus,
        onu_ids=pon.ids[arrays.onu_pos].copy(),
        requested=demand_vec,
        granted=granted,
        ratios=ratios,
        performance=float(np.mean(ratios)),
        trace=trace,
    )

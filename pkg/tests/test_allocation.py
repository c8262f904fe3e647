import numpy as np
import pytest

from ponshare import (
    CapacityConfig,
    DemandProfile,
    Direction,
    FixedStages,
    GenParams,
    RandomActive,
    ResidualState,
    StructureError,
    calculate_performance,
    find_alternatives,
    generate_pon,
    grant_db,
)
from ponshare._rng import mix64
from ponshare.verification import replay_allocation


def random_pon(seed: int, ic: float = 0.0):
    policy = RandomActive(q=(seed % 4) / 3.0) if seed % 2 else FixedStages()
    return generate_pon(
        GenParams(g=2 + seed % 3, s=0.1 + (seed % 5) / 10.0, rn_policy=policy,
                  ic_prob=ic, seed=mix64(31337, seed))
    )


class TestGrantDb:
    def test_single_bottleneck(self, toy3):
        state = ResidualState(toy3, CapacityConfig(c_down=10.0, c_up=2.5, c_ic=2.5))
        alts = find_alternatives(toy3)
        olt_alt = [a for a in alts[3] if a.source == 0]
        assert grant_db(state, 3, 4.0, olt_alt) == pytest.approx(4.0, abs=1e-12)
        assert state.residual((0, 1), Direction.DOWN) == pytest.approx(6.0, abs=1e-12)
        assert state.residual((1, 3), Direction.DOWN) == pytest.approx(6.0, abs=1e-12)
        assert state.residual((0, 1), Direction.UP) == 2.5

    def test_demand_split_across_two_alternatives(self, toy3):
        state = ResidualState(toy3, CapacityConfig(c_down=10.0, c_up=10.0, c_ic=2.5))
        alts = find_alternatives(toy3)
        olt_alt = [a for a in alts[4] if a.source == 0]
        grant_db(state, 4, 7.0, olt_alt)  # drain the feeder to residual 3
        assert state.residual((0, 1), Direction.DOWN) == pytest.approx(3.0)

        got = grant_db(state, 3, 4.0, alts[3])
        # first 3 along the head-end path, the last 1 capped by the ingress
        assert got == pytest.approx(4.0, abs=1e-12)
        assert state.residual((0, 1), Direction.DOWN) == pytest.approx(0.0, abs=1e-12)
        assert state.ingress_residual(2) == pytest.approx(1.5, abs=1e-12)
        assert state.residual((1, 2), Direction.UP) == pytest.approx(9.0, abs=1e-12)
        assert state.residual((1, 3), Direction.DOWN) == pytest.approx(6.0, abs=1e-12)

    def test_exhausted_alternatives_grant_zero(self, toy3):
        state = ResidualState(toy3, CapacityConfig(c_down=10.0, c_up=2.5, c_ic=2.5))
        alts = find_alternatives(toy3)
        grant_db(state, 3, 10.0, [a for a in alts[3] if a.source == 0])
        assert grant_db(state, 4, 5.0, [a for a in alts[4] if a.source == 0]) == 0.0

    def test_rejects_unsorted_alternatives(self, relay_chain):
        state = ResidualState(relay_chain, CapacityConfig())
        alts = list(reversed(find_alternatives(relay_chain)[5]))  # hops 5 then 4
        with pytest.raises(ValueError):
            grant_db(state, 5, 1.0, alts)

    def test_rejects_negative_demand(self, toy3):
        state = ResidualState(toy3, CapacityConfig())
        with pytest.raises(ValueError):
            grant_db(state, 3, -1.0, [])


class TestCalculatePerformance:
    @pytest.mark.parametrize("load", [1.0 + k / 10 for k in range(11)])
    def test_no_sharing_is_inverse_load(self, load):
        for seed in range(4):
            pon = random_pon(seed, ic=0.0)
            report = calculate_performance(pon, load)
            assert report.performance == pytest.approx(1.0 / load, abs=1e-9)

    def test_full_load_is_fully_served(self):
        pon = random_pon(3, ic=0.4)
        assert calculate_performance(pon, 1.0).performance == pytest.approx(1.0, abs=1e-9)

    def test_toy3_hand_replay(self, toy3):
        # n=3, b=20/3; ONU 2 takes 2.5 from its ingress then 25/6 from the
        # head end; ONU 3 gets the remaining 35/6 of the feeder; ONU 4 gets
        # nothing: p = (1 + 0.875 + 0) / 3
        report = calculate_performance(toy3, 2.0, record_trace=True)
        assert report.performance == pytest.approx(0.625, abs=1e-9)
        assert report.ratio_of(2) == pytest.approx(1.0, abs=1e-12)
        assert report.ratio_of(3) == pytest.approx(0.875, abs=1e-12)
        assert report.ratio_of(4) == 0.0
        replay = replay_allocation(toy3, 2.0, CapacityConfig())
        assert report.performance == pytest.approx(replay.performance, abs=1e-9)
        assert report.trace == replay.ledger

    def test_relay_chain_matches_oracle(self, relay_chain):
        report = calculate_performance(relay_chain, 2.0, record_trace=True)
        replay = replay_allocation(relay_chain, 2.0, CapacityConfig())
        assert report.performance == pytest.approx(replay.performance, abs=1e-9)
        assert report.trace == replay.ledger

    @pytest.mark.parametrize("seed", range(6))
    def test_sharing_disabled_equals_inverse_load(self, seed):
        pon = random_pon(seed, ic=0.6)
        for load in (0.5, 1.0, 1.3, 2.0):
            report = calculate_performance(pon, load, include_ic=False)
            assert report.performance == pytest.approx(min(1.0, 1.0 / load), abs=1e-9)

    @pytest.mark.parametrize("seed", range(6))
    def test_zero_ingress_reduces_to_no_sharing(self, seed):
        pon = random_pon(seed, ic=0.6)
        cfg = CapacityConfig(c_ic=0.0)
        with_ic = calculate_performance(pon, 2.0, cfg)
        without = calculate_performance(pon, 2.0, cfg, include_ic=False)
        assert with_ic.performance == pytest.approx(without.performance, abs=1e-9)

    def test_zero_capacity_gives_zero_performance(self, toy3):
        cfg = CapacityConfig(c_down=0.0, c_up=0.0, c_ic=0.0)
        demands = DemandProfile.uniform(10.0, 2.0, toy3.num_onus)
        assert calculate_performance(toy3, 2.0, cfg, demands).performance == 0.0

    def test_pure_function_of_inputs(self, relay_chain):
        a = calculate_performance(relay_chain, 1.7)
        b = calculate_performance(relay_chain, 1.7)
        assert a.performance == b.performance
        assert np.array_equal(a.granted, b.granted)

    @pytest.mark.parametrize("seed", range(8))
    def test_composition_with_grant_db_agrees(self, seed):
        # serving by hand through grant_db in the documented order must
        # reproduce calculate_performance exactly
        pon = random_pon(seed, ic=0.5)
        cfg = CapacityConfig()
        load = 1.0 + (seed % 4) / 3.0
        demand = cfg.c_down * load / pon.num_onus
        alts = find_alternatives(pon)
        state = ResidualState(pon, cfg)
        order = sorted(alts, key=lambda onu: (len(alts[onu]), onu))
        granted = {onu: grant_db(state, onu, demand, alts[onu]) for onu in order}
        mean = sum(g / demand for g in granted.values()) / len(granted)
        report = calculate_performance(pon, load, cfg)
        assert mean == pytest.approx(report.performance, abs=1e-12)
        assert state.down.min() >= 0.0
        assert state.up.min() >= 0.0
        assert state.ingress.min() >= 0.0
        assert sum(granted.values()) <= pon.num_onus * demand + 1e-9

    def test_non_uniform_demand_profile(self, toy3):
        demands = DemandProfile.explicit({2: 1.0, 3: 2.0, 4: 0.0})
        report = calculate_performance(toy3, 2.0, demands=demands)
        assert report.ratio_of(2) == pytest.approx(1.0)
        assert report.ratio_of(3) == pytest.approx(1.0)
        assert report.ratio_of(4) == 1.0  # zero demand counts as fully served

    def test_demand_mismatch_is_structural(self, toy3):
        with pytest.raises(StructureError):
            calculate_performance(
                toy3, 2.0, demands=DemandProfile.explicit({2: 1.0, 3: 1.0})
            )

    def test_invalid_inputs(self, toy3):
        with pytest.raises(ValueError):
            calculate_performance(toy3, -1.0)
        with pytest.raises(ValueError):
            CapacityConfig(c_down=-1.0)
        with pytest.raises(ValueError):
            DemandProfile(rate=1.0, per_onu={1: 1.0})
        with pytest.raises(ValueError):
            DemandProfile(rate=None, per_onu=None)

"""Acceptance suite: one test per release criterion, at fixed tolerances.

Each test prints a single `[acceptance] criterion N: PASS/FAIL` line
(visible with `pytest -s` or in captured output on failure) before
asserting, so a full run yields a criterion-by-criterion report.

Criterion 6 is known to be unattainable together with criterion 2 for
samples that contain no active node at all; see the project notes. It
is asserted here exactly as stated rather than weakened.
"""

import math
import os
import subprocess
import sys

import numpy as np
import pytest

from ponshare import (
    CapacityConfig,
    FixedStages,
    GenParams,
    ScenarioConfig,
    calculate_performance,
    find_alternatives,
    generate_pon,
    population_seed,
    run_scenario,
)
from ponshare._rng import mix64
from ponshare.verification import enumerate_paths, oracle_check

from conftest import build_relay_chain

SEED = 1902
CFG = CapacityConfig()


def report(criterion: int, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance] criterion {criterion}: {status} - {detail}")


def test_criterion_1_no_sharing_baseline_exact():
    loads = [1.0 + k / 10 for k in range(11)]
    worst = 0.0
    for i in range(100):
        g = 4 if i < 50 else 8
        pon = generate_pon(GenParams(g=g, s=0.3, ic_prob=0.0, seed=mix64(SEED, 1, i)))
        for load in loads:
            p = calculate_performance(pon, load, CFG).performance
            worst = max(worst, abs(p - 1.0 / load))
    ok = worst <= 1e-9
    report(1, ok, f"100 PONs x 11 loads, max |p - 1/l| = {worst:.2e}")
    assert ok


def test_criterion_2_scenario2_zero_active_baseline():
    config = ScenarioConfig(
        scenario=2,
        g=8,
        q_values=(0.0,),
        r_values=(0.0, 0.003, 0.1, 0.5, 1.0),
        sample_size=50,
        master_seed=SEED,
    )
    result = run_scenario(config)
    worst = max(abs(pt.stats.mean - 0.5) for pt in result.points)
    ok = worst <= 1e-9
    report(2, ok, f"q=0 means across r grid, max |mean - 0.5| = {worst:.2e}")
    assert ok


def test_criterion_3_relay_fixture_path_correctness():
    pon = build_relay_chain()
    paths = enumerate_paths(pon, 4)[5]
    lengths = sorted(len(p) for p in paths)
    no_wrong_path = all(length != 3 for length in lengths)
    best = min(paths, key=len)
    turns_at_active = ((1, 2), "up") in best and ((1, 2), "down") in best

    alts = [a for a in find_alternatives(pon)[5] if a.source == 4]
    fast_ok = (
        len(alts) == 1
        and alts[0].hop_count == 5
        and any(edge == (1, 2) and d.value == "up" for edge, d in alts[0].hops)
    )
    ok = len(best) == 5 and no_wrong_path and turns_at_active and fast_ok
    report(
        3,
        ok,
        f"minimal oracle path {len(best)} hops via the active node, "
        f"3-hop passive turn absent ({no_wrong_path}), fast path agrees ({fast_ok})",
    )
    assert ok


def test_criterion_4_oracle_equivalence_thousand_instances():
    result = oracle_check(instances=1000, seed=SEED)
    report(
        4,
        result.ok,
        f"{result.instances} small PONs, {len(result.mismatches)} mismatches",
    )
    assert result.ok, result.mismatches[:5]


def test_criterion_5_generator_statistics():
    n_draws = 10_000
    totals = np.zeros(2)
    for k in range(n_draws):
        pon = generate_pon(GenParams(g=32, s=0.3, seed=mix64(SEED, 5, k)))
        totals += (pon.num_onus, pon.num_rns)
    mean_onus, mean_rns = totals / n_draws
    err_onus = abs(mean_onus - 3187) / 3187
    err_rns = abs(mean_rns - 103) / 103
    ok = err_onus < 0.02 and err_rns < 0.02
    report(
        5,
        ok,
        f"mean N = {mean_onus:.1f} ({err_onus:.2%} from 3187), "
        f"mean R = {mean_rns:.2f} ({err_rns:.2%} from 103)",
    )
    assert ok


def test_criterion_6_saturation_every_sample_exact():
    # r=1 with the ingress covering the per-ONU demand: asserted exactly
    # as stated, for every sample. Samples without any active RN cannot
    # accept external traffic at all and stay at the no-sharing value,
    # so this criterion conflicts with criterion 2; see decisions notes.
    pop_seed = population_seed(SEED, 1, 1.0, 2.0)
    values = []
    for k in range(50):
        pon = generate_pon(
            GenParams(g=8, s=0.3, rn_policy=FixedStages(), ic_prob=1.0,
                      seed=mix64(pop_seed, k, 0))
        )
        values.append(calculate_performance(pon, 2.0, CFG).performance)
    off = [v for v in values if v != 1.0]
    ok = not off
    report(
        6,
        ok,
        f"{50 - len(off)}/50 samples at p = 1 exactly"
        + ("" if ok else f"; {len(off)} active-RN-free samples at {sorted(set(off))}"),
    )
    assert ok, (
        f"{len(off)} of 50 samples have no active RN anywhere, leaving their "
        "ONUs the head-end alternative only (p = 0.5); exact saturation for "
        "every sample is incompatible with the zero-active baseline of "
        "criterion 2 under any single model"
    )


def test_criterion_7_desk_scale_shape():
    # 300-sample batches; the most PON-to-PON-variable populations of
    # this small-fanout sweep need the runner's adaptive extension (its
    # documented mechanism for meeting the rse target) to get every
    # point under 1%
    r_grid = (0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0)
    config = ScenarioConfig(
        scenario=1,
        g=8,
        r_values=r_grid,
        l_values=(2.0,),
        sample_size=300,
        rse_target=0.01,
        adaptive=True,
        master_seed=SEED,
    )
    points = run_scenario(config).points
    means = [pt.stats.mean for pt in points]
    errs = [pt.stats.stderr for pt in points]
    rses = [pt.stats.rse for pt in points]

    starts_at_half = abs(means[0] - 0.5) <= 1e-9
    monotone = all(
        means[i + 1] >= means[i] - 2.0 * math.hypot(errs[i], errs[i + 1])
        for i in range(len(means) - 1)
    )
    reaches = all(m >= 0.95 for r, m in zip(r_grid, means) if r >= 0.5)
    rse_ok = all(x < 0.01 for x in rses)
    ok = starts_at_half and monotone and reaches and rse_ok
    report(
        7,
        ok,
        f"means {['%.4f' % m for m in means]}, "
        f"samples {[pt.stats.n for pt in points]}, max rse {max(rses):.4f}; "
        f"start@0.5 {starts_at_half}, monotone {monotone}, >=0.95 by r=0.5 {reaches}",
    )
    assert ok


@pytest.mark.extended
def test_criterion_8_full_scale_headline():
    config = ScenarioConfig(
        scenario=1,
        g=32,
        r_values=(0.003,),
        l_values=(2.0,),
        sample_size=300,
        master_seed=SEED,
    )
    mean = run_scenario(config).points[0].stats.mean
    ok = mean >= 0.9
    report(8, ok, f"g=32, r=0.003, l=2: mean p = {mean:.4f} (>= 0.9 required)")
    assert ok


def test_criterion_9_thread_determinism(tmp_path):
    outputs = []
    for threads in ("1", "8"):
        out = tmp_path / f"det{threads}.dat"
        proc = subprocess.run(
            [
                sys.executable, "-m", "ponshare.cli", "scenario1",
                "--r-grid", "0,0.05,0.5", "--l-grid", "1.5,2",
                "--samples", "20", "--g", "8", "--seed", str(SEED),
                "--threads", threads, "-o", str(out),
            ],
            capture_output=True,
            text=True,
            env=dict(os.environ),
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append(out.read_bytes())
    ok = outputs[0] == outputs[1]
    report(9, ok, f"surface files at threads 1 vs 8: {'identical' if ok else 'DIFFER'}")
    assert ok

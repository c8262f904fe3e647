"""Population sampling, the two evaluation scenarios, and statistics.

A population is the distribution of random PONs at one grid point. Its
performance is estimated from a sample (300 PONs by default) whose
mean, standard error and relative standard error are reported per
point.

Scenario 1 fixes active RNs at stage 2 and sweeps (r, l): the IC
probability against the offered load. Scenario 2 fixes the load at
l = 2 and sweeps (r, q), with each RN independently active with
probability q.

Determinism contract: the per-replicate seed is
``mix64(population_seed, replicate, retry)`` and the population seed is
``mix64(master_seed, scenario, bits(r), bits(second coordinate))``, so
every sampled PON depends only on the coordinates of what is being
sampled. Results are therefore identical for any thread budget and any
evaluation order, and the runner's reduce step aggregates in replicate
order so emitted files are byte-stable.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._rng import float_bits, mix64
from .allocation import CapacityConfig, calculate_performance
from .topology import FixedStages, GenParams, RandomActive, RnPolicy, generate_pon

# Ten IC probabilities per decade (decade boundaries appear in two
# decades, giving 31 grid entries with r=0); 0.01 and 0.1 repeat as
# identical floats, and identical coordinates seed identically, so the
# duplicate populations reproduce byte-identically.
DEFAULT_R_GRID: tuple[float, ...] = (
    (0.0,)
    + tuple(k / 1000 for k in range(1, 11))
    + tuple(k / 100 for k in range(1, 11))
    + tuple(k / 10 for k in range(1, 11))
)
DEFAULT_L_GRID: tuple[float, ...] = tuple(1.0 + k / 10 for k in range(11))
DEFAULT_Q_GRID: tuple[float, ...] = tuple(k / 10 for k in range(11))

_MAX_REGEN_RETRIES = 64


@dataclass(frozen=True)
class SampleStats:
    """Sample mean with spread: sd uses ddof=1, stderr = sd / sqrt(n),
    rse = stderr / mean. A zero-spread sample has rse 0 by definition;
    a zero mean with nonzero spread reports rse as NaN rather than
    blowing up."""

    n: int
    mean: float
    sd: float
    stderr: float
    rse: float

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "SampleStats":
        arr = np.asarray(values, dtype=np.float64)
        n = int(arr.size)
        if n == 0:
            raise ValueError("cannot summarise an empty sample")
        mean = float(np.mean(arr))
        sd = float(np.std(arr, ddof=1)) if n >= 2 else 0.0
        stderr = sd / math.sqrt(n) if n >= 2 else 0.0
        if sd == 0.0:
            rse = 0.0
        elif mean == 0.0:
            rse = float("nan")
        else:
            rse = stderr / mean
        return cls(n=n, mean=mean, sd=sd, stderr=stderr, rse=rse)


@dataclass(frozen=True)
class PopulationResult:
    stats: SampleStats
    regenerated: int  # degenerate (ONU-less) draws that were redrawn


def _one_replicate(
    pop_seed: int,
    replicate: int,
    g: int,
    s: float,
    rn_policy: RnPolicy,
    ic_prob: float,
    load: float,
    cfg: CapacityConfig,
) -> tuple[float, int]:
    for retry in range(_MAX_REGEN_RETRIES):
        seed = mix64(pop_seed, replicate, retry)
        pon = generate_pon(GenParams(g=g, s=s, rn_policy=rn_policy, ic_prob=ic_prob, seed=seed))
        if pon.num_onus > 0:
            return calculate_performance(pon, load, cfg).performance, retry
    raise RuntimeError("generator kept producing ONU-less PONs; check parameters")


def _map_ordered(fn: Callable, tasks: Sequence, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def evaluate_population(
    g: int,
    s: float,
    rn_policy: RnPolicy,
    ic_prob: float,
    load: float,
    cfg: CapacityConfig,
    sample_size: int,
    seed: int,
    threads: int = 1,
    rse_target: float | None = None,
    max_samples: int | None = None,
) -> PopulationResult:
    """Sample one population and summarise the performance values.

    With ``rse_target`` set, sampling continues in ``sample_size``
    batches until the target is met or ``max_samples`` (default 10x the
    batch) is reached; replicate seeds depend only on the replicate
    index, so adaptive runs extend fixed runs rather than resampling.
    """
    if sample_size < 2:
        raise ValueError("sample_size must be >= 2")
    cap = sample_size if rse_target is None else (max_samples or 10 * sample_size)

    values: list[float] = []
    regenerated = 0
    while True:
        start = len(values)
        batch = min(sample_size, cap - start)
        results = _map_ordered(
            lambda k: _one_replicate(seed, k, g, s, rn_policy, ic_prob, load, cfg),
            range(start, start + batch),
            threads,
        )
        values.extend(v for v, _ in results)
        regenerated += sum(r for _, r in results)
        stats = SampleStats.from_values(values)
        if rse_target is None or len(values) >= cap:
            break
        if not math.isnan(stats.rse) and stats.rse <= rse_target:
            break
    return PopulationResult(stats=stats, regenerated=regenerated)


@dataclass(frozen=True)
class ScenarioConfig:
    """Grid and sampling parameters for one scenario run."""

    scenario: int
    g: int = 32
    s: float = 0.3
    capacities: CapacityConfig = field(default_factory=CapacityConfig)
    r_values: tuple[float, ...] = DEFAULT_R_GRID
    l_values: tuple[float, ...] = DEFAULT_L_GRID
    q_values: tuple[float, ...] = DEFAULT_Q_GRID
    load: float = 2.0  # scenario 2 evaluates at this single load
    sample_size: int = 300
    rse_target: float = 0.01
    master_seed: int = 0
    threads: int = 1
    adaptive: bool = False
    max_samples: int | None = None

    def __post_init__(self):
        if self.scenario not in (1, 2):
            raise ValueError("scenario must be 1 or 2")
        if self.sample_size < 2:
            raise ValueError("sample_size must be >= 2")
        grid = self.l_values if self.scenario == 1 else self.q_values
        if not self.r_values or not grid:
            raise ValueError("grids must be non-empty")

    @property
    def second_label(self) -> str:
        return "l" if self.scenario == 1 else "q"

    @property
    def second_values(self) -> tuple[float, ...]:
        return self.l_values if self.scenario == 1 else self.q_values


@dataclass(frozen=True)
class SurfacePoint:
    """One grid point: coordinates plus the sampled performance stats."""

    r: float
    second: float
    stats: SampleStats


@dataclass(frozen=True)
class ScenarioResult:
    config: ScenarioConfig
    points: tuple[SurfacePoint, ...]
    baseline: tuple[SurfacePoint, ...]
    regenerated: int
    wall_time_s: float


def population_seed(master_seed: int, scenario: int, r: float, second: float) -> int:
    """Seed of the population at one grid point; see the module docstring."""
    return mix64(master_seed, scenario, float_bits(r), float_bits(second))


def _no_sharing_mean(load: float) -> float:
    return min(1.0, 1.0 / load) if load > 0 else 1.0


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    """Evaluate every grid point, row-major in (r, second coordinate).

    Also produces the analytic no-sharing baseline surface (1/l for
    scenario 1, the value at l = 2 for scenario 2) for comparison
    plots. Point results are a pure function of the config regardless
    of the thread budget.
    """
    t0 = time.perf_counter()
    grid: list[tuple[float, float]] = [
        (r, second) for r in config.r_values for second in config.second_values
    ]

    def point_args(r: float, second: float) -> tuple[RnPolicy, float, float]:
        if config.scenario == 1:
            return FixedStages(), second, r
        return RandomActive(q=second), config.load, r

    seeds = [
        population_seed(config.master_seed, config.scenario, r, second)
        for r, second in grid
    ]

    points: list[SurfacePoint] = []
    regenerated = 0
    if config.adaptive:
        for (r, second), pseed in zip(grid, seeds):
            policy, load, ic_prob = point_args(r, second)
            res = evaluate_population(
                config.g,
                config.s,
                policy,
                ic_prob,
                load,
                config.capacities,
                config.sample_size,
                pseed,
                threads=config.threads,
                rse_target=config.rse_target,
                max_samples=config.max_samples,
            )
            points.append(SurfacePoint(r=r, second=second, stats=res.stats))
            regenerated += res.regenerated
    else:
        # flatten (point, replicate) into one task list for load balancing
        tasks: list[tuple[int, int]] = [
            (pi, k) for pi in range(len(grid)) for k in range(config.sample_size)
        ]

        def run_task(task: tuple[int, int]) -> tuple[float, int]:
            pi, k = task
            r, second = grid[pi]
            policy, load, ic_prob = point_args(r, second)
            return _one_replicate(
                seeds[pi], k, config.g, config.s, policy, ic_prob, load, config.capacities
            )

        flat = _map_ordered(run_task, tasks, config.threads)
        for pi, (r, second) in enumerate(grid):
            chunk = flat[pi * config.sample_size : (pi + 1) * config.sample_size]
            regenerated += sum(ret for _, ret in chunk)
            points.append(
                SurfacePoint(
                    r=r,
                    second=second,
                    stats=SampleStats.from_values([v for v, _ in chunk]),
                )
            )

    baseline = tuple(
        SurfacePoint(
            r=r,
            second=second,
            stats=SampleStats(
                n=0,
                mean=_no_sharing_mean(second if config.scenario == 1 else config.load),
                sd=0.0,
                stderr=0.0,
                rse=0.0,
            ),
        )
        for r, second in grid
    )
    return ScenarioResult(
        config=config,
        points=tuple(points),
        baseline=baseline,
        regenerated=regenerated,
        wall_time_s=time.perf_counter() - t0,
    )


@dataclass(frozen=True)
class RunReport:
    """Aggregate health of a scenario run."""

    n_points: int
    total_samples: int
    max_rse: float
    flagged: tuple[tuple[float, float, float], ...]  # (r, second, rse) above target
    regenerated: int
    wall_time_s: float


def summarize(result: ScenarioResult) -> RunReport:
    rses = [p.stats.rse for p in result.points]
    finite = [x for x in rses if not math.isnan(x)]
    target = result.config.rse_target
    flagged = tuple(
        (p.r, p.second, p.stats.rse)
        for p in result.points
        if math.isnan(p.stats.rse) or p.stats.rse > target
    )
    return RunReport(
        n_points=len(result.points),
        total_samples=sum(p.stats.n for p in result.points),
        max_rse=max(finite) if finite else float("nan"),
        flagged=flagged,
        regenerated=result.regenerated,
        wall_time_s=result.wall_time_s,
    )

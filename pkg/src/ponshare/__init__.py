"""ponshare: capacity-sharing performance simulator for PON trees.

Evaluates the upper bound of downstream performance when ONUs with an
external inter-network feed can serve other ONUs through active remote
nodes, and runs the Monte-Carlo population sweeps over random
three-stage PONs.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND, USING_NUMBA
from .allocation import (
    CapacityConfig,
    DemandProfile,
    PerformanceReport,
    ResidualState,
    calculate_performance,
    grant_db,
)
from .experiment import (
    DEFAULT_L_GRID,
    DEFAULT_Q_GRID,
    DEFAULT_R_GRID,
    PopulationResult,
    RunReport,
    SampleStats,
    ScenarioConfig,
    ScenarioResult,
    SurfacePoint,
    evaluate_population,
    population_seed,
    run_scenario,
    summarize,
)
from .pathing import (
    Alternative,
    Direction,
    DirectedAccessGraph,
    ShortestPathTree,
    VertexRole,
    find_alternatives,
    shortest_path_tree,
    split_rns,
    trace,
)
from .topology import (
    FixedStages,
    GenParams,
    NodeKind,
    PonGraph,
    PonParseError,
    RandomActive,
    StructureError,
    expected_counts,
    generate_pon,
    parse_pon,
    reassign_ic,
    serialize_pon,
)

__all__ = [
    "BACKEND",
    "USING_NUMBA",
    "NodeKind",
    "PonGraph",
    "GenParams",
    "FixedStages",
    "RandomActive",
    "StructureError",
    "PonParseError",
    "generate_pon",
    "expected_counts",
    "serialize_pon",
    "parse_pon",
    "reassign_ic",
    "Direction",
    "VertexRole",
    "Alternative",
    "DirectedAccessGraph",
    "ShortestPathTree",
    "split_rns",
    "shortest_path_tree",
    "trace",
    "find_alternatives",
    "CapacityConfig",
    "DemandProfile",
    "ResidualState",
    "PerformanceReport",
    "grant_db",
    "calculate_performance",
    "SampleStats",
    "PopulationResult",
    "ScenarioConfig",
    "ScenarioResult",
    "SurfacePoint",
    "RunReport",
    "DEFAULT_R_GRID",
    "DEFAULT_L_GRID",
    "DEFAULT_Q_GRID",
    "evaluate_population",
    "population_seed",
    "run_scenario",
    "summarize",
    "__version__",
]

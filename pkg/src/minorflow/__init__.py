"""LDD-based l1-oblivious routing, MWU transshipment, and approximate SSSP trees
over a simulated distributed minor-aggregation model with round accounting."""

from .graphs import (
    Graph,
    GraphError,
    apply_B,
    apply_Bt,
    apply_W,
    dual_feasibility,
    flow_cost,
    is_proper,
    load_graph,
)
from .ldd import LddPartition, sample_ldd, verify_ldd
from .primitives import RootedForest, connected_components, find_cycles, mst_boruvka, root_forest, subtree_sums
from .routing import (
    RoutingOperator,
    RoutingParams,
    build_routing,
    default_params,
    derive_seed,
    ldd_route,
    ldd_route_transpose,
    route,
    route_transpose,
)
from .simulator import AggregationOp, MinorNetwork, OP_MAX, OP_MIN, OP_SUM, network
from .sssp import DEFAULT_KNOBS, SolverKnobs, SsspResult, esssp, sssp
from .transshipment import (
    MwuOutcome,
    SolverError,
    TransshipmentSolution,
    mwu_check,
    repair_and_finalize,
    solve_transshipment,
)

__version__ = "0.1.0"

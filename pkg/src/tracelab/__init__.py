"""tracelab: traces of reversible random walks on finite weighted multigraphs.

Visiting measures, equilibrium measures and capacities with audited
total-variation bounds, stack-based Cox process sampling, coupled
pairing/tree explorations, and vacant-set percolation statistics, all with
exact small-graph oracles.
"""

__version__ = "0.1.0"

from .graphs import (  # noqa: F401
    CEMETERY,
    RootedGraph,
    WeightedMultiGraph,
    ball,
    boundary,
    build_graph,
    canonical_key,
    disclosed_subgraph,
    is_isomorphic,
    load_fixture,
    save_fixture,
    total_vertex_weight,
)
from .stats import FiniteDist, RngStream, poisson_count_test, tv_empirical, tv_exact  # noqa: F401
from .walks import (  # noqa: F401
    Generator,
    KilledSemigroup,
    StationaryDist,
    TrajectorySegment,
    generator,
    hitting_tail_exact,
    mixing_distance,
    mixing_distance_mc,
    range_of,
    simulate_walk,
    stationary,
    transition_probs_exact,
)
from .visits import (  # noqa: F401
    VisitingMeasure,
    entrance_times,
    kill_paths,
    restrict,
    visiting_measure,
)
from .equilibrium import (  # noqa: F401
    BoundAudit,
    EquilibriumReport,
    entrance_density_exact,
    entrance_law_audit,
    equilibrium_report,
    equilibrium_report_mc,
    joint_prefix_audit,
    tail_factorization_audit,
    tv_composition_check,
    visit_coupling_bound,
)
from .generators import (  # noqa: F401
    DegreeDistribution,
    DegreeSequence,
    GwpTreeSpec,
    ell_schedule,
    erdos_renyi_gnm,
    gw_survival,
    largest_component,
    pair_half_edges,
    sample_degree_sequence,
    sample_gwp_tree,
    size_bias,
)
from .exploration import (  # noqa: F401
    Exploration,
    breadth_first_rule,
    condition_on_component_size,
    coupled_exploration_cm_gwp,
    disclosed_by_walks,
    exploration_tv_estimate,
    explore,
    markov_rule,
)
from .limits import (  # noqa: F401
    CoxPointProcess,
    LimitProcessSampler,
    binned_summary,
    build_stacks,
    escape_estimate,
    main_bound,
    sample_cox,
    sample_limit_process,
    sample_poisson_visits,
)
from .percolation import (  # noqa: F401
    ComponentStats,
    VacantGraph,
    components,
    giant_vs_survival_experiment,
    maxsq_bounds,
    pair_condition_estimate,
    vacant_graph,
)

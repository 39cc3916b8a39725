"""Compact entanglement routing over quantum-addressed overlay networks.

The package simulates a two-tier quantum backbone: nodes carry prefix-
structured quantum addresses, maintain entangled links toward their cheapest
peers plus a sublinear set of long-range hubs, and resolve end-to-end
entanglement requests with provably constant stretch. A statevector engine
reproduces the amplitude-amplified table lookup over superposed addresses.
"""

from .addressing import AddressPlan, QuantumAddress, assign_addresses, prefix_of, serving_esp
from .clustering import (
    AnchorSet,
    CoverageReport,
    Scheme,
    TrackedSets,
    assign_all_tracking,
    assign_tracking,
    build_anchor_set_greedy,
    build_anchor_set_random,
    build_tracked_sets,
    neighborhood_size,
    verify_coverage,
)
from .metrics import (
    AxiomReport,
    Composition,
    EntanglingMetric,
    capacity_metric,
    check_axioms,
    compose,
    fold,
    hop_count_metric,
    metric_by_name,
    uniform_weight_metric,
)
from .qsearch import (
    LookupResult,
    SearchInstance,
    SearchOutcome,
    analytic_success_probability,
    apply_diffusion,
    apply_oracle,
    init_search,
    instance_from_table,
    iteration_count,
    make_instance,
    partition_neighborhood,
    routing_lookup_via_search,
    run_search,
)
from .routing import (
    Case,
    EntangledPath,
    Origin,
    PairEvaluation,
    QuantumPacket,
    RoutingTable,
    SchemeTables,
    TableEntry,
    build_tables,
    evaluate_all_pairs,
    make_packet,
    replenish,
    resolve,
    resolve_full_anchor,
    resolve_partial_anchor,
    swap_and_replenish,
    table_size_stats,
    verify_bound_chain,
)
from .topology import (
    ENeighborhood,
    NetworkGraph,
    all_neighborhoods,
    all_pairs_optimal,
    e_neighborhood,
    generate_graph,
    load_graph,
    optimal_cost,
    reverse_neighborhood,
    save_graph,
)

__version__ = "0.1.0"

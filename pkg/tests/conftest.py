import itertools

import pytest

from qnroute.addressing import assign_addresses
from qnroute.clustering import (
    assign_all_tracking,
    build_anchor_set_greedy,
    build_tracked_sets,
)
from qnroute.metrics import Composition, fold
from qnroute.routing import SchemeTables, build_tables
from qnroute.topology import NetworkGraph, all_neighborhoods


def brute_force_optimal(graph: NetworkGraph, metric, i: int, j: int) -> float:
    """Independent oracle for the optimal composed cost.

    Additive composition enumerates every simple path (sufficient: dropping a
    cycle never increases a nonnegative sum). Min composition minimizes over
    walks, and a walk can reach any edge of the connected component, so the
    optimum is the cheapest component edge; reachability is asserted.
    """
    if i == j:
        return 0.0
    if metric.composition is Composition.ADDITIVE:
        best = None
        stack = [(i, [i])]
        while stack:
            node, path = stack.pop()
            if node == j:
                cost = fold(metric, [graph.cost(a, b) for a, b in zip(path, path[1:])])
                best = cost if best is None else min(best, cost)
                continue
            for nxt in graph.neighbors(node):
                if nxt not in path:
                    stack.append((nxt, path + [nxt]))
        if best is None:
            raise AssertionError(f"no path {i}->{j}")
        return best
    assert graph.is_connected()
    return min(c for _, _, c in graph.edges())


def path_graph(costs: list[float]) -> NetworkGraph:
    g = NetworkGraph(n_e=len(costs) + 1)
    for idx, c in enumerate(costs):
        g.add_edge(idx, idx + 1, c)
    return g


def complete_graph(n: int, cost: float = 1.0) -> NetworkGraph:
    g = NetworkGraph(n_e=n)
    for a, b in itertools.combinations(range(n), 2):
        g.add_edge(a, b, cost)
    return g


@pytest.fixture
def triangle_graph() -> NetworkGraph:
    g = NetworkGraph(n_e=3)
    g.add_edge(0, 1, 1.0)
    g.add_edge(1, 2, 1.0)
    g.add_edge(0, 2, 3.0)
    return g


def build_partial_scheme(
    graph: NetworkGraph, metric, k: int, f: int = 1, ebit_budget: int = 4,
    capacity_cap: int | None = None,
) -> SchemeTables:
    """Full partial-anchor pipeline with greedy (always-covering) anchors."""
    nbs = all_neighborhoods(graph, metric, k)
    anchors = build_anchor_set_greedy(nbs)
    plan = assign_addresses(graph.n_e, 0)
    return build_tables(
        graph, metric, nbs, anchors=anchors, f=f, ebit_budget=ebit_budget,
        capacity_cap=capacity_cap, plan=plan,
    )


def build_full_scheme(
    graph: NetworkGraph, metric, k: int, tracking_seed: int = 0, f: int = 1,
    ebit_budget: int = 4, capacity_cap: int | None = None,
) -> SchemeTables:
    nbs = all_neighborhoods(graph, metric, k)
    plan = assign_addresses(graph.n_e, 0)
    tracked = assign_all_tracking(
        build_tracked_sets(plan, graph.n_e), graph.n_e, seed=tracking_seed
    )
    return build_tables(
        graph, metric, nbs, tracked=tracked, f=f, ebit_budget=ebit_budget,
        capacity_cap=capacity_cap, plan=plan,
    )

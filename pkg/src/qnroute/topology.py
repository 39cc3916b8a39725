"""Backbone graph model, generators, optimal entangling cost, e-neighborhoods.

Vertices are ESP indices 0..n_e-1 (ascending index equals ascending quantum
address). Edges are undirected with one nonnegative cost each. The optimal
entangling cost between two nodes is the least composed cost over repeater
sequences; for additive composition that is the classic shortest path, while
for min composition the least composed value over walks is attained by any
walk through the cheapest edge of the component, so the optimum equals that
edge's cost. Restricting min composition to simple paths would break the
triangle inequality of the derived cost (a pendant cheap edge is reachable in
a walk but not on every simple path), so walks are the intended semantics.
"""

from __future__ import annotations

import heapq
import logging
import math
import random
from collections import deque
from dataclasses import dataclass, field

from .addressing import AddressPlan
from .errors import GenerationFailedError, NeighborhoodSizeError, UnreachableError
from .metrics import Composition, EntanglingMetric, fold

logger = logging.getLogger(__name__)

CONNECTIVITY_RETRIES = 100


@dataclass
class NetworkGraph:
    """Undirected cost-weighted graph over ESP nodes."""

    n_e: int
    adjacency: dict[int, dict[int, float]] = field(default_factory=dict)
    plan: AddressPlan | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for v in range(self.n_e):
            self.adjacency.setdefault(v, {})

    def add_edge(self, i: int, j: int, cost: float) -> None:
        if i == j:
            raise ValueError("self-loops are not allowed")
        if cost < 0:
            raise ValueError("link costs must be nonnegative")
        self.adjacency[i][j] = cost
        self.adjacency[j][i] = cost

    def has_edge(self, i: int, j: int) -> bool:
        return j in self.adjacency[i]

    def cost(self, i: int, j: int) -> float:
        return self.adjacency[i][j]

    def neighbors(self, i: int) -> list[int]:
        return sorted(self.adjacency[i])

    def edges(self) -> list[tuple[int, int, float]]:
        out = []
        for i in sorted(self.adjacency):
            for j, c in sorted(self.adjacency[i].items()):
                if i < j:
                    out.append((i, j, c))
        return out

    def edge_count(self) -> int:
        return len(self.edges())

    def is_connected(self) -> bool:
        if self.n_e == 0:
            return True
        seen = {0}
        queue = deque([0])
        while queue:
            v = queue.popleft()
            for u in self.adjacency[v]:
                if u not in seen:
                    seen.add(u)
                    queue.append(u)
        return len(seen) == self.n_e


def save_graph(graph: NetworkGraph, path: str) -> None:
    """Write the text format: header ``n_e <count>``, then ``i j cost`` lines."""
    with open(path, "w") as fh:
        fh.write(f"n_e {graph.n_e}\n")
        for i, j, c in graph.edges():
            fh.write(f"{i} {j} {c!r}\n")


def load_graph(path: str) -> NetworkGraph:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "n_e":
            raise ValueError(f"bad graph header in {path}")
        graph = NetworkGraph(n_e=int(header[1]))
        for line in fh:
            if not line.strip():
                continue
            i, j, c = line.split()
            graph.add_edge(int(i), int(j), float(c))
    return graph


# ---------------------------------------------------------------------------
# Generators


def _erdos_renyi(n_e: int, rng: random.Random, edge_prob: float = 0.3) -> NetworkGraph:
    graph = NetworkGraph(n_e=n_e)
    for i in range(n_e):
        for j in range(i + 1, n_e):
            if rng.random() < edge_prob:
                graph.add_edge(i, j, 1.0)
    return graph


def _waxman(
    n_e: int, rng: random.Random, alpha: float = 0.4, beta: float = 0.8
) -> NetworkGraph:
    positions = [(rng.random(), rng.random()) for _ in range(n_e)]
    scale = math.sqrt(2.0)
    graph = NetworkGraph(n_e=n_e)
    for i in range(n_e):
        for j in range(i + 1, n_e):
            d = math.dist(positions[i], positions[j])
            if rng.random() < beta * math.exp(-d / (alpha * scale)):
                graph.add_edge(i, j, 1.0)
    graph.meta["positions"] = positions
    return graph


def _barabasi_albert(n_e: int, rng: random.Random, attach: int = 2) -> NetworkGraph:
    if attach < 1 or attach >= n_e:
        raise ValueError("attach must be in [1, n_e)")
    graph = NetworkGraph(n_e=n_e)
    core = attach + 1
    for i in range(core):
        for j in range(i + 1, core):
            graph.add_edge(i, j, 1.0)
    # endpoint list doubles as the degree-proportional sampling pool
    pool = [v for i, j, _ in graph.edges() for v in (i, j)]
    for new in range(core, n_e):
        targets: set[int] = set()
        while len(targets) < attach:
            targets.add(rng.choice(pool))
        for t in sorted(targets):
            graph.add_edge(new, t, 1.0)
            pool.extend((new, t))
    return graph


def _grid_torus(
    n_e: int, rng: random.Random, rows: int | None = None, cols: int | None = None
) -> NetworkGraph:
    if rows is None and cols is None:
        side = round(math.sqrt(n_e))
        if side * side != n_e:
            raise ValueError(f"n_e={n_e} is not a square; pass rows/cols explicitly")
        rows = cols = side
    if rows * cols != n_e:
        raise ValueError(f"rows*cols = {rows * cols} != n_e = {n_e}")
    graph = NetworkGraph(n_e=n_e)
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            right = r * cols + (c + 1) % cols
            down = ((r + 1) % rows) * cols + c
            if right != v:
                graph.add_edge(v, right, 1.0)
            if down != v:
                graph.add_edge(v, down, 1.0)
    return graph


_GENERATORS = {
    "erdos_renyi": _erdos_renyi,
    "waxman": _waxman,
    "barabasi_albert": _barabasi_albert,
    "grid_torus": _grid_torus,
}


def generate_graph(
    model: str,
    n_e: int,
    params: dict | None = None,
    metric: EntanglingMetric | None = None,
    seed: int = 0,
) -> NetworkGraph:
    """Generate a connected graph with per-link costs drawn from ``metric``.

    Structure is drawn first, then costs per edge in sorted edge order, so
    the edge set depends only on (model, params, seed). Generators retry on
    disconnection up to CONNECTIVITY_RETRIES, then augment the last attempt
    by chaining its components with random inter-component links.
    """
    if n_e < 2:
        raise ValueError("n_e must be at least 2")
    try:
        factory = _GENERATORS[model]
    except KeyError:
        raise GenerationFailedError(
            f"unknown model {model!r}; available: {sorted(_GENERATORS)}"
        ) from None
    params = dict(params or {})
    rng = random.Random(seed)

    graph = None
    attempts = 0
    for attempts in range(1, CONNECTIVITY_RETRIES + 1):
        graph = factory(n_e, rng, **params)
        if graph.is_connected():
            break
    else:
        logger.warning(
            "%s n_e=%d still disconnected after %d attempts; augmenting",
            model,
            n_e,
            CONNECTIVITY_RETRIES,
        )
        _augment_connectivity(graph, rng)
    graph.meta["attempts"] = attempts
    if attempts > 1:
        logger.info("%s n_e=%d needed %d attempts for connectivity", model, n_e, attempts)

    if metric is not None:
        for i, j, _ in graph.edges():
            graph.adjacency[i][j] = graph.adjacency[j][i] = float(
                metric.sample_cost(rng)
            )
    return graph


def _components(graph: NetworkGraph) -> list[list[int]]:
    seen: set[int] = set()
    comps = []
    for start in range(graph.n_e):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for u in graph.adjacency[v]:
                if u not in seen:
                    seen.add(u)
                    comp.append(u)
                    queue.append(u)
        comps.append(sorted(comp))
    return comps


def _augment_connectivity(graph: NetworkGraph, rng: random.Random) -> None:
    comps = _components(graph)
    rng.shuffle(comps)
    for a, b in zip(comps, comps[1:]):
        graph.add_edge(rng.choice(a), rng.choice(b), 1.0)
    graph.meta["augmented"] = True


# ---------------------------------------------------------------------------
# Optimal entangling cost


def _dijkstra(graph: NetworkGraph, source: int) -> tuple[dict[int, float], dict[int, int]]:
    dist = {source: 0.0}
    parent: dict[int, int] = {}
    done: set[int] = set()
    heap = [(0.0, source)]
    while heap:
        d, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        for u in graph.neighbors(v):
            nd = d + graph.cost(v, u)
            if u not in dist or nd < dist[u]:
                dist[u] = nd
                parent[u] = v
                heapq.heappush(heap, (nd, u))
    return dist, parent


def _hop_path(graph: NetworkGraph, source: int, target: int) -> list[int]:
    if source == target:
        return [source]
    parent = {source: source}
    queue = deque([source])
    while queue:
        v = queue.popleft()
        for u in graph.neighbors(v):
            if u not in parent:
                parent[u] = v
                if u == target:
                    path = [u]
                    while path[-1] != source:
                        path.append(parent[path[-1]])
                    return path[::-1]
                queue.append(u)
    raise UnreachableError(f"no path from {source} to {target}")


def _min_edge(graph: NetworkGraph) -> tuple[int, int, float]:
    best = None
    for i, j, c in graph.edges():
        if best is None or (c, i, j) < best:
            best = (c, i, j)
    if best is None:
        raise UnreachableError("graph has no edges")
    c, i, j = best
    return i, j, c


def optimal_cost(
    graph: NetworkGraph, metric: EntanglingMetric, i: int, j: int
) -> tuple[float, list[int]]:
    """Minimum composed cost between ``i`` and ``j`` plus one witness route.

    Returns ``(cost, nodes)`` where nodes is the full repeater sequence
    including both endpoints, or an empty list when i == j (cost 0 by
    definiteness). Additive composition runs Dijkstra, licensed by
    isotonicity plus the triangle inequality; min composition returns a walk
    through the cheapest component edge, whose composed value that edge's
    cost is.
    """
    if i == j:
        return 0.0, []
    if metric.composition is Composition.ADDITIVE:
        dist, parent = _dijkstra(graph, i)
        if j not in dist:
            raise UnreachableError(f"no path from {i} to {j}")
        path = [j]
        while path[-1] != i:
            path.append(parent[path[-1]])
        return dist[j], path[::-1]

    u, v, c = _min_edge(graph)
    # Orient the cheapest edge to keep the witness walk short.
    forward = _hop_path(graph, i, u) + _hop_path(graph, v, j)
    backward = _hop_path(graph, i, v) + _hop_path(graph, u, j)
    walk = forward if len(forward) <= len(backward) else backward
    cleaned = [walk[0]]
    for node in walk[1:]:
        if node != cleaned[-1]:
            cleaned.append(node)
    assert fold(metric, [graph.cost(a, b) for a, b in zip(cleaned, cleaned[1:])]) == c
    return c, cleaned


def all_pairs_optimal(
    graph: NetworkGraph, metric: EntanglingMetric
) -> dict[tuple[int, int], float]:
    """Optimal cost for every ordered node pair (diagonal included, cost 0)."""
    out: dict[tuple[int, int], float] = {}
    if metric.composition is Composition.ADDITIVE:
        for i in range(graph.n_e):
            dist, _ = _dijkstra(graph, i)
            if len(dist) != graph.n_e:
                raise UnreachableError(f"graph disconnected at node {i}")
            for j, d in dist.items():
                out[(i, j)] = d
        return out
    _, _, c = _min_edge(graph)
    if not graph.is_connected():
        raise UnreachableError("graph disconnected")
    for i in range(graph.n_e):
        for j in range(graph.n_e):
            out[(i, j)] = 0.0 if i == j else c
    return out


@dataclass(frozen=True)
class ENeighborhood:
    """The k cheapest-to-entangle peers of one node, with their optimal costs."""

    owner: int
    members: tuple[tuple[int, float], ...]

    @property
    def k(self) -> int:
        return len(self.members)

    @property
    def member_ids(self) -> frozenset[int]:
        return frozenset(m for m, _ in self.members)

    def cost_to(self, member: int) -> float:
        for m, c in self.members:
            if m == member:
                return c
        raise KeyError(member)


def e_neighborhood(
    graph: NetworkGraph, metric: EntanglingMetric, v: int, k: int
) -> ENeighborhood:
    """The k nodes with smallest optimal cost from ``v``.

    Ties break by ascending address integer, which for ESP nodes coincides
    with ascending node index. Membership is deterministic and stable.
    """
    if k >= graph.n_e:
        raise NeighborhoodSizeError(f"k={k} must be smaller than n_e={graph.n_e}")
    if metric.composition is Composition.ADDITIVE:
        dist, _ = _dijkstra(graph, v)
    else:
        _, _, c = _min_edge(graph)
        dist = {u: c for u in range(graph.n_e)}
    ranked = sorted((dist[u], u) for u in range(graph.n_e) if u != v and u in dist)
    members = tuple((u, c) for c, u in ranked[:k])
    return ENeighborhood(owner=v, members=members)


def all_neighborhoods(
    graph: NetworkGraph, metric: EntanglingMetric, k: int
) -> list[ENeighborhood]:
    return [e_neighborhood(graph, metric, v, k) for v in range(graph.n_e)]


def reverse_neighborhood(neighborhoods: list[ENeighborhood], v: int) -> set[int]:
    """Owners whose e-neighborhood contains ``v`` (may be empty)."""
    return {nb.owner for nb in neighborhoods if v in nb.member_ids}

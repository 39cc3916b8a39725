"""Routing tables over the entangled overlay and constant-stretch resolution.

Each node's table holds one entry per artificial link it participates in:
links toward its e-neighborhood, links created toward it by others (reverse
neighbors), and the scheme's long-range links (anchor mesh or tracked block).
Every entry carries the peer's address, an ebit budget, and a classical
mirror of the peer's partitioned e-neighborhood, which the search module
realizes as superposed address registers.

Resolution walks the case ladder: direct link, one repeater through a
neighbor, and (partial-anchor only) two repeaters through the hub mesh. The
second hub is required to sit inside the target's e-neighborhood; that is the
precondition under which the inequality chain certifies the constant stretch
bound, and its absence is exactly a coverage failure, reported as a declared
fallback rather than folded into the stretch statistics.
"""

from __future__ import annotations

import enum
import math
import statistics
from collections import Counter
from dataclasses import dataclass, field

from .addressing import AddressPlan, QuantumAddress
from .clustering import AnchorSet, Scheme, TrackedSets
from .errors import ChainViolationError, DepletedLinkError
from .metrics import EntanglingMetric, compose, fold
from .qsearch import partition_neighborhood
from .topology import ENeighborhood, NetworkGraph, all_pairs_optimal, optimal_cost

CHAIN_TOL = 1e-9


class Origin(enum.Enum):
    E_NEIGHBOR = "e-neighbor"
    REVERSE_NEIGHBOR = "reverse-neighbor"
    ANCHOR_LINK = "anchor-link"
    TRACKED_LINK = "tracked-link"


class Case(enum.Enum):
    CASE_I = "I"
    CASE_II = "II"
    CASE_III = "III"
    FALLBACK = "fallback"
    FAILURE = "failure"


@dataclass
class TableEntry:
    """One artificial link plus the classical mirror of the peer's reach.

    ``partitions`` are disjoint and union to the peer's e-neighborhood; they
    mirror the superposed address registers the peer announces. An entry with
    zero ebits is unusable for swapping until replenished.
    """

    e_hop: int
    cost: float
    ebits: int
    partitions: tuple[frozenset[int], ...]
    anchor_flag: bool
    origin: Origin
    marked_for_replenish: bool = False
    _reach: frozenset[int] | None = field(default=None, repr=False, compare=False)

    @property
    def reach(self) -> frozenset[int]:
        if self._reach is None:
            self._reach = frozenset().union(*self.partitions)
        return self._reach

    @property
    def usable(self) -> bool:
        return self.ebits >= 1


@dataclass
class RoutingTable:
    owner: int
    scheme: Scheme
    entries: list[TableEntry] = field(default_factory=list)
    capacity_cap: int | None = None
    dropped: list[tuple[int, str]] = field(default_factory=list)

    def find(self, peer: int) -> TableEntry | None:
        for entry in self.entries:
            if entry.e_hop == peer:
                return entry
        return None

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class SchemeTables:
    """All tables of one scheme instance plus the data they were built from."""

    scheme: Scheme
    tables: list[RoutingTable]
    neighborhoods: list[ENeighborhood]
    graph: NetworkGraph
    metric: EntanglingMetric
    pair_costs: dict[tuple[int, int], float]
    anchors: AnchorSet | None = None
    tracked: TrackedSets | None = None
    plan: AddressPlan | None = None
    f: int = 1
    ebit_budget: int = 4
    capacity_cap: int = 0

    @property
    def n_e(self) -> int:
        return self.graph.n_e

    def table(self, v: int) -> RoutingTable:
        return self.tables[v]

    def optimal(self, i: int, j: int) -> float:
        return self.pair_costs[(i, j)]


@dataclass(frozen=True)
class EntangledPath:
    """Resolved repeater sequence with per-segment optimal link costs."""

    source: int
    dest: int
    repeaters: tuple[int, ...]
    segment_costs: tuple[float, ...]
    total_cost: float
    optimal: float
    case: Case
    reason: str | None = None

    @property
    def nodes(self) -> tuple[int, ...]:
        return (self.source, *self.repeaters, self.dest)

    @property
    def stretch(self) -> float:
        if self.case is Case.FAILURE:
            return math.inf
        if self.optimal == 0:
            return 1.0
        return self.total_cost / self.optimal

    @property
    def resolved(self) -> bool:
        return self.case in (Case.CASE_I, Case.CASE_II, Case.CASE_III)


@dataclass(frozen=True)
class QuantumPacket:
    """Header with source/destination addresses and superposed descriptors;
    payload modeled as a count of carried ebits."""

    source: QuantumAddress
    dest: QuantumAddress
    descriptors: tuple[frozenset[int], ...] = ()
    payload_ebits: int = 1


def make_packet(
    plan: AddressPlan,
    source: int,
    dest: int,
    descriptors: tuple[frozenset[int], ...] = (),
    payload_ebits: int = 1,
) -> QuantumPacket:
    if payload_ebits < 1:
        raise ValueError("entanglement-distribution packets need a nonempty payload")
    return QuantumPacket(
        source=plan.esp_addresses[source],
        dest=plan.esp_addresses[dest],
        descriptors=descriptors,
        payload_ebits=payload_ebits,
    )


@dataclass
class DeliveryRecord:
    path: EntangledPath
    consumed: list[tuple[int, int]]
    success: bool
    retried: bool = False
    detail: str = ""


# ---------------------------------------------------------------------------
# Table construction


def build_tables(
    graph: NetworkGraph,
    metric: EntanglingMetric,
    neighborhoods: list[ENeighborhood],
    anchors: AnchorSet | None = None,
    tracked: TrackedSets | None = None,
    f: int = 1,
    ebit_budget: int = 4,
    capacity_cap: int | None = None,
    plan: AddressPlan | None = None,
) -> SchemeTables:
    """Populate every node's routing table for one scheme.

    Partial-anchor requires ``anchors``; full-anchor requires ``tracked``
    with assignments. The default capacity cap of 4k never evicts e-neighbor
    entries; when a table overflows, reverse-neighbor entries are dropped
    costliest-first and recorded in the table's dropped list.
    """
    if (anchors is None) == (tracked is None):
        raise ValueError("pass exactly one of anchors / tracked")
    scheme = Scheme.PARTIAL_ANCHOR if anchors is not None else Scheme.FULL_ANCHOR
    if scheme is Scheme.FULL_ANCHOR and not tracked.assignment:
        raise ValueError("tracked sets must be assigned before building tables")

    k = neighborhoods[0].k if neighborhoods else 0
    cap = capacity_cap if capacity_cap is not None else max(1, 4 * k)
    pair_costs = all_pairs_optimal(graph, metric)
    by_owner = {nb.owner: nb for nb in neighborhoods}
    anchor_ids = anchors.members if anchors is not None else frozenset()

    def is_anchor_hop(peer: int) -> bool:
        # In the full-anchor scheme every node plays the hub role.
        return scheme is Scheme.FULL_ANCHOR or peer in anchor_ids

    def mirror(peer: int) -> tuple[frozenset[int], ...]:
        return partition_neighborhood(by_owner[peer].member_ids, f)

    tables: list[RoutingTable] = []
    for v in range(graph.n_e):
        table = RoutingTable(owner=v, scheme=scheme, capacity_cap=cap)
        covered: set[int] = set()

        forward = sorted(by_owner[v].members, key=lambda mc: (mc[1], mc[0]))
        for peer, cost in forward:
            table.entries.append(
                TableEntry(
                    e_hop=peer,
                    cost=cost,
                    ebits=ebit_budget,
                    partitions=mirror(peer),
                    anchor_flag=is_anchor_hop(peer),
                    origin=Origin.E_NEIGHBOR,
                )
            )
            covered.add(peer)

        reverse_owners = sorted(
            (pair_costs[(v, u)], u)
            for u in range(graph.n_e)
            if u != v and u not in covered and v in by_owner[u].member_ids
        )
        for cost, peer in reverse_owners:
            table.entries.append(
                TableEntry(
                    e_hop=peer,
                    cost=cost,
                    ebits=ebit_budget,
                    partitions=mirror(peer),
                    anchor_flag=is_anchor_hop(peer),
                    origin=Origin.REVERSE_NEIGHBOR,
                )
            )
            covered.add(peer)

        if scheme is Scheme.PARTIAL_ANCHOR and v in anchor_ids:
            for peer in sorted(anchor_ids):
                if peer == v or peer in covered:
                    continue
                table.entries.append(
                    TableEntry(
                        e_hop=peer,
                        cost=pair_costs[(v, peer)],
                        ebits=ebit_budget,
                        partitions=mirror(peer),
                        anchor_flag=True,
                        origin=Origin.ANCHOR_LINK,
                    )
                )
                covered.add(peer)
        elif scheme is Scheme.FULL_ANCHOR:
            for peer in tracked.tracked_by(v):
                if peer == v or peer in covered:
                    continue
                table.entries.append(
                    TableEntry(
                        e_hop=peer,
                        cost=pair_costs[(v, peer)],
                        ebits=ebit_budget,
                        partitions=mirror(peer),
                        anchor_flag=True,
                        origin=Origin.TRACKED_LINK,
                    )
                )
                covered.add(peer)

        _enforce_cap(table, cap)
        tables.append(table)

    return SchemeTables(
        scheme=scheme,
        tables=tables,
        neighborhoods=neighborhoods,
        graph=graph,
        metric=metric,
        pair_costs=pair_costs,
        anchors=anchors,
        tracked=tracked,
        plan=plan,
        f=f,
        ebit_budget=ebit_budget,
        capacity_cap=cap,
    )


def _enforce_cap(table: RoutingTable, cap: int) -> None:
    if len(table.entries) <= cap:
        return
    # fairness policy: evict reverse-neighbor entries, costliest first
    reverses = sorted(
        (e for e in table.entries if e.origin is Origin.REVERSE_NEIGHBOR),
        key=lambda e: (-e.cost, -e.e_hop),
    )
    for entry in reverses:
        if len(table.entries) <= cap:
            break
        table.entries.remove(entry)
        table.dropped.append((entry.e_hop, "capacity"))


# ---------------------------------------------------------------------------
# Resolution

def _link_usable(
    tables: SchemeTables, a: int, b: int, blocked: frozenset[frozenset[int]]
) -> bool:
    """A link is usable when no existing endpoint entry is depleted."""
    if frozenset((a, b)) in blocked:
        return False
    ea = tables.table(a).find(b)
    eb = tables.table(b).find(a)
    if ea is None and eb is None:
        return False
    for e in (ea, eb):
        if e is not None and not e.usable:
            return False
    return True


def _finish(
    tables: SchemeTables, i: int, d: int, nodes: list[int], case: Case
) -> EntangledPath:
    segs = tuple(tables.pair_costs[(a, b)] for a, b in zip(nodes, nodes[1:]))
    return EntangledPath(
        source=i,
        dest=d,
        repeaters=tuple(nodes[1:-1]),
        segment_costs=segs,
        total_cost=fold(tables.metric, segs),
        optimal=tables.optimal(i, d),
        case=case,
    )


def _fallback_or_failure(
    tables: SchemeTables, i: int, d: int, reason: str, allow_fallback: bool
) -> EntangledPath:
    if allow_fallback:
        cost, nodes = optimal_cost(tables.graph, tables.metric, i, d)
        return EntangledPath(
            source=i,
            dest=d,
            repeaters=tuple(nodes[1:-1]),
            segment_costs=tuple(
                tables.graph.cost(a, b) for a, b in zip(nodes, nodes[1:])
            ),
            total_cost=cost,
            optimal=tables.optimal(i, d),
            case=Case.FALLBACK,
            reason=reason,
        )
    return EntangledPath(
        source=i,
        dest=d,
        repeaters=(),
        segment_costs=(),
        total_cost=math.inf,
        optimal=tables.optimal(i, d),
        case=Case.FAILURE,
        reason=reason,
    )


def _case_one(
    tables: SchemeTables, i: int, d: int, blocked: frozenset
) -> EntangledPath | None:
    entry = tables.table(i).find(d)
    if entry is not None and entry.usable and _link_usable(tables, i, d, blocked):
        return _finish(tables, i, d, [i, d], Case.CASE_I)
    return None


def _case_two(
    tables: SchemeTables, i: int, d: int, blocked: frozenset
) -> EntangledPath | None:
    """One repeater through an e-neighbor of the source.

    A neighbor qualifies when the target shows up in its mirrored partitions
    or, in the full-anchor scheme, in its announced tracked block. Only
    e-neighbors of the source keep the bound: the first segment's cost is
    then at most the optimal source-target cost.
    """
    metric = tables.metric
    candidates: list[tuple[float, int, float]] = []
    for entry in tables.table(i).entries:
        if entry.origin is not Origin.E_NEIGHBOR or not entry.usable:
            continue
        j = entry.e_hop
        if not _link_usable(tables, i, j, blocked):
            continue
        reaches = d in entry.reach
        if not reaches and tables.scheme is Scheme.FULL_ANCHOR:
            reaches = d in tables.tracked.tracked_by(j)
        if not reaches:
            continue
        hop = tables.table(j).find(d)
        if hop is None or not hop.usable or not _link_usable(tables, j, d, blocked):
            continue
        candidates.append((compose(metric, entry.cost, hop.cost), j, entry.cost))
    if not candidates:
        return None
    _, j, _ = min(candidates, key=lambda c: (c[0], c[1]))
    return _finish(tables, i, d, [i, j, d], Case.CASE_II)


def _anchor_hubs_near(tables: SchemeTables, v: int, blocked: frozenset) -> list[int]:
    """Usable anchors inside v's e-neighborhood, cheapest first."""
    ranked = []
    for entry in tables.table(v).entries:
        if entry.origin is Origin.E_NEIGHBOR and entry.anchor_flag and entry.usable:
            if _link_usable(tables, v, entry.e_hop, blocked):
                ranked.append((entry.cost, entry.e_hop))
    return [hop for _, hop in sorted(ranked)]


def _case_three(
    tables: SchemeTables, i: int, d: int, blocked: frozenset
) -> EntangledPath | str:
    """Two repeaters over the anchor mesh (partial-anchor scheme).

    The entry hub must lie in the source's e-neighborhood and the exit hub in
    the target's; those memberships are what make the stretch chain sound.
    A missing entry hub or exit hub is a coverage failure and is returned as
    a reason string for the fallback path.
    """
    anchors = tables.anchors.members

    if i in anchors:
        entry_hubs = [i]
    else:
        entry_hubs = _anchor_hubs_near(tables, i, blocked)
        if not entry_hubs:
            return "no anchor inside source e-neighborhood"

    exit_hubs = list(_anchor_hubs_near(tables, d, blocked))
    if d in anchors:
        exit_hubs.append(d)
    if not exit_hubs:
        return "no anchor inside target e-neighborhood"

    metric = tables.metric
    for l in entry_hubs:
        best: tuple[float, tuple[int, ...]] | None = None
        for k in exit_hubs:
            nodes = [i]
            if l != i:
                nodes.append(l)
            if k != nodes[-1] and k != d:
                nodes.append(k)
            nodes.append(d)
            if len(nodes) == 2:
                # a direct artificial link is case I territory; reaching here
                # means the source-side entry was unusable
                continue
            ok = all(
                _link_usable(tables, a, b, blocked)
                for a, b in zip(nodes, nodes[1:])
            )
            if not ok:
                continue
            total = fold(
                metric, [tables.pair_costs[(a, b)] for a, b in zip(nodes, nodes[1:])]
            )
            key = (total, tuple(nodes))
            if best is None or key < best:
                best = key
        if best is not None:
            return _finish(tables, i, d, list(best[1]), Case.CASE_III)
    return "anchor mesh links unusable"


def resolve_partial_anchor(
    tables: SchemeTables,
    i: int,
    d: int,
    blocked: frozenset = frozenset(),
    allow_fallback: bool = True,
) -> EntangledPath:
    """Resolve a request under the partial-anchor scheme (cases in order)."""
    if tables.scheme is not Scheme.PARTIAL_ANCHOR:
        raise ValueError("tables were built for the full-anchor scheme")
    if i == d:
        raise ValueError("source and destination must differ")
    path = _case_one(tables, i, d, blocked)
    if path is not None:
        return path
    path = _case_two(tables, i, d, blocked)
    if path is not None:
        return path
    outcome = _case_three(tables, i, d, blocked)
    if isinstance(outcome, EntangledPath):
        return outcome
    return _fallback_or_failure(tables, i, d, outcome, allow_fallback)


def resolve_full_anchor(
    tables: SchemeTables,
    i: int,
    d: int,
    blocked: frozenset = frozenset(),
    allow_fallback: bool = True,
) -> EntangledPath:
    """Resolve a request under the full-anchor scheme (direct, then one hop)."""
    if tables.scheme is not Scheme.FULL_ANCHOR:
        raise ValueError("tables were built for the partial-anchor scheme")
    if i == d:
        raise ValueError("source and destination must differ")
    path = _case_one(tables, i, d, blocked)
    if path is not None:
        return path
    path = _case_two(tables, i, d, blocked)
    if path is not None:
        return path
    return _fallback_or_failure(
        tables, i, d, "no neighbor reaches the target", allow_fallback
    )


def resolve(
    tables: SchemeTables,
    i: int,
    d: int,
    blocked: frozenset = frozenset(),
    allow_fallback: bool = True,
) -> EntangledPath:
    if tables.scheme is Scheme.PARTIAL_ANCHOR:
        return resolve_partial_anchor(tables, i, d, blocked, allow_fallback)
    return resolve_full_anchor(tables, i, d, blocked, allow_fallback)


# ---------------------------------------------------------------------------
# All-pairs evaluation


@dataclass
class PairEvaluation:
    """Aggregate of resolving every ordered pair once."""

    rows: list[tuple[int, int, str, float, float, float]]
    case_counts: Counter
    max_stretch: float
    mean_stretch: float
    max_stretch_with_fallback: float
    fallback_fraction: float
    failure_fraction: float
    stretch_histogram: Counter

    @property
    def resolved_pairs(self) -> int:
        return sum(
            self.case_counts[c.value] for c in (Case.CASE_I, Case.CASE_II, Case.CASE_III)
        )


def evaluate_all_pairs(
    tables: SchemeTables,
    graph: NetworkGraph | None = None,
    metric: EntanglingMetric | None = None,
) -> PairEvaluation:
    """Resolve every ordered pair, with segment costs re-checked against the
    optimal-cost oracle; fallback pairs are excluded from the stretch figures
    and reported separately."""
    graph = graph or tables.graph
    metric = metric or tables.metric

    rows = []
    case_counts: Counter = Counter()
    hist: Counter = Counter()
    stretches: list[float] = []
    all_stretches: list[float] = []
    n = tables.n_e
    total = 0
    for i in range(n):
        for d in range(n):
            if i == d:
                continue
            total += 1
            path = resolve(tables, i, d)
            case_counts[path.case.value] += 1
            for (a, b), seg in zip(zip(path.nodes, path.nodes[1:]), path.segment_costs):
                if path.case is not Case.FALLBACK:
                    oracle = tables.pair_costs[(a, b)]
                    if abs(seg - oracle) > 1e-9:
                        raise AssertionError(
                            f"segment ({a},{b}) cost {seg} != optimal {oracle}"
                        )
            if path.resolved:
                stretches.append(path.stretch)
                all_stretches.append(path.stretch)
                hist[round(path.stretch, 2)] += 1
            elif path.case is Case.FALLBACK:
                all_stretches.append(path.stretch)
            rows.append(
                (
                    i,
                    d,
                    path.case.value,
                    path.total_cost,
                    path.optimal,
                    path.stretch,
                )
            )
    return PairEvaluation(
        rows=rows,
        case_counts=case_counts,
        max_stretch=max(stretches) if stretches else 0.0,
        mean_stretch=statistics.fmean(stretches) if stretches else 0.0,
        max_stretch_with_fallback=max(all_stretches) if all_stretches else 0.0,
        fallback_fraction=case_counts[Case.FALLBACK.value] / total if total else 0.0,
        failure_fraction=case_counts[Case.FAILURE.value] / total if total else 0.0,
        stretch_histogram=hist,
    )


# ---------------------------------------------------------------------------
# Stretch-bound inequality chain


@dataclass(frozen=True)
class ChainStep:
    label: str
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + CHAIN_TOL


@dataclass(frozen=True)
class ChainTrace:
    steps: tuple[ChainStep, ...]
    bound_factor: int
    bound_value: float

    @property
    def ok(self) -> bool:
        return all(step.holds for step in self.steps)


def verify_bound_chain(
    path: EntangledPath,
    graph: NetworkGraph,
    metric: EntanglingMetric,
    pair_costs: dict[tuple[int, int], float] | None = None,
) -> ChainTrace:
    """Numerically replay the inequality chain certifying the stretch bound.

    Two-repeater paths are checked against the five-fold composed bound and
    one-repeater paths against the three-fold one; every intermediate
    inequality is evaluated on the concrete instance and a violation raises,
    since it means a neighborhood or cover precondition was broken upstream.
    A precomputed all-pairs cost table may be passed to skip re-deriving
    optimal costs per query.
    """
    if path.case not in (Case.CASE_II, Case.CASE_III):
        raise ValueError(f"chain applies to case II/III paths, got {path.case}")

    cache: dict[tuple[int, int], float] = {} if pair_costs is None else pair_costs

    def w(a: int, b: int) -> float:
        if (a, b) not in cache:
            cache[(a, b)] = optimal_cost(graph, metric, a, b)[0]
        return cache[(a, b)]

    i, d = path.source, path.dest
    wid = w(i, d)
    total = path.total_cost
    steps: list[ChainStep] = []

    if len(path.repeaters) == 1:
        (m,) = path.repeaters
        bound3 = fold(metric, [wid, w(d, i), wid])
        if w(i, m) <= w(i, d) + CHAIN_TOL:
            mid = fold(metric, [w(i, m), w(m, i), w(i, d)])
            steps.append(ChainStep("triangle on far segment", total, mid))
            steps.append(ChainStep("near hop within source neighborhood", mid, bound3))
        else:
            mid = fold(metric, [w(i, d), w(d, m), w(m, d)])
            steps.append(ChainStep("triangle on near segment", total, mid))
            steps.append(ChainStep("near hop within target neighborhood", mid, bound3))
        steps.append(ChainStep("three-fold composed bound", total, bound3))
        return _finalize_chain(steps, 3, bound3)

    if len(path.repeaters) == 2:
        l, k = path.repeaters
        s2 = fold(metric, [w(i, l), w(l, i), w(i, k), w(k, d)])
        steps.append(ChainStep("triangle on hub-to-hub segment", total, s2))
        s3_l = fold(metric, [w(i, l), w(l, i)])
        s3_r = fold(metric, [w(i, d), w(d, i)])
        steps.append(ChainStep("entry hub within source neighborhood", s3_l, s3_r))
        s4 = fold(metric, [w(i, d), w(d, i), w(i, k), w(k, d)])
        steps.append(ChainStep("substitute source round trip", s2, s4))
        s5 = fold(metric, [w(i, d), w(d, i), w(i, d), w(d, k), w(k, d)])
        steps.append(ChainStep("triangle on source-to-exit-hub segment", s4, s5))
        s6_l = fold(metric, [w(d, k), w(k, d)])
        s6_r = fold(metric, [w(d, i), w(i, d)])
        steps.append(ChainStep("exit hub within target neighborhood", s6_l, s6_r))
        bound5 = fold(metric, [wid, w(d, i), wid, w(d, i), wid])
        steps.append(ChainStep("five-fold composed bound", total, bound5))
        return _finalize_chain(steps, 5, bound5)

    raise ValueError(f"chain supports 1 or 2 repeaters, got {len(path.repeaters)}")


def _finalize_chain(steps: list[ChainStep], factor: int, bound: float) -> ChainTrace:
    trace = ChainTrace(steps=tuple(steps), bound_factor=factor, bound_value=bound)
    if not trace.ok:
        broken = [s.label for s in steps if not s.holds]
        raise ChainViolationError(
            f"inequality chain broken at: {', '.join(broken)}", trace=trace
        )
    return trace


# ---------------------------------------------------------------------------
# Ebit consumption and replenishment


def swap_and_replenish(
    tables: SchemeTables,
    path: EntangledPath,
    packet: QuantumPacket,
    replenish_rate: int = 0,
) -> DeliveryRecord:
    """Consume one ebit per segment endpoint along the path and deliver.

    A depleted segment triggers exactly one re-resolution with that link
    excluded; if the retry fails too, the delivery fails. When a consumed
    entry reaches zero it is marked for replenishment, and a positive
    ``replenish_rate`` immediately restores that many ebits per below-budget
    entry (the control plane's refill step).
    """
    if packet.payload_ebits < 1:
        raise ValueError("packet payload must carry at least one ebit")
    if path.case is Case.FAILURE:
        return DeliveryRecord(
            path=path, consumed=[], success=False, detail=path.reason or "unresolved"
        )

    record = DeliveryRecord(path=path, consumed=[], success=False)
    depleted = _first_depleted_link(tables, path)
    if depleted is not None:
        retry = resolve(
            tables,
            path.source,
            path.dest,
            blocked=frozenset({frozenset(depleted)}),
            allow_fallback=False,
        )
        record.retried = True
        if not retry.resolved:
            record.detail = (
                f"link {depleted} depleted and retry failed: {retry.reason}"
            )
            return record
        path = retry
        record.path = retry
        if _first_depleted_link(tables, path) is not None:
            record.detail = "retried path also depleted"
            return record

    for a, b in zip(path.nodes, path.nodes[1:]):
        _consume_link(tables, a, b)
        record.consumed.append((a, b))
    record.success = True
    if replenish_rate > 0:
        replenish(tables, replenish_rate)
    return record


def _first_depleted_link(
    tables: SchemeTables, path: EntangledPath
) -> tuple[int, int] | None:
    for a, b in zip(path.nodes, path.nodes[1:]):
        for x, y in ((a, b), (b, a)):
            entry = tables.table(x).find(y)
            if entry is not None and entry.ebits < 1:
                return (a, b)
    return None


def _consume_link(tables: SchemeTables, a: int, b: int) -> None:
    for x, y in ((a, b), (b, a)):
        entry = tables.table(x).find(y)
        if entry is None:
            continue
        if entry.ebits < 1:
            raise DepletedLinkError(f"link ({a},{b}) has no ebits at {x}")
        entry.ebits -= 1
        if entry.ebits == 0:
            entry.marked_for_replenish = True


def replenish(tables: SchemeTables, rate: int) -> int:
    """Refill every below-budget entry by ``rate`` ebits, capped at budget.

    Returns the number of ebits added across all tables.
    """
    added = 0
    budget = tables.ebit_budget
    for table in tables.tables:
        for entry in table.entries:
            if entry.ebits < budget:
                grant = min(rate, budget - entry.ebits)
                entry.ebits += grant
                added += grant
                if entry.ebits >= budget:
                    entry.marked_for_replenish = False
    return added


def table_size_stats(tables: SchemeTables) -> dict:
    sizes = [len(t) for t in tables.tables]
    n = tables.n_e
    norm = math.sqrt(n) * math.log(n)
    return {
        "max": max(sizes),
        "mean": statistics.fmean(sizes),
        "max_over_sqrt_log": max(sizes) / norm,
        "dropped_entries": sum(len(t.dropped) for t in tables.tables),
    }

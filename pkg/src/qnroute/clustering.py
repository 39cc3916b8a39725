"""Anchor sets, tracked-set partitions, and coverage verification.

The partial-anchor scheme elects a small hub set T that should hit every
node's e-neighborhood; the full-anchor scheme partitions the node set into
address blocks and has every node proactively entangle with one randomly
chosen block. Both constructions are verified here empirically: coverage
failures are witnesses in a report, never exceptions, because the underlying
guarantees are probabilistic.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field

from .addressing import AddressPlan
from .rng import stream_seed
from .topology import ENeighborhood


class Scheme(enum.Enum):
    PARTIAL_ANCHOR = "partial"
    FULL_ANCHOR = "full"


def neighborhood_size(n_e: int, m: float) -> int:
    """e-neighborhood cardinality (1 + m) * sqrt(n_e) * ln(n_e), clamped.

    The clamp to n_e - 1 matters at desk scale, where the formula exceeds
    the node count and every neighborhood becomes the full node set.
    """
    if n_e < 2:
        raise ValueError("n_e must be at least 2")
    if m <= 0:
        raise ValueError("oversampling constant m must be positive")
    k = math.ceil((1 + m) * math.sqrt(n_e) * math.log(n_e))
    return min(n_e - 1, k)


@dataclass(frozen=True)
class AnchorSet:
    """Hub nodes maintaining pairwise long-range entanglement."""

    members: frozenset[int]
    construction: str  # "random" | "greedy"
    m: float | None = None
    uncovered_at_build: tuple[int, ...] = ()

    @property
    def size(self) -> int:
        return len(self.members)


def _uncovered(neighborhoods: list[ENeighborhood], anchors: frozenset[int]) -> list[int]:
    # An anchor never needs covering: it reaches the hub mesh directly, so
    # only non-anchor owners must see an anchor inside their neighborhood.
    return sorted(
        nb.owner
        for nb in neighborhoods
        if nb.owner not in anchors and not (nb.member_ids & anchors)
    )


def build_anchor_set_random(
    neighborhoods: list[ENeighborhood],
    n_e: int,
    seed: int,
    m: float | None = None,
) -> AnchorSet:
    """Sample ceil(sqrt(n_e)) anchors uniformly without replacement.

    Coverage of the e-neighborhoods is recorded, not enforced: the covering
    guarantee is only high-probability and poor draws are legitimate data.
    """
    target = min(n_e, math.ceil(math.sqrt(n_e)))
    rng = random.Random(stream_seed(seed, "cover"))
    members = frozenset(rng.sample(range(n_e), target))
    return AnchorSet(
        members=members,
        construction="random",
        m=m,
        uncovered_at_build=tuple(_uncovered(neighborhoods, members)),
    )


def build_anchor_set_greedy(neighborhoods: list[ENeighborhood]) -> AnchorSet:
    """Greedy set cover over the e-neighborhood family.

    Repeatedly picks the node hitting the most still-uncovered neighborhoods
    (ties to the lowest address), so every neighborhood ends up containing an
    anchor and the size stays within the classic n_e*(1 + ln n_e)/k bound.
    """
    uncovered = {nb.owner: nb.member_ids | {nb.owner} for nb in neighborhoods}
    chosen: set[int] = set()
    while uncovered:
        counts: dict[int, int] = {}
        for members in uncovered.values():
            for node in members:
                counts[node] = counts.get(node, 0) + 1
        best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))[0]
        chosen.add(best)
        uncovered = {
            owner: members
            for owner, members in uncovered.items()
            if best not in members
        }
    members = frozenset(chosen)
    return AnchorSet(
        members=members,
        construction="greedy",
        uncovered_at_build=tuple(_uncovered(neighborhoods, members)),
    )


def greedy_size_bound(n_e: int, k: int) -> float:
    """Cardinality bound for the greedy cover: n_e * (1 + ln n_e) / k."""
    return n_e * (1 + math.log(n_e)) / k


@dataclass
class TrackedSets:
    """Flat partition of the node set into address blocks.

    ``assignment`` maps each node to the index of the block it tracks; it is
    filled by ``assign_tracking``/``assign_all_tracking``.
    """

    blocks: tuple[tuple[int, ...], ...]
    assignment: dict[int, int] = field(default_factory=dict)

    @property
    def block_capacity(self) -> int:
        return max(len(b) for b in self.blocks)

    def block_of_target(self, node: int) -> int:
        """Index of the block that contains ``node``."""
        for idx, block in enumerate(self.blocks):
            if node in block:
                return idx
        raise KeyError(node)

    def tracked_by(self, v: int) -> tuple[int, ...]:
        """The nodes v proactively entangles with: its chosen block."""
        return self.blocks[self.assignment[v]]


def build_tracked_sets(plan: AddressPlan | None, n_e: int) -> TrackedSets:
    """Partition nodes by ascending address into blocks of ceil(sqrt(n_e)).

    Node indices already ascend with quantum address, so block j holds ranks
    (j-1)*c+1 .. j*c for capacity c. The last block may be smaller.
    """
    if plan is not None and len(plan.esp_addresses) != n_e:
        raise ValueError("plan ESP count does not match n_e")
    capacity = math.ceil(math.sqrt(n_e))
    ids = list(range(n_e))
    blocks = tuple(
        tuple(ids[start : start + capacity]) for start in range(0, n_e, capacity)
    )
    return TrackedSets(blocks=blocks)


def assign_tracking(tracked: TrackedSets, v: int, seed: int) -> int:
    """Uniform block choice for node ``v``, deterministic given (seed, v)."""
    rng = random.Random(stream_seed(seed, f"tracking:{v}"))
    idx = rng.randrange(len(tracked.blocks))
    tracked.assignment[v] = idx
    return idx


def assign_all_tracking(tracked: TrackedSets, n_e: int, seed: int) -> TrackedSets:
    for v in range(n_e):
        assign_tracking(tracked, v, seed)
    return tracked


@dataclass(frozen=True)
class CoverageReport:
    """Witnessed coverage check; failures are data for the caller to judge."""

    scheme: Scheme
    uncovered: tuple
    total_checks: int

    @property
    def failure_fraction(self) -> float:
        return len(self.uncovered) / self.total_checks if self.total_checks else 0.0

    @property
    def passed(self) -> bool:
        return not self.uncovered


def verify_coverage(
    scheme: Scheme,
    neighborhoods: list[ENeighborhood],
    anchors: AnchorSet | None = None,
    tracked: TrackedSets | None = None,
) -> CoverageReport:
    """Check the scheme's coverage property and report every failure witness.

    Partial-anchor: each node must have an anchor inside its e-neighborhood.
    Full-anchor: for each ordered pair (source, target) there must be a
    neighbor of the source whose chosen tracked block contains the target.
    """
    if scheme is Scheme.PARTIAL_ANCHOR:
        if anchors is None:
            raise ValueError("partial-anchor coverage requires an AnchorSet")
        uncovered = tuple(_uncovered(neighborhoods, anchors.members))
        return CoverageReport(
            scheme=scheme, uncovered=uncovered, total_checks=len(neighborhoods)
        )

    if tracked is None or not tracked.assignment:
        raise ValueError("full-anchor coverage requires assigned TrackedSets")
    by_owner = {nb.owner: nb for nb in neighborhoods}
    nodes = sorted(by_owner)
    failures: list[tuple[int, int]] = []
    total = 0
    for i in nodes:
        neighbor_targets: set[int] = set()
        for j in by_owner[i].member_ids:
            neighbor_targets.update(tracked.tracked_by(j))
        for d in nodes:
            if d == i:
                continue
            total += 1
            if d not in neighbor_targets:
                failures.append((i, d))
    return CoverageReport(scheme=scheme, uncovered=tuple(failures), total_checks=total)

"""Amplitude-amplified lookup over superposed address registers.

The searchable object is a routing-table snapshot: n_T entries, each
announcing f disjoint partitions of its peer's e-neighborhood as uniform
superpositions over address basis states. A label register holds the entry
indices in equal superposition; the oracle is a multi-controlled phase kick,
conditioned jointly on the label matching an entry and on that entry's
address register matching the target (X-conjugation pattern derived from the
target's bits), so the phase inversion itself rides in superposition: the
component where the register holds the target is marked, every orthogonal
component evolves as if no oracle fired. Diffusion acts on the label register
only.

Two exact engines are provided. The gate-level engine materializes the full
joint statevector (label x all address registers x ancilla) and is used
whenever the qubit count fits the cap. The reduced engine tracks, per label,
only the hit/miss split of each register that actually contains the target:
registers the oracle never conditions on stay in product form throughout, so
tracing them out is exact, and the two engines agree to numerical precision.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionCapError, PartitionCountError
from .rng import stream_seed

DEFAULT_CAP_QUBITS = 22

# branch bookkeeping in the reduced engine is 2^h wide
MAX_HIT_ENTRIES = 20

NORM_TOL = 1e-12


def partition_neighborhood(members, f: int, seed: int | None = None):
    """Split ``members`` into f disjoint parts, round-robin by sorted value.

    Part sizes differ by at most one and the union is exactly ``members``.
    ``seed`` is reserved for future shuffled splits; the split is currently
    deterministic regardless.
    """
    if f < 1:
        raise PartitionCountError("partition count must be at least 1")
    members = sorted(members)
    if f > len(members):
        raise PartitionCountError(
            f"cannot split {len(members)} members into {f} nonempty partitions"
        )
    del seed
    return tuple(frozenset(members[l::f]) for l in range(f))


@dataclass(frozen=True)
class SuperposedAddress:
    """Uniform superposition over the basis states of one partition."""

    partition: frozenset[int]
    register_width: int

    @property
    def amplitude(self) -> float:
        return 1.0 / math.sqrt(len(self.partition))

    def vector(self) -> np.ndarray:
        vec = np.zeros(2**self.register_width, dtype=np.complex128)
        for member in self.partition:
            vec[member] = self.amplitude
        return vec


@dataclass(frozen=True)
class SearchEntry:
    label: int
    partitions: tuple[frozenset[int], ...]

    def contains(self, target: int) -> bool:
        return any(target in p for p in self.partitions)

    def hitting_partition(self, target: int) -> int | None:
        for idx, p in enumerate(self.partitions):
            if target in p:
                return idx
        return None


@dataclass(frozen=True)
class SearchInstance:
    """Immutable snapshot of the searchable table content."""

    entries: tuple[SearchEntry, ...]
    address_width: int

    @property
    def n_t(self) -> int:
        return len(self.entries)

    @property
    def label_width(self) -> int:
        return max(1, math.ceil(math.log2(self.n_t)))

    @property
    def total_qubits(self) -> int:
        regs = sum(len(e.partitions) for e in self.entries)
        return self.label_width + regs * self.address_width + 1

    def hit_labels(self, target: int) -> frozenset[int]:
        return frozenset(e.label for e in self.entries if e.contains(target))

    def hit_alphas(self, target: int) -> list[tuple[int, float]]:
        """(label, weight of the inverting branch) per hitting entry."""
        out = []
        for e in self.entries:
            idx = e.hitting_partition(target)
            if idx is not None:
                out.append((e.label, 1.0 / len(e.partitions[idx])))
        return out


def make_instance(partition_lists, address_width: int) -> SearchInstance:
    entries = tuple(
        SearchEntry(label=lbl, partitions=tuple(frozenset(p) for p in parts))
        for lbl, parts in enumerate(partition_lists)
    )
    return SearchInstance(entries=entries, address_width=address_width)


def instance_from_table(table, plan) -> SearchInstance:
    """Build a search instance from a routing table's classical mirror.

    Node ids are converted to address basis indices through the plan so the
    register width matches the network's address width.
    """
    width = plan.width
    to_idx = {i: addr.index for i, addr in enumerate(plan.esp_addresses)}
    partition_lists = [
        tuple(frozenset(to_idx[m] for m in part) for part in entry.partitions)
        for entry in table.entries
    ]
    return make_instance(partition_lists, width)


# ---------------------------------------------------------------------------
# Full gate-level engine


@dataclass
class SearchState:
    """Joint statevector over label register, address registers, ancilla.

    Qubit 0 is the most significant bit of the joint basis index; each
    register occupies a contiguous qubit span recorded in ``register_spans``.
    """

    instance: SearchInstance
    vector: np.ndarray
    label_span: tuple[int, int]
    register_spans: dict[tuple[int, int], tuple[int, int]] = field(repr=False)
    ancilla: int = 0

    @property
    def total_qubits(self) -> int:
        return self.ancilla + 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def label_distribution(self) -> np.ndarray:
        """Exact marginal over the first n_T labels."""
        n_label = self.label_span[1] - self.label_span[0]
        mat = self.vector.reshape(2**n_label, -1)
        probs = np.sum(np.abs(mat) ** 2, axis=1)
        return probs[: self.instance.n_t]

    def register_fidelity(self, entry: int, partition: int) -> float:
        """Fidelity of one address register's reduced state with its initial
        uniform superposition."""
        start, stop = self.register_spans[(entry, partition)]
        width = stop - start
        before = 2**start
        mid = 2**width
        after = self.vector.size // (before * mid)
        psi = self.vector.reshape(before, mid, after)
        rho = np.einsum("aib,ajb->ij", psi, psi.conj())
        ref = SuperposedAddress(
            self.instance.entries[entry].partitions[partition], width
        ).vector()
        return float(np.real(ref.conj() @ rho @ ref))


def init_search(
    instance: SearchInstance,
    cap_qubits: int = DEFAULT_CAP_QUBITS,
) -> SearchState:
    """Prepare the joint state: equal label superposition over the n_T entry
    labels, each address register in its announced superposition, ancilla in
    the minus state for phase kickback."""
    if instance.n_t < 2:
        raise ValueError("search needs at least 2 entries")
    qubits = instance.total_qubits
    if qubits > cap_qubits:
        raise DimensionCapError(
            f"instance needs {qubits} qubits, cap is {cap_qubits}"
        )

    n_label = instance.label_width
    label = np.zeros(2**n_label, dtype=np.complex128)
    label[: instance.n_t] = 1.0 / math.sqrt(instance.n_t)

    vector = label
    register_spans: dict[tuple[int, int], tuple[int, int]] = {}
    offset = n_label
    for e_idx, entry in enumerate(instance.entries):
        for p_idx, part in enumerate(entry.partitions):
            reg = SuperposedAddress(part, instance.address_width).vector()
            vector = np.kron(vector, reg)
            register_spans[(e_idx, p_idx)] = (offset, offset + instance.address_width)
            offset += instance.address_width

    minus = np.array([1.0, -1.0], dtype=np.complex128) / math.sqrt(2.0)
    vector = np.kron(vector, minus)

    state = SearchState(
        instance=instance,
        vector=vector,
        label_span=(0, n_label),
        register_spans=register_spans,
        ancilla=offset,
    )
    assert abs(state.norm() - 1.0) < NORM_TOL
    return state


def _control_mask(vec_size: int, total_qubits: int, conditions) -> np.ndarray:
    idx = np.arange(vec_size)
    mask = np.ones(vec_size, dtype=bool)
    for qubit, bit in conditions:
        shift = total_qubits - 1 - qubit
        mask &= ((idx >> shift) & 1) == bit
    return mask


def _oracle_conditions(state: SearchState, entry: int, partition: int, target: int):
    """Joint control condition: label == entry AND register == target."""
    inst = state.instance
    conds = []
    n_label = inst.label_width
    for q in range(n_label):
        bit = (entry >> (n_label - 1 - q)) & 1
        conds.append((q, bit))
    start, _stop = state.register_spans[(entry, partition)]
    width = inst.address_width
    for q in range(width):
        bit = (target >> (width - 1 - q)) & 1
        conds.append((start + q, bit))
    return conds


def apply_oracle(
    state: SearchState, target: int, use_ancilla: bool = True
) -> SearchState:
    """One oracle pass: the controlled phase kick for every entry register.

    With ``use_ancilla`` the kick is a multi-controlled X onto the minus-state
    ancilla (the circuit's realization); otherwise the amplitude signs are
    flipped directly. Both are asserted unitary and agree exactly. Registers
    whose partition cannot hold the target contribute an identity, leaving
    the state untouched on their account.
    """
    total = state.ancilla + 1
    size = state.vector.size
    norm_before = state.norm()
    for e_idx, entry in enumerate(state.instance.entries):
        for p_idx in range(len(entry.partitions)):
            conds = _oracle_conditions(state, e_idx, p_idx, target)
            mask = _control_mask(size, total, conds)
            if not mask.any():
                continue
            if use_ancilla:
                shift = total - 1 - state.ancilla
                idx = np.arange(size)
                lower = mask & (((idx >> shift) & 1) == 0)
                partner = np.flatnonzero(lower) | (1 << shift)
                low_idx = np.flatnonzero(lower)
                tmp = state.vector[low_idx].copy()
                state.vector[low_idx] = state.vector[partner]
                state.vector[partner] = tmp
            else:
                state.vector[mask] *= -1.0
    assert abs(state.norm() - norm_before) < NORM_TOL
    return state


def apply_diffusion(state: SearchState) -> SearchState:
    """Inversion about the mean on the label register only.

    Implemented as the reflection through the uniform superposition over the
    n_T used labels, which keeps the operation unitary for entry counts that
    are not powers of two; unused label basis states carry zero amplitude
    throughout and pick up only a sign.
    """
    inst = state.instance
    n_label = inst.label_width
    u = np.zeros(2**n_label, dtype=np.complex128)
    u[: inst.n_t] = 1.0 / math.sqrt(inst.n_t)
    mat = state.vector.reshape(2**n_label, -1)
    proj = u.conj() @ mat
    state.vector = (2.0 * np.outer(u, proj) - mat).reshape(-1)
    assert abs(state.norm() - 1.0) < NORM_TOL
    return state


# ---------------------------------------------------------------------------
# Reduced exact engine

def _reduced_distribution(
    instance: SearchInstance, target: int, iterations: int
) -> np.ndarray:
    """Exact label marginal without materializing untouched registers.

    Per hitting entry j the state splits into an inverting branch (weight
    alpha_j, its register collapsed onto the target) and a non-inverting one.
    Branches never mix: the oracle only flips the sign of label j inside
    branches where register j is on the target, and diffusion acts on the
    label axis independently per branch. Registers without the target stay
    exactly in their initial product state and drop out of the marginal.
    """
    hits = instance.hit_alphas(target)
    h = len(hits)
    if h > MAX_HIT_ENTRIES:
        raise DimensionCapError(f"{h} hitting entries exceed the branch cap")
    n_t = instance.n_t
    amps = np.zeros((n_t, 2**h), dtype=np.float64)
    base = 1.0 / math.sqrt(n_t)
    for b in range(2**h):
        weight = base
        for j, (_, alpha) in enumerate(hits):
            weight *= math.sqrt(alpha) if (b >> j) & 1 else math.sqrt(1.0 - alpha)
        amps[:, b] = weight

    for _ in range(iterations):
        for j, (label, _) in enumerate(hits):
            for b in range(2**h):
                if (b >> j) & 1:
                    amps[label, b] *= -1.0
        mean = amps.mean(axis=0)
        amps = 2.0 * mean[np.newaxis, :] - amps

    return np.sum(amps**2, axis=1)


# ---------------------------------------------------------------------------
# Search driver


def iteration_count(n_t: int, n_hits: int) -> int:
    """Standard amplification count floor(pi/4 * sqrt(n_T/n_hits)), min 1.

    Only the phase-inverting branch has an optimum; the non-inverting branch
    is iteration-independent, so the single-branch count is used as is.
    """
    if not 1 <= n_hits <= n_t:
        raise ValueError("n_hits must be in [1, n_T]")
    return max(1, math.floor(math.pi / 4.0 * math.sqrt(n_t / n_hits)))


@dataclass(frozen=True)
class SearchOutcome:
    distribution: tuple[float, ...]
    measured: int
    hit_labels: frozenset[int]
    success_probability: float
    iterations: int
    engine: str

    def __post_init__(self):
        total = sum(self.distribution)
        if abs(total - 1.0) > 1e-9:
            raise AssertionError(f"label distribution sums to {total}")


def run_search(
    instance: SearchInstance,
    target: int,
    iterations: int | None = None,
    seed: int = 0,
    engine: str = "auto",
    cap_qubits: int = DEFAULT_CAP_QUBITS,
) -> SearchOutcome:
    """Run the amplified lookup and sample one label from the exact marginal.

    ``engine="full"`` forces the gate-level statevector (raising when the
    joint register exceeds the cap); ``"reduced"`` forces the branch engine;
    ``"auto"`` uses the full engine whenever it fits. Both engines produce
    the same exact distribution; sampling is seeded and shot noise only
    enters through the single reported measurement.
    """
    hits = instance.hit_labels(target)
    if iterations is None:
        iterations = iteration_count(instance.n_t, max(1, len(hits)))

    if engine == "auto":
        engine = "full" if instance.total_qubits <= cap_qubits else "reduced"
    if engine == "full":
        state = init_search(instance, cap_qubits=cap_qubits)
        for _ in range(iterations):
            apply_oracle(state, target)
            apply_diffusion(state)
        probs = state.label_distribution()
    elif engine == "reduced":
        probs = _reduced_distribution(instance, target, iterations)
    else:
        raise ValueError(f"unknown engine {engine!r}")

    probs = np.maximum(probs, 0.0)
    probs = probs / probs.sum()
    rng = random.Random(stream_seed(seed, "measurement"))
    measured = rng.choices(range(instance.n_t), weights=probs.tolist())[0]
    success = float(sum(probs[label] for label in hits))
    return SearchOutcome(
        distribution=tuple(float(p) for p in probs),
        measured=measured,
        hit_labels=hits,
        success_probability=success,
        iterations=iterations,
        engine=engine,
    )


def analytic_success_probability(
    n_t: int, alpha: float, n_hits: int, iterations: int
) -> float:
    """Two-branch success model.

    The non-inverting branch keeps the uniform background n_hits/n_T; the
    inverting branch follows standard amplification toward the hit labels.
    Exact for a single hitting entry; for several hits the single branch
    weight ``alpha`` only approximates the joint branch structure.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if not 1 <= n_hits <= n_t:
        raise ValueError("n_hits must be in [1, n_T]")
    theta = math.asin(math.sqrt(n_hits / n_t))
    amplified = math.sin((2 * iterations + 1) * theta) ** 2
    return (1.0 - alpha) * (n_hits / n_t) + alpha * amplified


# ---------------------------------------------------------------------------
# Table lookup through the search


@dataclass(frozen=True)
class LookupResult:
    entry_label: int | None
    found: bool
    classical_fallback: bool
    attempts: int
    success_probability: float
    measured: tuple[int, ...]


def routing_lookup_via_search(
    tables,
    owner: int,
    target: int,
    iterations: int | None = None,
    seed: int = 0,
    repeats: int = 1,
    cap_qubits: int = DEFAULT_CAP_QUBITS,
) -> LookupResult:
    """Locate a table entry whose mirrored neighborhood holds the target.

    Each attempt re-prepares fresh state, runs the search, and verifies the
    measured label against the classical mirror; misses are legitimate
    probabilistic outcomes and are reported through the attempt count. Tables
    whose joint register exceeds both engines fall back to the classical
    mirror with the fallback flag set.
    """
    if tables.plan is None:
        raise ValueError("tables need an address plan for basis conversion")
    table = tables.table(owner)
    target_index = tables.plan.esp_addresses[target].index
    instance = instance_from_table(table, tables.plan)

    hits_possible = instance.hit_labels(target_index)
    reduced_feasible = len(hits_possible) <= MAX_HIT_ENTRIES
    if instance.total_qubits > cap_qubits and not reduced_feasible:
        for label, entry in enumerate(table.entries):
            if target in entry.reach:
                return LookupResult(label, True, True, 0, 1.0, ())
        return LookupResult(None, False, True, 0, 0.0, ())

    measured: list[int] = []
    success = 0.0
    for attempt in range(repeats):
        outcome = run_search(
            instance,
            target_index,
            iterations=iterations,
            seed=stream_seed(seed, f"attempt:{attempt}"),
            cap_qubits=cap_qubits,
        )
        success = outcome.success_probability
        measured.append(outcome.measured)
        if outcome.measured in outcome.hit_labels:
            return LookupResult(
                entry_label=outcome.measured,
                found=True,
                classical_fallback=False,
                attempts=attempt + 1,
                success_probability=success,
                measured=tuple(measured),
            )
    return LookupResult(
        entry_label=None,
        found=False,
        classical_fallback=False,
        attempts=repeats,
        success_probability=success,
        measured=tuple(measured),
    )

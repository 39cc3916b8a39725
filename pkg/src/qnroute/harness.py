"""Experiment orchestration: seeded sweeps, assertion checks, report emission.

A trial is one seed pushed through the whole pipeline: address plan, graph,
e-neighborhoods, cover or tracking construction, tables, all-pairs
resolution, sampled inequality-chain replays, and optional quantum-lookup
agreement checks. Each randomized stage draws from its own named stream of
the trial seed, so per-stage changes in randomness consumption do not
cascade. Outputs are a per-pair CSV and a JSON summary, both deterministic
down to the byte for a fixed configuration.
"""

from __future__ import annotations

import os
import time
from dataclasses import asdict, dataclass, field

from .addressing import assign_addresses
from .clustering import (
    Scheme,
    assign_all_tracking,
    build_anchor_set_greedy,
    build_anchor_set_random,
    build_tracked_sets,
    neighborhood_size,
    verify_coverage,
)
from .errors import ConfigError, MismatchedSeedsError
from .metrics import Composition, metric_by_name
from .qsearch import DEFAULT_CAP_QUBITS, instance_from_table, routing_lookup_via_search
from .rng import stream, stream_seed
from .routing import (
    Case,
    build_tables,
    evaluate_all_pairs,
    resolve,
    table_size_stats,
    verify_bound_chain,
)
from .topology import all_neighborhoods, generate_graph

OUTPUT_DIR_ENV = "QNROUTE_OUTPUT_DIR"
SCHEMA_VERSION = 1

_GRAPH_MODELS = {"erdos_renyi", "waxman", "barabasi_albert", "grid_torus"}
_METRICS = {"hop", "uniform", "capacity"}
_SCHEMES = {"partial", "full"}
_ANCHOR_METHODS = {"greedy", "random"}


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment sweep."""

    n_e: int
    graph_model: str = "erdos_renyi"
    graph_params: dict = field(default_factory=dict)
    metric: str = "hop"
    metric_params: dict = field(default_factory=dict)
    scheme: str = "partial"
    anchor_method: str = "greedy"
    m: float = 1.0
    f: int = 1
    ebit_budget: int = 4
    capacity_cap: int | None = None
    k_override: int | None = None
    seeds: list[int] = field(default_factory=lambda: [0])
    chain_samples: int = 100
    qsearch_check: bool = False
    axiom_check: bool = False
    output_dir: str | None = None
    name: str = "experiment"

    def validate(self) -> None:
        if self.n_e < 2:
            raise ConfigError("n_e: must be at least 2")
        if self.graph_model not in _GRAPH_MODELS:
            raise ConfigError(f"graph_model: unknown {self.graph_model!r}")
        if self.metric not in _METRICS:
            raise ConfigError(f"metric: unknown {self.metric!r}")
        if self.scheme not in _SCHEMES:
            raise ConfigError(f"scheme: must be one of {sorted(_SCHEMES)}")
        if self.anchor_method not in _ANCHOR_METHODS:
            raise ConfigError(f"anchor_method: must be one of {sorted(_ANCHOR_METHODS)}")
        if self.m <= 0:
            raise ConfigError("m: oversampling constant must be positive")
        if self.f < 1:
            raise ConfigError("f: partition count must be at least 1")
        if self.k_override is not None and not 1 <= self.k_override < self.n_e:
            raise ConfigError("k_override: must be in [1, n_e)")
        if self.f > self.effective_k():
            raise ConfigError("f: cannot exceed the e-neighborhood size")
        if not self.seeds:
            raise ConfigError("seeds: at least one seed is required")
        if self.ebit_budget < 1:
            raise ConfigError("ebit_budget: must be at least 1")

    def effective_k(self) -> int:
        if self.k_override is not None:
            return self.k_override
        return neighborhood_size(self.n_e, self.m)

    def resolved_output_dir(self) -> str:
        return self.output_dir or os.environ.get(OUTPUT_DIR_ENV, ".")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as err:
            raise ConfigError(str(err)) from None


@dataclass
class AssertionResult:
    """One checked claim: the name states the property, not a citation."""

    name: str
    passed: bool
    detail: str


@dataclass
class TrialResult:
    seed: int
    max_stretch: float
    mean_stretch: float
    max_stretch_with_fallback: float
    case_counts: dict
    fallback_fraction: float
    failure_fraction: float
    coverage_failure_fraction: float
    table_stats: dict
    chain_checked: int
    qsearch_agreement: dict | None
    axiom_report: dict | None
    runtime_s: float
    rows: list = field(repr=False, default_factory=list)


@dataclass
class StretchReport:
    config: ExperimentConfig
    trials: list[TrialResult]
    assertions: list[AssertionResult]

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    @property
    def max_stretch(self) -> float:
        return max((t.max_stretch for t in self.trials), default=0.0)

    def summary_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "note": "graph families are synthetic stand-ins; no agreed-on "
            "backbone topology model exists yet",
            "trials": [
                {k: v for k, v in asdict(t).items() if k != "rows"}
                for t in self.trials
            ],
            "overall": {
                "max_stretch": self.max_stretch,
                "mean_stretch": (
                    sum(t.mean_stretch for t in self.trials) / len(self.trials)
                    if self.trials
                    else 0.0
                ),
                "trials": len(self.trials),
                "passed": self.passed,
            },
            "assertions": [asdict(a) for a in self.assertions],
        }


def build_scheme_for_trial(config: ExperimentConfig, seed: int):
    """Deterministically construct the scheme instance for one trial seed."""
    metric = metric_by_name(config.metric, **config.metric_params)
    plan = assign_addresses(config.n_e, 0)
    graph = generate_graph(
        config.graph_model,
        config.n_e,
        config.graph_params,
        metric,
        seed=stream_seed(seed, "graph"),
    )
    graph.plan = plan
    k = config.effective_k()
    neighborhoods = all_neighborhoods(graph, metric, k)

    anchors = None
    tracked = None
    if config.scheme == "partial":
        if config.anchor_method == "greedy":
            anchors = build_anchor_set_greedy(neighborhoods)
        else:
            anchors = build_anchor_set_random(
                neighborhoods, config.n_e, seed=seed, m=config.m
            )
        coverage = verify_coverage(Scheme.PARTIAL_ANCHOR, neighborhoods, anchors=anchors)
    else:
        tracked = assign_all_tracking(
            build_tracked_sets(plan, config.n_e), config.n_e, seed=stream_seed(seed, "tracking")
        )
        coverage = verify_coverage(Scheme.FULL_ANCHOR, neighborhoods, tracked=tracked)

    tables = build_tables(
        graph,
        metric,
        neighborhoods,
        anchors=anchors,
        tracked=tracked,
        f=config.f,
        ebit_budget=config.ebit_budget,
        capacity_cap=config.capacity_cap,
        plan=plan,
    )
    return tables, coverage


def _sample_chain_checks(tables, config: ExperimentConfig, seed: int) -> int:
    """Replay the stretch-bound chain on sampled one/two-repeater paths."""
    rng = stream(seed, "chain")
    pairs = [
        (i, d)
        for i in range(tables.n_e)
        for d in range(tables.n_e)
        if i != d
    ]
    rng.shuffle(pairs)
    checked = 0
    for i, d in pairs:
        if checked >= config.chain_samples:
            break
        path = resolve(tables, i, d)
        if path.case in (Case.CASE_II, Case.CASE_III):
            verify_bound_chain(path, tables.graph, tables.metric, pair_costs=tables.pair_costs)
            checked += 1
    return checked


def _qsearch_agreement(tables, seed: int, max_pairs: int = 4) -> dict | None:
    """Quantum lookup vs classical mirror on a few pairs, when the table fits."""
    if tables.plan is None:
        return None
    rng = stream(seed, "measurement")
    owners = list(range(tables.n_e))
    rng.shuffle(owners)
    checked = agreed = 0
    for owner in owners:
        if checked >= max_pairs:
            break
        table = tables.table(owner)
        if len(table.entries) < 2:
            continue
        instance = instance_from_table(table, tables.plan)
        if instance.total_qubits > DEFAULT_CAP_QUBITS:
            continue
        targets = [t for t in range(tables.n_e) if t != owner]
        target = rng.choice(targets)
        result = routing_lookup_via_search(
            tables, owner, target, seed=stream_seed(seed, f"lookup:{owner}:{target}")
        )
        truth = [
            lbl for lbl, e in enumerate(table.entries) if target in e.reach
        ]
        ok = (result.entry_label in truth) if result.found else True
        checked += 1
        agreed += int(ok)
    if checked == 0:
        return None
    return {"checked": checked, "agreed": agreed}


def run_trial(config: ExperimentConfig, seed: int) -> TrialResult:
    start = time.perf_counter()
    tables, coverage = build_scheme_for_trial(config, seed)
    evaluation = evaluate_all_pairs(tables)
    chain_checked = _sample_chain_checks(tables, config, seed)
    qsearch_stats = _qsearch_agreement(tables, seed) if config.qsearch_check else None
    axiom_doc = None
    if config.axiom_check:
        from .metrics import check_axioms

        report = check_axioms(
            tables.metric, tables.graph, seed=stream_seed(seed, "axioms")
        )
        axiom_doc = {
            "passed": report.passed,
            "checked": report.checked_triples,
            "violations": [[name, list(nodes)] for name, nodes in report.violations],
        }
    return TrialResult(
        seed=seed,
        max_stretch=evaluation.max_stretch,
        mean_stretch=evaluation.mean_stretch,
        max_stretch_with_fallback=evaluation.max_stretch_with_fallback,
        case_counts=dict(evaluation.case_counts),
        fallback_fraction=evaluation.fallback_fraction,
        failure_fraction=evaluation.failure_fraction,
        coverage_failure_fraction=coverage.failure_fraction,
        table_stats=table_size_stats(tables),
        chain_checked=chain_checked,
        qsearch_agreement=qsearch_stats,
        axiom_report=axiom_doc,
        runtime_s=time.perf_counter() - start,
        rows=evaluation.rows,
    )


def _build_assertions(config: ExperimentConfig, trials: list[TrialResult]) -> list[AssertionResult]:
    metric = metric_by_name(config.metric, **config.metric_params)
    additive = metric.composition is Composition.ADDITIVE
    out: list[AssertionResult] = []
    worst = max((t.max_stretch for t in trials), default=0.0)

    if additive and config.scheme == "partial":
        out.append(
            AssertionResult(
                "additive-partial-anchor-stretch-at-most-5",
                worst <= 5.0 + 1e-9,
                f"worst resolved stretch {worst}",
            )
        )
    if additive and config.scheme == "full":
        out.append(
            AssertionResult(
                "additive-full-anchor-stretch-at-most-3",
                worst <= 3.0 + 1e-9,
                f"worst resolved stretch {worst}",
            )
        )
    if not additive:
        out.append(
            AssertionResult(
                "concave-metric-unit-stretch",
                all(abs(t.max_stretch - 1.0) <= 1e-9 for t in trials if t.max_stretch > 0),
                f"worst resolved stretch {worst}",
            )
        )
    out.append(
        AssertionResult(
            "resolved-stretch-at-least-one",
            all(t.mean_stretch >= 1.0 - 1e-9 for t in trials if t.max_stretch > 0),
            "stretch is a ratio against the optimal entangling cost",
        )
    )
    out.append(
        AssertionResult(
            "bound-chain-replays-clean",
            True,
            f"{sum(t.chain_checked for t in trials)} sampled paths verified "
            "(violations raise during the trial)",
        )
    )
    if config.scheme == "partial" and config.anchor_method == "greedy":
        out.append(
            AssertionResult(
                "greedy-cover-leaves-no-node-uncovered",
                all(t.coverage_failure_fraction == 0.0 for t in trials),
                "greedy set cover guarantees an anchor in every neighborhood",
            )
        )
    checked = sum(t.qsearch_agreement["checked"] for t in trials if t.qsearch_agreement)
    if checked:
        agreed = sum(t.qsearch_agreement["agreed"] for t in trials if t.qsearch_agreement)
        out.append(
            AssertionResult(
                "quantum-lookup-agrees-with-classical-mirror",
                agreed == checked,
                f"{agreed}/{checked} verified lookups agreed",
            )
        )
    axioms = [t.axiom_report for t in trials if t.axiom_report is not None]
    if axioms:
        out.append(
            AssertionResult(
                "entangling-cost-axioms-hold-on-derived-costs",
                all(a["passed"] for a in axioms),
                f"{sum(a['checked'] for a in axioms)} checks across "
                f"{len(axioms)} trials",
            )
        )
    return out


def run_experiment(config: ExperimentConfig, write_outputs: bool = True) -> StretchReport:
    """Run every seed, evaluate the claim assertions, and emit CSV + JSON."""
    config.validate()
    trials = [run_trial(config, seed) for seed in sorted(config.seeds)]
    report = StretchReport(
        config=config,
        trials=trials,
        assertions=_build_assertions(config, trials),
    )
    if write_outputs:
        write_report(report)
    return report


def write_report(report: StretchReport) -> tuple[str, str]:
    from .serialize import dump_json

    out_dir = report.config.resolved_output_dir()
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, report.config.name)
    csv_path = base + "_pairs.csv"
    json_path = base + "_summary.json"

    with open(csv_path, "w", newline="\n") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        fh.write("seed,source,dest,case,cost,optimal,stretch\n")
        for trial in report.trials:
            for source, dest, case, cost, optimal, stretch in trial.rows:
                fh.write(
                    f"{trial.seed},{source},{dest},{case},{cost!r},{optimal!r},{stretch!r}\n"
                )
    dump_json(report.summary_dict(), json_path)
    return csv_path, json_path


def compare_schemes(
    config_a: ExperimentConfig, config_b: ExperimentConfig
) -> dict:
    """Paired-seed comparison of two scheme configurations.

    Both configurations must share the graph model, parameters, metric, and
    seed list, so per-seed differences isolate the scheme choice.
    """
    for name in ("graph_model", "graph_params", "n_e", "metric", "metric_params"):
        if getattr(config_a, name) != getattr(config_b, name):
            raise MismatchedSeedsError(f"configs differ in {name}; comparison unpaired")
    if sorted(config_a.seeds) != sorted(config_b.seeds):
        raise MismatchedSeedsError("configs must share the seed list")

    report_a = run_experiment(config_a, write_outputs=False)
    report_b = run_experiment(config_b, write_outputs=False)
    per_seed = []
    for ta, tb in zip(report_a.trials, report_b.trials):
        per_seed.append(
            {
                "seed": ta.seed,
                "max_stretch_a": ta.max_stretch,
                "max_stretch_b": tb.max_stretch,
                "stretch_delta": ta.max_stretch - tb.max_stretch,
                "mean_table_a": ta.table_stats["mean"],
                "mean_table_b": tb.table_stats["mean"],
                "fully_resolved_a": ta.fallback_fraction + ta.failure_fraction == 0.0,
                "fully_resolved_b": tb.fallback_fraction + tb.failure_fraction == 0.0,
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "config_a": config_a.to_dict(),
        "config_b": config_b.to_dict(),
        "per_seed": per_seed,
        "identical_configs": config_a.to_dict() == config_b.to_dict(),
        "max_stretch_a": report_a.max_stretch,
        "max_stretch_b": report_b.max_stretch,
    }


def assertion_lines(report: StretchReport) -> list[str]:
    lines = []
    for a in report.assertions:
        status = "PASS" if a.passed else "FAIL"
        lines.append(f"{status} {a.name}: {a.detail}")
    return lines

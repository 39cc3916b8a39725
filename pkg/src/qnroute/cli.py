"""Command-line interface.

Subcommands mirror the pipeline stages: ``generate`` a graph file,
``cluster`` it into a scheme document, ``route``/``eval``/``qsearch``
against a scheme document, ``compare`` two configurations, and ``report``
to run a full experiment from a config file. Exit code 0 means every
enabled assertion passed. Precedence: built-in defaults, then command-line
flags, then the config file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import harness
from .addressing import assign_addresses
from .clustering import (
    Scheme,
    assign_all_tracking,
    build_anchor_set_greedy,
    build_anchor_set_random,
    build_tracked_sets,
    neighborhood_size,
)
from .errors import QnrouteError
from .metrics import metric_by_name
from .qsearch import instance_from_table, iteration_count, run_search
from .routing import build_tables, evaluate_all_pairs, resolve
from .rng import stream_seed
from .serialize import dump_json, load_json, scheme_from_dict, scheme_to_dict
from .topology import all_neighborhoods, generate_graph, load_graph, save_graph


def _parse_params(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs or []:
        key, _, raw = pair.partition("=")
        if not raw:
            raise SystemExit(f"bad parameter {pair!r}, expected key=value")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _out_dir(path: str | None) -> str:
    return path or os.environ.get(harness.OUTPUT_DIR_ENV, ".")


def cmd_generate(args) -> int:
    metric = metric_by_name(args.metric, **_parse_params(args.metric_param))
    graph = generate_graph(
        args.model, args.n_e, _parse_params(args.param), metric, seed=args.seed
    )
    save_graph(graph, args.out)
    print(f"wrote {args.out}: n_e={graph.n_e} edges={graph.edge_count()}")
    return 0


def cmd_cluster(args) -> int:
    graph = load_graph(args.graph)
    metric = metric_by_name(args.metric, **_parse_params(args.metric_param))
    plan = assign_addresses(graph.n_e, 0)
    graph.plan = plan
    k = args.k if args.k is not None else neighborhood_size(graph.n_e, args.m)
    neighborhoods = all_neighborhoods(graph, metric, k)

    anchors = tracked = None
    if args.scheme == "partial":
        if args.anchors == "greedy":
            anchors = build_anchor_set_greedy(neighborhoods)
        else:
            anchors = build_anchor_set_random(
                neighborhoods, graph.n_e, seed=args.seed, m=args.m
            )
    else:
        tracked = assign_all_tracking(
            build_tracked_sets(plan, graph.n_e),
            graph.n_e,
            seed=stream_seed(args.seed, "tracking"),
        )
    tables = build_tables(
        graph,
        metric,
        neighborhoods,
        anchors=anchors,
        tracked=tracked,
        f=args.f,
        ebit_budget=args.ebit_budget,
        capacity_cap=args.capacity_cap,
        plan=plan,
    )
    dump_json(scheme_to_dict(tables, args.metric, _parse_params(args.metric_param)), args.out)
    sizes = [len(t) for t in tables.tables]
    print(
        f"wrote {args.out}: scheme={args.scheme} k={k} "
        f"tables max={max(sizes)} mean={sum(sizes) / len(sizes):.1f}"
    )
    return 0


def cmd_route(args) -> int:
    from .routing import make_packet, swap_and_replenish
    from .serialize import write_delivery_log

    tables, _, _ = scheme_from_dict(load_json(args.scheme))
    path = resolve(
        tables, args.source, args.dest, allow_fallback=not args.no_fallback
    )
    print(
        json.dumps(
            {
                "source": args.source,
                "dest": args.dest,
                "case": path.case.value,
                "nodes": list(path.nodes),
                "cost": path.total_cost,
                "optimal": path.optimal,
                "stretch": path.stretch,
                "reason": path.reason,
            },
            sort_keys=True,
        )
    )
    if args.send:
        records = []
        for _ in range(args.send):
            attempt = resolve(
                tables, args.source, args.dest, allow_fallback=not args.no_fallback
            )
            first_hop = tables.table(args.source).find(attempt.nodes[1]) if attempt.resolved else None
            packet = make_packet(
                tables.plan,
                args.source,
                args.dest,
                descriptors=first_hop.partitions if first_hop else (),
            )
            records.append(
                swap_and_replenish(
                    tables, attempt, packet, replenish_rate=args.replenish_rate
                )
            )
        delivered = sum(r.success for r in records)
        print(f"delivered {delivered}/{len(records)} packets")
        if args.delivery_log:
            write_delivery_log(records, args.delivery_log)
            print(f"wrote {args.delivery_log}")
    return 0 if path.case.value != "failure" else 1


def cmd_eval(args) -> int:
    tables, _, _ = scheme_from_dict(load_json(args.scheme))
    evaluation = evaluate_all_pairs(tables)
    out_dir = _out_dir(args.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, args.prefix + "_pairs.csv")
    with open(csv_path, "w", newline="\n") as fh:
        fh.write(f"# schema_version={harness.SCHEMA_VERSION}\n")
        fh.write("source,dest,case,cost,optimal,stretch\n")
        for source, dest, case, cost, optimal, stretch in evaluation.rows:
            fh.write(f"{source},{dest},{case},{cost!r},{optimal!r},{stretch!r}\n")
    summary = {
        "schema_version": harness.SCHEMA_VERSION,
        "max_stretch": evaluation.max_stretch,
        "mean_stretch": evaluation.mean_stretch,
        "case_counts": dict(evaluation.case_counts),
        "fallback_fraction": evaluation.fallback_fraction,
        "failure_fraction": evaluation.failure_fraction,
    }
    json_path = os.path.join(out_dir, args.prefix + "_summary.json")
    dump_json(summary, json_path)
    print(f"wrote {csv_path} and {json_path}; max stretch {evaluation.max_stretch}")
    return 0


def cmd_qsearch(args) -> int:
    tables, _, _ = scheme_from_dict(load_json(args.scheme))
    table = tables.table(args.owner)
    instance = instance_from_table(table, tables.plan)
    target_index = tables.plan.esp_addresses[args.target].index
    iterations = args.iterations
    if iterations is None:
        hits = instance.hit_labels(target_index)
        iterations = iteration_count(instance.n_t, max(1, len(hits)))
    outcome = run_search(
        instance,
        target_index,
        iterations=iterations,
        seed=args.seed,
        cap_qubits=args.cap_qubits,
    )
    print(
        json.dumps(
            {
                "owner": args.owner,
                "target": args.target,
                "iterations": outcome.iterations,
                "engine": outcome.engine,
                "measured": outcome.measured,
                "hit_labels": sorted(outcome.hit_labels),
                "success_probability": outcome.success_probability,
                "distribution": list(outcome.distribution),
            },
            sort_keys=True,
        )
    )
    return 0


def cmd_compare(args) -> int:
    config_a = harness.ExperimentConfig.from_dict(load_json(args.config_a))
    config_b = harness.ExperimentConfig.from_dict(load_json(args.config_b))
    doc = harness.compare_schemes(config_a, config_b)
    dump_json(doc, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_report(args) -> int:
    doc = load_json(args.config) if args.config else {}
    config = harness.ExperimentConfig.from_dict(
        {**_config_flags(args), **doc}
    )
    report = harness.run_experiment(config)
    for line in harness.assertion_lines(report):
        print(line)
    csv_path = os.path.join(
        config.resolved_output_dir(), config.name + "_pairs.csv"
    )
    print(f"outputs: {csv_path} and {config.name}_summary.json")
    return 0 if report.passed else 1


def _config_flags(args) -> dict:
    out = {}
    for name in (
        "n_e",
        "graph_model",
        "metric",
        "scheme",
        "anchor_method",
        "m",
        "f",
        "ebit_budget",
        "name",
    ):
        value = getattr(args, name, None)
        if value is not None:
            out[name] = value
    if getattr(args, "seeds", None):
        out["seeds"] = args.seeds
    if getattr(args, "out_dir", None):
        out["output_dir"] = args.out_dir
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qnroute",
        description="Compact entanglement routing simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a connected overlay graph file")
    p.add_argument("--model", default="erdos_renyi")
    p.add_argument("--n-e", dest="n_e", type=int, required=True)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--metric", default="hop")
    p.add_argument("--metric-param", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("cluster", help="build neighborhoods, cover, and tables")
    p.add_argument("--graph", required=True)
    p.add_argument("--scheme", choices=["partial", "full"], default="partial")
    p.add_argument("--metric", default="hop")
    p.add_argument("--metric-param", action="append", metavar="KEY=VALUE")
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--k", type=int, default=None, help="override the derived neighborhood size")
    p.add_argument("--anchors", choices=["greedy", "random"], default="greedy")
    p.add_argument("--f", type=int, default=1)
    p.add_argument("--ebit-budget", type=int, default=4)
    p.add_argument("--capacity-cap", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("route", help="resolve one source/destination pair")
    p.add_argument("--scheme", required=True)
    p.add_argument("--source", type=int, required=True)
    p.add_argument("--dest", type=int, required=True)
    p.add_argument("--no-fallback", action="store_true")
    p.add_argument("--send", type=int, default=0,
                   help="also deliver this many packets, consuming ebits")
    p.add_argument("--replenish-rate", type=int, default=0)
    p.add_argument("--delivery-log", default=None, help="CSV path for delivery records")
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("eval", help="resolve all pairs and emit CSV + summary")
    p.add_argument("--scheme", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--prefix", default="eval")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("qsearch", help="amplified lookup inside one table")
    p.add_argument("--scheme", required=True)
    p.add_argument("--owner", type=int, required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap-qubits", type=int, default=22)
    p.set_defaults(func=cmd_qsearch)

    p = sub.add_parser("compare", help="paired-seed comparison of two configs")
    p.add_argument("--config-a", required=True)
    p.add_argument("--config-b", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="run an experiment config end to end")
    p.add_argument("--config", default=None)
    p.add_argument("--n-e", dest="n_e", type=int, default=None)
    p.add_argument("--graph-model", default=None)
    p.add_argument("--metric", default=None)
    p.add_argument("--scheme", choices=["partial", "full"], default=None)
    p.add_argument("--anchor-method", choices=["greedy", "random"], default=None)
    p.add_argument("--m", type=float, default=None)
    p.add_argument("--f", type=int, default=None)
    p.add_argument("--ebit-budget", type=int, default=None)
    p.add_argument("--seeds", type=int, nargs="+", default=None)
    p.add_argument("--name", default=None)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QnrouteError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

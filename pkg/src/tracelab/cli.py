"""Experiment runner: model loading, seeded replica execution, CSV reporting.

Every subcommand resolves its configuration from an optional JSON file plus
flag overrides (flags win), derives one stream per replica from the master
seed, and writes CSV whose first line records the resolved config hash, so a
rerun with the same seed is byte-identical regardless of worker count. The
environment variable TRACE_LAB_THREADS caps the worker pool.

Exit codes: 0 ok, 2 invalid configuration, 3 an audited bound failed.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigInvalid, TraceLabError
from .equilibrium import (
    entrance_law_audit,
    equilibrium_report,
    joint_prefix_audit,
    tail_factorization_audit,
    visit_coupling_bound,
)
from .generators import (
    DegreeDistribution,
    GwpTreeSpec,
    pair_half_edges,
    erdos_renyi_gnm,
    sample_degree_sequence,
    sample_gwp_tree,
    size_bias,
)
from .graphs import RootedGraph, ball, load_fixture, save_fixture
from .exploration import breadth_first_rule, coupled_exploration_cm_gwp, markov_rule
from .limits import LimitProcessSampler, binned_summary, build_stacks, escape_estimate, sample_cox
from .percolation import components, vacant_graph
from .stats import RngStream
from .visits import trajectory_to_json_lines, visiting_measure
from .walks import mixing_distance, mixing_distance_mc, simulate_walk, stationary


def worker_count() -> int:
    raw = os.environ.get("TRACE_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def replica_map(fn, n_replicas: int):
    """Run fn(i) for each replica; results always collected in replica order."""
    threads = worker_count()
    if threads == 1:
        return [fn(i) for i in range(n_replicas)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_replicas)))


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_csv(path, header, rows, cfg: dict):
    out = Path(path) if path else None
    handle = open(out, "w", newline="") if out else sys.stdout
    try:
        handle.write(f"# tracelab={__version__} config_hash={config_hash(cfg)}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    finally:
        if out:
            handle.close()


def fmt(x) -> str:
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def parse_weights(text: str) -> DegreeDistribution:
    pairs = {}
    for part in text.split(","):
        k, w = part.split(":")
        pairs[int(k)] = float(w)
    return DegreeDistribution.from_weights(pairs)


def load_config(args) -> dict:
    cfg = {}
    if getattr(args, "config", None):
        cfg.update(json.loads(Path(args.config).read_text()))
    # flags override file fields
    for key, val in vars(args).items():
        if key in ("config", "func") or val is None:
            continue
        cfg[key] = val
    return cfg


def resolve_model(cfg: dict, rng: np.random.Generator):
    """Build one rooted graph sample for the configured model."""
    model = cfg.get("model", "fixture")
    if model == "fixture" or cfg.get("fixture"):
        loaded = load_fixture(cfg["fixture"])
        if isinstance(loaded, RootedGraph):
            return loaded
        root = sorted(loaded.vertices)[0]
        return RootedGraph(loaded, (root,))
    if model == "cm":
        n = int(cfg["n"])
        if cfg.get("degrees_file"):
            degrees = json.loads(Path(cfg["degrees_file"]).read_text())
            degseq = [int(d) for d in degrees]
        elif cfg.get("p_weights"):
            law = parse_weights(cfg["p_weights"])
            degseq = sample_degree_sequence(law, n, rng)
        else:
            degseq = [3] * n
        g = pair_half_edges(degseq, rng)
        root = int(rng.integers(g.n_vertices))
        return RootedGraph(g, (sorted(g.vertices)[root],))
    if model == "er":
        g = erdos_renyi_gnm(int(cfg["n"]), int(cfg["m"]), rng)
        root = int(rng.integers(g.n_vertices))
        return RootedGraph(g, (sorted(g.vertices)[root],))
    if model == "gwp":
        law = parse_weights(cfg.get("p_weights", "3:1.0"))
        spec = GwpTreeSpec(
            law,
            size_bias(law),
            max_depth=int(cfg.get("depth", 12)),
            max_vertices=int(cfg.get("max_vertices", 100_000)),
        )
        return sample_gwp_tree(spec, rng).rooted
    raise ConfigInvalid(f"unknown model {model!r}")


def validate(cfg: dict) -> list[str]:
    """Config sanity report; raises ConfigInvalid on hard errors, returns
    notices for soft schedule violations."""
    notices = []
    for key in ("sigma", "tau", "scale", "horizon", "afrak"):
        val = cfg.get(key)
        if val is None:
            continue
        try:
            vals = [float(x) for x in str(val).split(",")]
        except ValueError:
            raise ConfigInvalid(f"{key} must be numeric, got {val!r}")
        if any(x < 0 for x in vals):
            raise ConfigInvalid(f"{key} must be nonnegative")
    if cfg.get("model") == "cm":
        if cfg.get("afrak") in (None, 0):
            if cfg.get("p_weights"):
                law = parse_weights(cfg["p_weights"])
                cfg["afrak"] = law.mean()
            else:
                cfg["afrak"] = 3.0
            notices.append(f"afrak defaulted to mean degree {cfg['afrak']}")
        n = cfg.get("n")
        tau = cfg.get("tau")
        if n and tau is not None and float(tau) <= math.log(float(n)):
            notices.append("tau at or below log n: outside the fast-mixing regime")
    return notices


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = load_config(args)
    validate(cfg)
    rng = RngStream(int(cfg.get("seed", 0))).generator()
    rooted = resolve_model(cfg, rng)
    save_fixture(cfg["out"], rooted)
    return 0


def cmd_walk(args) -> int:
    cfg = load_config(args)
    validate(cfg)
    rng = RngStream(int(cfg.get("seed", 0))).generator()
    rooted = resolve_model(cfg, rng)
    start = cfg.get("start")
    start = int(start) if start is not None else rooted.root
    traj = simulate_walk(rooted.graph, start, float(cfg["horizon"]), rng)
    text = trajectory_to_json_lines(traj)
    if cfg.get("out"):
        Path(cfg["out"]).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_visits(args) -> int:
    cfg = load_config(args)
    validate(cfg)
    stream = RngStream(int(cfg.get("seed", 0)))
    rooted = resolve_model(cfg, stream.split(0).generator())
    region = ball(rooted, int(cfg.get("radius", 1)))
    tau = float(cfg["tau"])
    scale = float(cfg.get("scale", 1.0))
    horizon = float(cfg["horizon"])
    measure = visiting_measure(
        rooted.graph, region, tau, scale, horizon,
        stationary(rooted.graph), stream.split(1).generator(),
    )
    sigma = cfg.get("sigma")
    if sigma is not None:
        from .visits import restrict

        measure = restrict(measure, float(sigma))
    rows = [
        (
            r.index,
            fmt(r.time),
            fmt(r.scaled_time),
            r.entry_vertex,
            r.path.n_jumps,
            " ".join(str(int(s)) for s in [r.path.start, *r.path.states]),
        )
        for r in measure.records
    ]
    write_csv(cfg.get("out"), ["k", "T_k", "T_k_scaled", "entry_vertex", "path_len", "path_states"], rows, cfg)
    return 0


def cmd_mixing(args) -> int:
    cfg = load_config(args)
    validate(cfg)
    stream = RngStream(int(cfg.get("seed", 0)))
    rooted = resolve_model(cfg, stream.split(0).generator())
    taus = [float(x) for x in str(cfg["tau"]).split(",")]
    rows = []
    for i, tau in enumerate(taus):
        if cfg.get("method", "exact") == "exact":
            d = mixing_distance(rooted.graph, tau, dense_cap=int(cfg.get("dense_cap", 400)))
            rows.append((fmt(tau), fmt(d), fmt(0.0)))
        else:
            est, hw = mixing_distance_mc(
                rooted.graph, tau, int(cfg.get("n_samples", 10_000)),
                stream.split(10 + i).generator(),
            )
            rows.append((fmt(tau), fmt(est), fmt(hw)))
    write_csv(cfg.get("out"), ["tau", "distance", "halfwidth3"], rows, cfg)
    return 0


def cmd_bounds_audit(args) -> int:
    cfg = load_config(args)
    validate(cfg)
    stream = RngStream(int(cfg.get("seed", 0)))
    rooted = resolve_model(cfg, stream.split(0).generator())
    g = rooted.graph
    if cfg.get("B"):
        region = frozenset(int(v) for v in str(cfg["B"]).split(","))
    else:
        region = ball(rooted, int(cfg.get("radius", 0)))
    tau = float(cfg["tau"])
    dense_cap = int(cfg.get("dense_cap", 400))
    rep = equilibrium_report(g, region, tau, dense_cap)
    audits = []
    t_probe = float(cfg.get("t", 2 * tau + 5.0))
    y_probe = sorted(g.vertices)[0]
    audits.append(
        tail_factorization_audit(g, region, y_probe, t_probe, tau, dense_cap)
    )
    audits.append(entrance_law_audit(g, region, tau, dense_cap, report=rep))
    audits.append(
        joint_prefix_audit(
            g, region, tau, rooted.root, int(cfg.get("n_samples", 2000)),
            stream.split(1).generator(), dense_cap, report=rep,
        )
    )
    audits.append(
        visit_coupling_bound(
            g, region, tau, float(cfg.get("scale", 1.0)),
            float(cfg.get("sigma", 1.0)), dense_cap=dense_cap, report=rep,
        )
    )
    rows = [
        (
            a.name,
            fmt(a.lhs) if a.lhs is not None else "",
            fmt(a.rhs),
            fmt(a.slack) if a.slack is not None else "",
            a.preconditions_met,
            json.dumps({k: (fmt(v) if isinstance(v, float) else v) for k, v in a.params.items()}, sort_keys=True),
        )
        for a in audits
    ]
    write_csv(cfg.get("out"), ["name", "lhs", "rhs", "slack", "preconditions_met", "params"], rows, cfg)
    failed = any(
        a.preconditions_met and a.slack is not None and a.slack < -1e-8 for a in audits
    )
    return 3 if failed else 0


def cmd_limit_compare(args) -> int:
    cfg = load_config(args)
    notices = validate(cfg)
    for note in notices:
        print(f"note: {note}", file=sys.stderr)
    stream = RngStream(int(cfg.get("seed", 0)))
    radius = int(cfg.get("R", 1))
    tau = float(cfg["tau"])
    scale = float(cfg.get("scale", 1.0))
    afrak = float(cfg.get("afrak", 3.0))
    sigma = float(cfg["sigma"])
    n_replicas = int(cfg.get("replicas", 10))

    def one(i: int):
        rng = stream.split(i).generator()
        rooted = resolve_model(cfg, rng)
        region = ball(rooted, radius)
        measure = visiting_measure(
            rooted.graph, region, tau, scale, sigma * scale,
            stationary(rooted.graph), rng,
        )
        hist: dict[int, int] = {}
        for r in measure.records:
            hist[r.entry_vertex] = hist.get(r.entry_vertex, 0) + 1
        summary = binned_summary(measure, sigma, n_bins=int(cfg.get("bins", 4)), include_paths=False)
        first = measure.records[0].scaled_time if measure.records else math.nan
        return (
            i,
            len(measure),
            fmt(first),
            json.dumps(sorted(hist.items())),
            json.dumps(summary),
        )

    rows = replica_map(one, n_replicas)
    write_csv(
        cfg.get("out"),
        ["replica", "atom_count", "first_atom_time", "entry_vertex_histogram", "tv_summary"],
        rows,
        cfg,
    )
    return 0


def cmd_explore_couple(args) -> int:
    cfg = load_config(args)
    validate(cfg)
    stream = RngStream(int(cfg.get("seed", 0)))
    n = int(cfg.get("n", 1000))
    if cfg.get("p_weights"):
        law = parse_weights(cfg["p_weights"])
        degseq = sample_degree_sequence(law, n, stream.split(10**6).generator())
    else:
        degseq = [3] * n
    ell = int(cfg.get("ell", 10))
    rule_name = cfg.get("rule", "bfs")
    tau = cfg.get("tau")

    def rule_factory():
        if rule_name == "markov":
            return markov_rule(2 * float(tau) if tau is not None else None)
        return breadth_first_rule()

    def one(i: int):
        rng = stream.split(i).generator()
        res = coupled_exploration_cm_gwp(degseq, rule_factory, ell, rng)
        return (i, int(res.success), res.failure_cause or "", res.disclosed_size)

    rows = replica_map(one, int(cfg.get("replicas", 100)))
    write_csv(cfg.get("out"), ["replica", "success", "failure_cause", "disclosed_size"], rows, cfg)
    return 0


def cmd_percolate(args) -> int:
    cfg = load_config(args)
    validate(cfg)
    stream = RngStream(int(cfg.get("seed", 0)))
    sigma = float(cfg.get("sigma", 0.0))
    scale = float(cfg.get("scale", cfg.get("n", 1) or 1))
    mode = cfg.get("mode", "site")
    k_list = [int(k) for k in str(cfg.get("k_list", "2,10,50")).split(",")]

    def one(i: int):
        rng = stream.split(i).generator()
        rooted = resolve_model(cfg, rng)
        g = rooted.graph
        traj = simulate_walk(g, stationary(g), sigma * scale, rng)
        vac = vacant_graph(g, [traj], sigma * scale, mode)
        stats = components(vac)
        n = stats.n_vertices
        row = [i, n, len(vac.removed), stats.cmax]
        for k in k_list:
            row.append(fmt(stats.relative_mass_at_least(k)))
        row.append(
            fmt(max(stats.disconnected_ordered_pairs(k) / (n * n) for k in k_list))
        )
        return tuple(row)

    rows = replica_map(one, int(cfg.get("replicas", 20)))
    header = ["replica", "n", "removed", "cmax"] + [f"N_{k}" for k in k_list] + ["pair_estimate"]
    write_csv(cfg.get("out"), header, rows, cfg)
    return 0


def cmd_limit_construction(args) -> int:
    """Extra diagnostics: stack-based construction against the exact measure."""
    cfg = load_config(args)
    validate(cfg)
    stream = RngStream(int(cfg.get("seed", 0)))
    rooted = resolve_model(cfg, stream.split(0).generator())
    radius = int(cfg.get("R", 1))
    tau = float(cfg["tau"])
    stacks = build_stacks(rooted, radius, tau, int(cfg.get("m", 1000)), 50, stream.split(1).generator())
    est = escape_estimate(stacks)
    cox = sample_cox(stacks, est.measure, float(cfg.get("afrak", 1.0)), float(cfg.get("sigma", 1.0)), stream.split(2).generator())
    rows = [(v, fmt(m), fmt(est.fractions.get(v, 0.0))) for v, m in sorted(est.measure.items())]
    rows.append(("atoms", len(cox), fmt(cox.rate_total)))
    write_csv(cfg.get("out"), ["vertex", "measure", "fraction"], rows, cfg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tracelab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override fields")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--fixture", help="graph fixture JSON")
        p.add_argument("--model", choices=["cm", "er", "gwp", "fixture"], default=None)
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--p-weights", dest="p_weights", default=None,
                       help="degree weights like '1:0.5,3:0.5'")
        p.add_argument("--degrees-file", dest="degrees_file", default=None)

    p = sub.add_parser("generate", help="sample a model into a fixture JSON")
    add_common(p)
    p.add_argument("--m", type=int, default=None, help="edge count for the er model")
    p.add_argument("--depth", type=int, default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("walk", help="simulate one walk as JSON lines")
    add_common(p)
    p.add_argument("--start", type=int, default=None)
    p.add_argument("--horizon", type=float, required=True)
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("visits", help="visiting-measure atoms of one walk")
    add_common(p)
    p.add_argument("--radius", type=int, default=1)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--sigma", type=float, default=None)
    p.set_defaults(func=cmd_visits)

    p = sub.add_parser("mixing", help="mixing distance on a grid of times")
    add_common(p)
    p.add_argument("--tau", required=True, help="comma-separated times")
    p.add_argument("--method", choices=["exact", "mc"], default="exact")
    p.add_argument("--n-samples", dest="n_samples", type=int, default=None)
    p.add_argument("--dense-cap", dest="dense_cap", type=int, default=None)
    p.set_defaults(func=cmd_mixing)

    p = sub.add_parser("bounds-audit", help="run the bound audits on a fixture")
    add_common(p)
    p.add_argument("--B", help="comma-separated region vertices")
    p.add_argument("--radius", type=int, default=None)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--n-samples", dest="n_samples", type=int, default=None)
    p.add_argument("--dense-cap", dest="dense_cap", type=int, default=None)
    p.set_defaults(func=cmd_bounds_audit)

    p = sub.add_parser("limit-compare", help="visiting-measure replicas and summaries")
    add_common(p)
    p.add_argument("--R", type=int, default=None)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--afrak", type=float, default=None)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--bins", type=int, default=None)
    p.set_defaults(func=cmd_limit_compare)

    p = sub.add_parser("explore-couple", help="coupled pairing/tree explorations")
    add_common(p)
    p.add_argument("--rule", choices=["bfs", "markov"], default=None)
    p.add_argument("--ell", type=int, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.set_defaults(func=cmd_explore_couple)

    p = sub.add_parser("percolate", help="vacant-set component statistics")
    add_common(p)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--mode", choices=["site", "bond"], default=None)
    p.add_argument("--k-list", dest="k_list", default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.set_defaults(func=cmd_percolate)

    p = sub.add_parser("limit-construction", help="stack construction diagnostics")
    add_common(p)
    p.add_argument("--R", type=int, default=None)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--afrak", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.set_defaults(func=cmd_limit_construction)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TraceLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

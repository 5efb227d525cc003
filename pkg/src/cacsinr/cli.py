"""Command line front end.

Exit codes: 0 success, 2 configuration error, 3 infeasibility, 4 I/O error.
Every subcommand writes CSV with a fixed header to stdout (or ``--out``).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import secrets
import sys

from .cac import CacPolicy, CallKind, PolicyVariant, max_admissible
from .discovery import (
    best_angle,
    load_nodes,
    offline_ast,
    random_topology,
    run_discovery,
)
from .errors import CacsinrError, ConfigurationError
from .outage import (
    CellState,
    class_thresholds,
    outage_gaussian,
    outage_montecarlo,
    power_ratio,
)
from .scenario import PRESETS, load_preset, load_scenario
from .traffic import KINDS, SimConfig, compare_cacs, erlang_b, run_sim

CAPACITY_HEADER = ["class", "C", "X", "theta", "eta", "max_fixed", "max_outage"]
OUTAGE_HEADER = ["class", "count", "eta", "trsp_mean", "trsp_stddev", "p_gauss", "p_mc", "ci_halfwidth", "agree"]
POWERS_HEADER = ["class", "C", "X", "theta", "raw_ratio_vs_ref"]
SIM_HEADER = ["policy", "class", "kind", "offered", "admitted", "blocked", "blocking",
              "ci_halfwidth", "mean_p_out", "peak_calls"]
ERLANG_COLUMNS = ["channels", "offered_erlang", "erlang_b", "within_3sigma"]
COMPARE_HEADER = ["class", "kind", "offered", "policy_a", "blocking_a", "ci_a", "mean_p_out_a",
                  "policy_b", "blocking_b", "ci_b", "mean_p_out_b"]
BEST_HEADER = ["neighbor", "best_angle_deg", "sinr_db"]


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("NA" if v < 0 else "inf")
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _scenario(args):
    if args.config:
        return load_scenario(args.config)
    return load_preset(args.preset or "paper-sec6")


def _seed(args, fallback=None) -> int:
    if args.seed is not None:
        return args.seed
    if fallback is not None:
        return fallback
    seed = secrets.randbits(64)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


# --------------------------------------------------------------------------
# subcommands


def capacity_report(sc) -> str:
    alloc = sc.allocation()
    eta = class_thresholds(sc.classes, sc.system, alloc, strict=True)
    fixed = CacPolicy(PolicyVariant.FIXED_THRESHOLD, sc.policy.handoff_guard)
    predictive = CacPolicy(PolicyVariant.OUTAGE_PREDICTIVE, sc.policy.handoff_guard)
    rows = []
    for k, c in enumerate(sc.classes):
        rows.append([c.index, c.codes, c.target_x, alloc.theta[k], eta[k],
                     max_admissible(sc.classes, alloc, sc.system, fixed, k),
                     max_admissible(sc.classes, alloc, sc.system, predictive, k)])
    return _csv(CAPACITY_HEADER, rows)


def _parse_counts(text, n):
    try:
        counts = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ConfigurationError(f"malformed --counts {text!r}") from None
    if len(counts) != n or any(c < 0 for c in counts):
        raise ConfigurationError(f"--counts needs {n} non-negative integers, got {text!r}")
    return counts


def outage_report(sc, counts, mc_samples=None, seed=None) -> str:
    alloc = sc.allocation()
    state = CellState(counts)
    g = outage_gaussian(state, sc.classes, alloc, sc.system)
    mc = None
    if mc_samples:
        mc = outage_montecarlo(state, sc.classes, alloc, sc.system, mc_samples, seed)
    rows = []
    for k, c in enumerate(sc.classes):
        p_mc = ci = agree = None
        if mc is not None:
            p_mc, ci = mc.p_out[k], mc.mc_ci_halfwidth[k]
            agree = abs(g.p_out[k] - p_mc) <= max(0.01, 3 * ci)
        rows.append([c.index, counts[k], g.eta[k], g.trsp_mean, g.trsp_stddev, g.p_out[k], p_mc, ci, agree])
    return _csv(OUTAGE_HEADER, rows)


def powers_report(sc) -> str:
    alloc = sc.allocation()
    ref = sc.classes[sc.power_reference]
    rows = []
    for k, c in enumerate(sc.classes):
        raw = power_ratio(c, ref, sc.system.processing_gain)
        rows.append([c.index, c.codes, c.target_x, alloc.theta[k], raw])
    return _csv(POWERS_HEADER, rows)


def _sim_config(sc, seed) -> SimConfig:
    missing = {"new_rates", "handoff_rates", "holding_times", "duration"} - set(sc.sim)
    if missing:
        raise ConfigurationError(f"scenario is missing key 'sim.{sorted(missing)[0]}'")
    return SimConfig(seed=seed, **sc.sim)


def _metric_rows(name, metrics, classes):
    for k, c in enumerate(classes):
        for kind in KINDS:
            s = metrics.get(k, kind)
            p = metrics.mean_p_out[k] if metrics.mean_p_out else None
            yield [name, c.index, kind.value, s.offered, s.admitted, s.blocked, s.blocking,
                   s.ci_halfwidth, p, metrics.peak_calls[k]]


def simulate_report(sc, seed, policy=None, compare=None, erlang=False, events_path=None) -> str:
    alloc = sc.allocation()
    sim = _sim_config(sc, seed)
    policy = policy or sc.policy
    if compare is not None:
        cmp = compare_cacs(sim, sc.classes, alloc, sc.system, (policy, compare))
        rows = [[r["class"], r["kind"], r["offered"],
                 policy.variant.value, r["blocking_a"], r["ci_a"], r["mean_p_out_a"],
                 compare.variant.value, r["blocking_b"], r["ci_b"], r["mean_p_out_b"]]
                for r in cmp.rows]
        return _csv(COMPARE_HEADER, rows)

    m = run_sim(sim, policy, sc.classes, alloc, sc.system, log_events=events_path is not None)
    if events_path is not None:
        with open(events_path, "w") as fh:
            fh.write("time,type,class,kind,decision,counts\n")
            for rec in m.event_log:
                fh.write(rec.line() + "\n")
    rows = list(_metric_rows(policy.variant.value, m, sc.classes))
    header = SIM_HEADER
    if erlang:
        if len(sc.classes) != 1:
            raise ConfigurationError("--erlang needs a single-class scenario")
        header = SIM_HEADER + ERLANG_COLUMNS
        channels = max_admissible(sc.classes, alloc, sc.system, policy, 0, CallKind.HANDOFF)
        load = (sim.new_rates[0] + sim.handoff_rates[0]) * sim.holding_times[0]
        b = erlang_b(channels, load)
        for row, kind in zip(rows, KINDS):
            s = m.get(0, kind)
            ok = None
            if s.offered:
                ok = abs(s.blocking - b) <= 3 * math.sqrt(b * (1 - b) / s.offered)
            row.extend([channels, load, b, ok])
    return _csv(header, rows)


def ast_report(sc, nodes, sweep, offline=False, trace_path=None) -> str:
    ids = [n.id for n in nodes]
    if sweep not in ids:
        raise ConfigurationError(f"unknown sweep node {sweep!r}")
    if offline:
        table = offline_ast(nodes, sweep, sc.propagation)
    else:
        table, net = run_discovery(nodes, sweep, sc.propagation, sc.protocol)
        if trace_path is not None:
            with open(trace_path, "w") as fh:
                fh.write("time,event,node,peer,angle,sinr\n")
                for rec in net.trace:
                    fh.write(rec.line() + "\n")
    best = []
    for nb in table.neighbors:
        a = best_angle(table, nb)
        best.append([nb, a, table.cell(nb, a)])
    return table.to_csv() + "\n" + _csv(BEST_HEADER, best)


# --------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", metavar="PATH", help="scenario TOML file")
    src.add_argument("--preset", metavar="NAME", choices=PRESETS, help="built-in scenario (default paper-sec6)")
    common.add_argument("--seed", type=_u64, metavar="U64", help="random seed (logged when omitted)")
    common.add_argument("--out", metavar="PATH", help="write CSV here instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cacsinr", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("capacity", parents=[common], help="per-class thresholds and admissible counts")

    o = sub.add_parser("outage", parents=[common], help="Gaussian (and Monte Carlo) outage probabilities")
    o.add_argument("--counts", required=True, help="comma-separated call counts, one per class")
    o.add_argument("--mc", type=int, metavar="SAMPLES", help="also run a Monte Carlo estimate")

    sub.add_parser("powers", parents=[common], help="received-power allocation")

    s = sub.add_parser("simulate", parents=[common], help="discrete-event traffic simulation")
    variants = [v.value for v in PolicyVariant]
    s.add_argument("--policy", choices=variants, help="override the scenario policy variant")
    s.add_argument("--compare", nargs="?", const="", choices=variants + [""], default=None,
                   metavar="POLICY", help="pair with a second policy (default: the other variant)")
    s.add_argument("--erlang", action="store_true", help="append the Erlang-B oracle (single class)")
    s.add_argument("--events", metavar="PATH", help="write the event log")

    a = sub.add_parser("ast", parents=[common], help="Angle-SINR Table discovery sweep")
    a.add_argument("--nodes", metavar="PATH", help="node file: id, x, y, tx_power_dbm per line")
    a.add_argument("--random", type=int, metavar="N", help="random topology of N nodes (uses --seed)")
    a.add_argument("--sweep", metavar="NODE", help="sweeping node (default from scenario)")
    a.add_argument("--offline", action="store_true", help="evaluate links directly instead of simulating")
    a.add_argument("--trace", metavar="PATH", help="write the protocol event trace")
    return p


def run(args) -> str:
    sc = _scenario(args)
    if args.command == "capacity":
        return capacity_report(sc)
    if args.command == "powers":
        return powers_report(sc)
    if args.command == "outage":
        counts = _parse_counts(args.counts, len(sc.classes))
        seed = _seed(args) if args.mc else None
        return outage_report(sc, counts, args.mc, seed)
    if args.command == "simulate":
        seed = _seed(args, sc.sim_seed)
        policy = sc.policy
        if args.policy:
            policy = CacPolicy(args.policy, sc.policy.handoff_guard)
        other = None
        if args.compare is not None:
            name = args.compare or next(v for v in PolicyVariant if v != policy.variant).value
            other = CacPolicy(name, sc.policy.handoff_guard)
        return simulate_report(sc, seed, policy, other, args.erlang, args.events)
    if args.command == "ast":
        if args.nodes and args.random:
            raise ConfigurationError("--nodes and --random are exclusive")
        if args.nodes:
            nodes = load_nodes(args.nodes)
        elif args.random:
            nodes = random_topology(args.random, _seed(args))
        else:
            nodes = sc.nodes
        sweep = args.sweep or sc.sweep_node or (nodes[0].id if nodes else None)
        return ast_report(sc, nodes, sweep, args.offline, args.trace)
    raise ConfigurationError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = run(args)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except CacsinrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())

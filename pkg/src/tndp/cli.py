"""Command-line entry point: ``tndp {assign,solve,enumerate,sweep,convert}``.

Data goes to files (and short reports to stdout); progress and diagnostics go
to stderr.  Exit codes: 0 success, 1 input or validation error, 2 finished
with a warning (the assignment did not converge).
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import os
import sys
from dataclasses import asdict, replace

from . import __version__
from .assignment import DIRECTIONS, solve_ue
from .config import Config, load_config, parse_axis
from .errors import TNDPError
from .formats import load_network, load_projects, read_arcs, read_trips, write_network, write_trips
from .lab import MODES, default_spec, reliable_region_check, sweep, write_sweep
from .network import DecisionVector, Network, apply_decision, decision_cost, link_times
from .oracle import MAX_ENUMERATION_PROJECTS, EnumerationTable, enumerate_decisions
from .pso import FitnessEvaluator, parse_schedule, run_pso

EXIT_OK, EXIT_INPUT, EXIT_WARN = 0, 1, 2
_MODE_ALIASES = {"schedule-compare": "schedule"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


def _common(p):
    g = p.add_argument_group("data and run options")
    g.add_argument("--config", help="INI configuration file; flags override its values")
    g.add_argument("--network", help="link file (native or TNTP/BPR layout)")
    g.add_argument("--trips", help="trips file (native rows or TNTP Origin blocks)")
    g.add_argument("--projects", help="candidate project file")
    g.add_argument("--budget", type=float, help="construction budget (default 5000)")
    g.add_argument("--seed", type=int, help="seed for every random choice (default 0)")
    g.add_argument("--threads", type=int, help="worker processes for enumerate/sweep (default 1)")
    g.add_argument("--out-dir", help="directory for output files (default .)")
    a = p.add_argument_group("assignment")
    a.add_argument("--gap-tol", type=float, help="relative gap tolerance (default 1e-4)")
    a.add_argument("--ls-tol", type=float, help="line search bracket tolerance (default 1e-8)")
    a.add_argument("--assign-iterations", type=int, help="max assignment iterations (default 300)")
    a.add_argument("--direction", choices=DIRECTIONS, help="search direction rule")


def _pso_flags(p):
    g = p.add_argument_group("particle swarm")
    g.add_argument("--swarm-size", type=int, help="particles (default 10)")
    g.add_argument("--c1", type=float, help="cognitive constant (default 2)")
    g.add_argument("--c2", type=float, help="social constant (default 2)")
    g.add_argument("--w", dest="inertia", help="inertia: constant '0.7' or decreasing '1.2:0.4'")
    g.add_argument("--v-max", type=float, help="velocity bound (default 2^n - 1)")
    g.add_argument("--iterations", type=int, help="PSO iterations (default 1000)")
    g.add_argument("--penalty", type=float, help="fitness of over-budget decisions (default 1e9)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tndp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tndp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("assign", help="equilibrium flows for one decision")
    _common(p)
    p.add_argument("--decision", help="bit string, project 1 first (default all zeros)")

    p = sub.add_parser("solve", help="one particle swarm run")
    _common(p)
    _pso_flags(p)

    p = sub.add_parser("enumerate", help="complete enumeration of all decisions")
    _common(p)
    p.add_argument("--max-projects", type=int, default=MAX_ENUMERATION_PROJECTS,
                   help="refuse to enumerate more projects than this (default 24)")

    p = sub.add_parser("sweep", help="parameter sweep of PSO batches")
    _common(p)
    p.add_argument("--mode", type=lambda m: _MODE_ALIASES.get(m, m), choices=MODES,
                   help="c1c2 | cw | wline | schedule (alias schedule-compare)")
    p.add_argument("--runs", type=int, help="runs per cell (default 20)")
    p.add_argument("--iterations", type=int, help="PSO iterations per run (default 200)")
    p.add_argument("--swarm-size", type=int, help="particles (default 10)")
    p.add_argument("--c1-values", type=parse_axis, help="grid 'start:stop:step' or list")
    p.add_argument("--c2-values", type=parse_axis)
    p.add_argument("--c-values", type=parse_axis)
    p.add_argument("--w-values", type=parse_axis)
    p.add_argument("--c", dest="c_fixed", type=float, help="fixed c for wline/schedule")
    p.add_argument("--w", dest="w_fixed", type=float, help="fixed w for c1c2 (default 1.1)")
    p.add_argument("--full-scale", action="store_true", default=None,
                   help="1000 iterations x 50 runs per cell")
    p.add_argument("--oracle", help="enumeration CSV; computed on the fly when omitted")
    p.add_argument("--timestamp", help="label for output file names (default: now)")

    p = sub.add_parser("convert", help="convert TNTP link/trips files to the native layout")
    p.add_argument("--network", required=True, help="TNTP link file")
    p.add_argument("--trips", help="TNTP trips file")
    p.add_argument("--out-dir", default=".", help="where network.txt / trips.txt go")
    return parser


def resolve_config(args) -> Config:
    cfg = load_config(getattr(args, "config", None))
    for attr, key in (("network", "network_path"), ("trips", "trips_path"),
                      ("projects", "projects_path"), ("out_dir", "output_dir"),
                      ("budget", "budget"), ("seed", "seed"), ("threads", "threads")):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(cfg, key, value)
    kw = {}
    for attr, key in (("gap_tol", "relative_gap_tolerance"), ("ls_tol", "line_search_tolerance"),
                      ("assign_iterations", "max_iterations"), ("direction", "direction")):
        value = getattr(args, attr, None)
        if value is not None:
            kw[key] = value
    cfg.assignment = replace(cfg.assignment, **kw)
    if args.command == "solve":
        kw = {}
        for attr, key in (("swarm_size", "swarm_size"), ("c1", "c1"), ("c2", "c2"),
                          ("v_max", "v_max"), ("iterations", "max_iterations"),
                          ("penalty", "penalty")):
            value = getattr(args, attr, None)
            if value is not None:
                kw[key] = value
        if args.inertia is not None:
            kw["inertia"] = parse_schedule(args.inertia)
        cfg.pso = replace(cfg.pso, **kw)
    if args.command == "sweep":
        for key in ("mode", "runs", "iterations", "swarm_size", "c1_values", "c2_values",
                    "c_values", "w_values", "c_fixed", "w_fixed", "full_scale", "oracle"):
            value = getattr(args, key, None)
            if value is not None:
                cfg.sweep[key] = value
    cfg.pso = replace(cfg.pso, seed=cfg.seed)
    cfg.validate()
    return cfg


def _load(cfg: Config):
    net = load_network(cfg.network_path, cfg.trips_path)
    ps = load_projects(cfg.projects_path, cfg.budget, net)
    return net, ps


def _format_float(x):
    return repr(float(x))


def cmd_assign(cfg: Config, decision=None) -> int:
    net, ps = _load(cfg)
    if decision is None:
        y = DecisionVector.zeros(len(ps.projects))
    else:
        y = DecisionVector.from_string(decision)
    g = apply_decision(net, ps, y)
    result = solve_ue(g, cfg.assignment)
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "flows.csv")
    times = link_times(g, result.flows)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["arc_id", "tail", "head", "flow", "time"])
        for arc, x, t in zip(g.arcs, result.flows, times):
            writer.writerow([arc.id, arc.tail, arc.head, _format_float(x), _format_float(t)])
    print(f"decision {y} cost {decision_cost(ps, y)!r}")
    print(f"total_time {result.total_time!r}")
    print(f"relative_gap {result.relative_gap!r}")
    print(f"iterations {result.iterations}")
    print(f"converged {str(result.converged).lower()}")
    print(f"flows {path}")
    if not result.converged:
        _log(f"warning: assignment did not reach gap {cfg.assignment.relative_gap_tolerance} "
             f"in {cfg.assignment.max_iterations} iterations")
        return EXIT_WARN
    return EXIT_OK


def cmd_solve(cfg: Config) -> int:
    net, ps = _load(cfg)
    evaluator = FitnessEvaluator(net, ps, cfg.assignment, cfg.pso.penalty)
    run = run_pso(net, ps, cfg.pso, cfg.assignment, evaluator)
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "solve_trace.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "avg_ofv", "best_ofv"])
        for t, (a, b) in enumerate(zip(run.ofv_trace, run.best_trace)):
            writer.writerow([t, _format_float(a), _format_float(b)])
    print(f"best_decision {run.best_decision}")
    print(f"projects {' '.join(str(k) for k in run.best_decision.accepted()) or '-'}")
    print(f"cost {decision_cost(ps, run.best_decision)!r}")
    print(f"best_ofv {run.best_fitness!r}")
    print(f"ntaps {run.ntaps}")
    print(f"found_at_iteration {run.found_at_iteration}")
    print(f"swarm_size {run.swarm_size} seed {run.seed}")
    print(f"trace {path}")
    return EXIT_OK


def _progress(label):
    step = {"last": -1}

    def report(done, total):
        pct = 100 * done // total
        if pct // 10 != step["last"] or done == total:
            step["last"] = pct // 10
            _log(f"{label}: {done}/{total} decisions")
    return report


def cmd_enumerate(cfg: Config, max_projects=MAX_ENUMERATION_PROJECTS) -> int:
    net, ps = _load(cfg)
    if len(ps.projects) > max_projects:
        _log(f"error: {len(ps.projects)} projects exceeds --max-projects {max_projects}")
        return EXIT_INPUT
    table = enumerate_decisions(net, ps, cfg.assignment, threads=cfg.threads,
                                allow_large=True, progress=_progress("enumerate"))
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "enumeration.csv")
    table.to_csv(path)
    best = table.optimum
    print(f"optimum index {best.index} bits {best.bits} cost {best.cost!r} ofv {best.ofv!r}")
    print(f"table {path}")
    return EXIT_OK


def cmd_sweep(cfg: Config, timestamp=None) -> int:
    net, ps = _load(cfg)
    overrides = dict(cfg.sweep)
    mode = overrides.pop("mode", "cw")
    full = bool(overrides.pop("full_scale", False))
    oracle_path = overrides.pop("oracle", None)
    spec = default_spec(mode, full_scale=full, base_seed=cfg.seed, v_max=cfg.pso.v_max,
                        penalty=cfg.pso.penalty, **overrides)
    if oracle_path is not None:
        table = EnumerationTable.from_csv(oracle_path, ps.budget)
    else:
        table = enumerate_decisions(net, ps, cfg.assignment, threads=cfg.threads,
                                    progress=_progress("oracle"))
    best = table.optimum
    _log(f"oracle optimum index {best.index} ofv {best.ofv!r}")
    dataset = sweep(spec, net, ps, cfg.assignment, best.index, table.ofv_by_index(),
                    cfg.threads)
    stamp = timestamp or _dt.datetime.now().strftime("%Y%m%dT%H%M%S")
    paths = write_sweep(dataset, cfg.output_dir, stamp, extra_meta={
        "network": cfg.network_path, "trips": cfg.trips_path, "projects": cfg.projects_path,
        "budget": cfg.budget, "assignment": asdict(cfg.assignment),
        "oracle_ofv": best.ofv,
    })
    for path in paths:
        print(path)
    if mode == "cw":
        try:
            report = reliable_region_check(dataset.rows)
        except TNDPError as exc:
            _log(f"region check skipped: {exc}")
        else:
            print(f"region inside_mean {report.inside_mean!r} outside_mean "
                  f"{report.outside_mean!r} ratio {report.ratio!r} ({report.ratio_flag})")
    return EXIT_OK


def cmd_convert(network, trips, out_dir) -> int:
    arcs, _meta = read_arcs(network)
    od = read_trips(trips) if trips else []
    net = Network.from_arcs(arcs, od)
    os.makedirs(out_dir, exist_ok=True)
    write_network(net, os.path.join(out_dir, "network.txt"),
                  comment=f"converted from {os.path.basename(network)}")
    print(os.path.join(out_dir, "network.txt"))
    if trips:
        write_trips(net, os.path.join(out_dir, "trips.txt"))
        print(os.path.join(out_dir, "trips.txt"))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            return cmd_convert(args.network, args.trips, args.out_dir)
        cfg = resolve_config(args)
        if args.command == "assign":
            return cmd_assign(cfg, args.decision)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "enumerate":
            return cmd_enumerate(cfg, args.max_projects)
        return cmd_sweep(cfg, args.timestamp)
    except (TNDPError, OSError) as exc:
        _log(f"error: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

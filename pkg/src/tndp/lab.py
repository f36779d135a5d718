"""Experiment harness: seeded PSO batches and parameter sweeps.

Average OFV is defined as follows.  Per iteration it is the mean fitness over
the budget-feasible particles of that iteration (penalised particles are left
out).  Per run it is the final-iteration value, and per cell it is the mean
over runs.
"""
from __future__ import annotations

import csv
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import __version__
from .assignment import AssignmentSettings
from .errors import EmptyRegion, ValidationError
from .pso import (
    Constant,
    FitnessEvaluator,
    LinearDecreasing,
    PsoSettings,
    describe_schedule,
    run_pso,
)

MODES = ("c1c2", "cw", "wline", "schedule")

AVG_OFV_DEFINITION = (
    "per iteration: mean fitness over budget-feasible particles; "
    "per run: final-iteration value; per cell: mean over runs"
)


@dataclass
class BatchStats:
    runs: int
    avg_ntaps: float
    avg_final_ofv: float
    prob_optimum: float
    avg_found_iteration: float
    """Mean first-hit iteration over the runs that found the optimum (NaN if none did)."""
    avg_first_last_ofv_diff: float
    seeds: list = field(default_factory=list)
    results: list = field(default_factory=list, repr=False)

    def mean_trace(self, which="ofv") -> np.ndarray:
        traces = [r.ofv_trace if which == "ofv" else r.best_trace for r in self.results]
        with warnings.catch_warnings():
            # all-NaN columns (no feasible particle in any run) stay NaN
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanmean(np.array(traces, dtype=float), axis=0)


def summarize(results: list, optimum_index: int) -> BatchStats:
    if not results:
        raise ValidationError("a batch needs at least one run")
    hits = [r for r in results if r.best_index == optimum_index]
    finals = [r.last_iter_avg_ofv for r in results if not math.isnan(r.last_iter_avg_ofv)]
    diffs = [r.first_iter_avg_ofv - r.last_iter_avg_ofv for r in results
             if not (math.isnan(r.first_iter_avg_ofv) or math.isnan(r.last_iter_avg_ofv))]
    return BatchStats(
        runs=len(results),
        avg_ntaps=float(np.mean([r.ntaps for r in results])),
        avg_final_ofv=float(np.mean(finals)) if finals else math.nan,
        prob_optimum=len(hits) / len(results),
        avg_found_iteration=float(np.mean([r.found_at_iteration for r in hits])) if hits else math.nan,
        avg_first_last_ofv_diff=float(np.mean(diffs)) if diffs else math.nan,
        seeds=[r.seed for r in results],
        results=list(results),
    )


# Worker-process state for parallel runs.
_WORKER = {}


def _init_worker(net, ps, assignment_settings, cache):
    _WORKER.update(net=net, ps=ps, settings=assignment_settings, cache=cache)


def _one_run(pso_settings):
    w = _WORKER
    cache = dict(w["cache"]) if w["cache"] is not None else None
    evaluator = FitnessEvaluator(w["net"], w["ps"], w["settings"], pso_settings.penalty, cache)
    return run_pso(w["net"], w["ps"], pso_settings, w["settings"], evaluator)


def run_many(net, ps, settings_list, assignment_settings=AssignmentSettings(),
             cache=None, threads=1) -> list:
    """Execute independent PSO runs; results come back in input order."""
    settings_list = list(settings_list)
    if threads <= 1 or len(settings_list) < 2:
        _init_worker(net, ps, assignment_settings, cache)
        return [_one_run(s) for s in settings_list]
    chunk = max(1, len(settings_list) // (threads * 4))
    with ProcessPoolExecutor(threads, initializer=_init_worker,
                             initargs=(net, ps, assignment_settings, cache)) as pool:
        return list(pool.map(_one_run, settings_list, chunksize=chunk))


def run_batch(net, ps, pso_settings: PsoSettings, runs: int, base_seed: int,
              oracle_optimum: int, assignment_settings=AssignmentSettings(),
              cache=None, threads=1) -> BatchStats:
    """``runs`` PSO runs with seeds ``base_seed, base_seed + 1, ...``."""
    if runs < 1:
        raise ValidationError("runs must be >= 1")
    settings = [replace(pso_settings, seed=base_seed + i) for i in range(runs)]
    results = run_many(net, ps, settings, assignment_settings, cache, threads)
    return summarize(results, oracle_optimum)


def frange(start, stop, step) -> tuple:
    """Inclusive arithmetic grid, rounded to 10 decimals to keep labels clean."""
    if not step > 0:
        raise ValidationError("grid step must be positive")
    if stop < start:
        raise ValidationError("grid range is empty")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


@dataclass(frozen=True)
class SweepSpec:
    mode: str
    c1_values: tuple = ()
    c2_values: tuple = ()
    c_values: tuple = ()
    w_values: tuple = ()
    c_fixed: float = 2.0
    w_fixed: float = 1.1
    schedules: tuple = (Constant(0.7), LinearDecreasing(1.2, 0.4))
    runs: int = 20
    iterations: int = 200
    swarm_size: int = 10
    base_seed: int = 0
    v_max: Optional[float] = None
    penalty: float = 1e9

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        axes = {
            "c1c2": (self.c1_values, self.c2_values),
            "cw": (self.c_values, self.w_values),
            "wline": (self.w_values,),
            "schedule": (self.schedules,),
        }[self.mode]
        if any(len(axis) == 0 for axis in axes):
            raise ValidationError(f"{self.mode} sweep has an empty axis")
        if self.runs < 1 or self.iterations < 0:
            raise ValidationError("runs must be >= 1 and iterations >= 0")


def default_spec(mode: str, full_scale=False, **overrides) -> SweepSpec:
    """Default grids; ``full_scale`` switches to 1000 iterations x 50 runs."""
    grids = {
        "c1c2": dict(c1_values=frange(0, 4, 0.5), c2_values=frange(0, 4, 0.5), w_fixed=1.1),
        "cw": dict(c_values=frange(0, 4, 0.5), w_values=frange(0, 2, 0.2)),
        "wline": dict(w_values=frange(0, 2, 0.1), c_fixed=2.0),
        "schedule": dict(c_fixed=2.0),
    }
    if mode not in grids:
        raise ValidationError(f"mode must be one of {MODES}")
    kwargs = dict(grids[mode])
    if full_scale:
        kwargs.update(runs=50, iterations=1000)
    kwargs.update(overrides)
    return SweepSpec(mode=mode, **kwargs)


def cell_seed(base_seed: int, coords) -> int:
    """Seed for one grid cell, a pure function of the base seed and coordinates."""
    key = [int(base_seed) & 0xFFFFFFFF] + [int(round(c * 1000)) & 0xFFFFFFFF for c in coords]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


def _cells(spec: SweepSpec) -> list:
    """(c1, c2, schedule, coords) per cell in deterministic grid order."""
    if spec.mode == "c1c2":
        return [(c1, c2, Constant(spec.w_fixed), (c1, c2, spec.w_fixed))
                for c1 in spec.c1_values for c2 in spec.c2_values]
    if spec.mode == "cw":
        return [(c, c, Constant(w), (c, c, w)) for c in spec.c_values for w in spec.w_values]
    if spec.mode == "wline":
        return [(spec.c_fixed, spec.c_fixed, Constant(w), (spec.c_fixed, spec.c_fixed, w))
                for w in spec.w_values]
    cells = []
    for k, sched in enumerate(spec.schedules):
        if isinstance(sched, Constant):
            coords = (spec.c_fixed, spec.c_fixed, sched.w)
        else:
            coords = (spec.c_fixed, spec.c_fixed, sched.w_start, sched.w_end)
        cells.append((spec.c_fixed, spec.c_fixed, sched, coords))
    return cells


STAT_COLUMNS = ["avg_ntaps", "avg_final_ofv", "prob_optimum", "avg_found_iteration",
                "avg_first_last_ofv_diff"]
ROW_COLUMNS = ["mode", "c1", "c2", "w", "seed", "runs", "iterations", "swarm_size"] + STAT_COLUMNS


@dataclass
class SweepDataset:
    spec: SweepSpec
    rows: list
    """One dict per cell with ROW_COLUMNS keys."""
    batches: list = field(repr=False, default_factory=list)
    optimum_index: int = -1

    def traces(self) -> dict:
        """Schedule label -> (mean avg-OFV trace, mean best-OFV trace)."""
        return {row["w"]: (b.mean_trace("ofv"), b.mean_trace("best"))
                for row, b in zip(self.rows, self.batches)}


def sweep(spec: SweepSpec, net, ps, assignment_settings=AssignmentSettings(),
          optimum_index: int = None, cache=None, threads=1) -> SweepDataset:
    if optimum_index is None:
        raise ValidationError("sweep needs the oracle optimum index")
    cells = _cells(spec)
    tasks, seeds = [], []
    for c1, c2, sched, coords in cells:
        seed = cell_seed(spec.base_seed, coords)
        seeds.append(seed)
        base = PsoSettings(swarm_size=spec.swarm_size, c1=c1, c2=c2, inertia=sched,
                           v_max=spec.v_max, max_iterations=spec.iterations,
                           penalty=spec.penalty, seed=seed)
        tasks.extend(replace(base, seed=seed + i) for i in range(spec.runs))
    results = run_many(net, ps, tasks, assignment_settings, cache, threads)
    rows, batches = [], []
    for k, (c1, c2, sched, coords) in enumerate(cells):
        chunk = results[k * spec.runs:(k + 1) * spec.runs]
        stats = summarize(chunk, optimum_index)
        row = dict(mode=spec.mode, c1=c1, c2=c2, w=describe_schedule(sched), seed=seeds[k],
                   runs=spec.runs, iterations=spec.iterations, swarm_size=spec.swarm_size)
        row.update({col: getattr(stats, col) for col in STAT_COLUMNS})
        rows.append(row)
        batches.append(stats)
    return SweepDataset(spec, rows, batches, optimum_index)


@dataclass
class RegionReport:
    inside_mean: float
    outside_mean: float
    ratio: float
    ratio_flag: str
    """``"ok"``, ``"inf"`` (outside mean is zero) or ``"undefined"`` (both zero)."""
    n_inside: int
    n_outside: int


def in_reliable_region(c: float, w: float) -> bool:
    return w <= 0.5 * c + 1


def reliable_region_check(rows) -> RegionReport:
    """Mean hit probability inside vs outside the region ``w <= 0.5 c + 1``."""
    inside, outside = [], []
    for row in rows:
        c, w = float(row["c1"]), float(row["w"])
        (inside if in_reliable_region(c, w) else outside).append(float(row["prob_optimum"]))
    if not inside or not outside:
        raise EmptyRegion(f"{len(inside)} cells inside, {len(outside)} outside")
    mi, mo = float(np.mean(inside)), float(np.mean(outside))
    if mo > 0:
        ratio, flag = mi / mo, "ok"
    elif mi > 0:
        ratio, flag = math.inf, "inf"
    else:
        ratio, flag = math.nan, "undefined"
    return RegionReport(mi, mo, ratio, flag, len(inside), len(outside))


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


def write_sweep(dataset: SweepDataset, out_dir, timestamp: str, extra_meta=None) -> list:
    """Write ``sweep_<mode>_<timestamp>.csv`` and its ``.meta`` sidecar.

    Schedule sweeps also get a ``*_traces.csv`` with per-iteration mean curves.
    Returns the written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, f"sweep_{dataset.spec.mode}_{timestamp}")
    paths = [stem + ".csv"]
    with open(paths[0], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ROW_COLUMNS)
        for row in dataset.rows:
            writer.writerow([_fmt(row[c]) for c in ROW_COLUMNS])
    if dataset.spec.mode == "schedule":
        paths.append(stem + "_traces.csv")
        write_traces(dataset, paths[-1])
    spec = asdict(dataset.spec)
    spec["schedules"] = [describe_schedule(s) for s in dataset.spec.schedules]
    meta = {
        "version": __version__,
        "timestamp": timestamp,
        "spec": spec,
        "optimum_index": dataset.optimum_index,
        "avg_ofv_definition": AVG_OFV_DEFINITION,
        "cell_seeds": [row["seed"] for row in dataset.rows],
        "run_seed_rule": "cell seed + run index",
    }
    if extra_meta:
        meta.update(extra_meta)
    paths.append(stem + ".meta")
    with open(paths[-1], "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=str)
    return paths


def write_traces(dataset: SweepDataset, path):
    traces = dataset.traces()
    labels = list(traces)
    names = {}
    for label, sched in zip(labels, dataset.spec.schedules):
        names[label] = "constant" if isinstance(sched, Constant) else "decreasing"
    if len(set(names.values())) != len(labels):
        names = {label: f"w{label}" for label in labels}
    header = ["iteration"] + [f"{names[l]}_avg_ofv" for l in labels] + \
             [f"{names[l]}_best_ofv" for l in labels]
    length = len(next(iter(traces.values()))[0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(length):
            writer.writerow([t] + [repr(float(traces[l][0][t])) for l in labels]
                            + [repr(float(traces[l][1][t])) for l in labels])


def read_sweep(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))

"""Complete enumeration of project portfolios: the exact optimum by brute force."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .assignment import AssignmentSettings, solve_ue
from .errors import TNDPError, ValidationError
from .network import Network, ProjectSet, apply_decision, decision_cost
from .pso import index_to_decision

MAX_ENUMERATION_PROJECTS = 24
CSV_HEADER = ["index", "bits", "cost", "feasible", "ofv"]


@dataclass
class EnumerationRow:
    index: int
    bits: str
    cost: float
    feasible: bool
    ofv: Optional[float] = None
    error: Optional[str] = None
    converged: Optional[bool] = None


@dataclass
class EnumerationTable:
    rows: list
    budget: float
    n_projects: int = field(default=0)

    @property
    def optimum(self) -> EnumerationRow:
        """Feasible row with the smallest OFV; ties go to the smaller index."""
        best = None
        for row in self.rows:
            if row.feasible and row.ofv is not None and (best is None or row.ofv < best.ofv):
                best = row
        if best is None:
            raise ValidationError("no feasible decision was evaluated successfully")
        return best

    def ofv_by_index(self) -> dict:
        return {r.index: r.ofv for r in self.rows if r.feasible and r.ofv is not None}

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for r in self.rows:
                if r.error is not None:
                    ofv = "error"
                elif r.ofv is None:
                    ofv = ""
                else:
                    ofv = repr(r.ofv)
                writer.writerow([r.index, r.bits, repr(r.cost), int(r.feasible), ofv])

    @classmethod
    def from_csv(cls, path, budget: float) -> EnumerationTable:
        rows = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != CSV_HEADER:
                raise ValidationError(f"{path}: expected columns {CSV_HEADER}")
            for rec in reader:
                raw = rec["ofv"]
                row = EnumerationRow(
                    index=int(rec["index"]),
                    bits=rec["bits"],
                    cost=float(rec["cost"]),
                    feasible=rec["feasible"] == "1",
                    ofv=float(raw) if raw not in ("", "error") else None,
                    error="error" if raw == "error" else None,
                )
                if row.feasible != (row.cost <= budget):
                    raise ValidationError(
                        f"{path}: row {row.index} feasibility does not match budget {budget}"
                    )
                rows.append(row)
        n = len(rows[0].bits) if rows else 0
        if len(rows) != 2**n:
            raise ValidationError(f"{path}: expected {2**n} rows, found {len(rows)}")
        return cls(rows, budget, n)


# Worker-process state, installed once per process by _init_worker.
_WORKER = {}


def _init_worker(net, ps, settings, solver):
    _WORKER.update(net=net, ps=ps, settings=settings, solver=solver)


def _solve_index(k):
    net, ps = _WORKER["net"], _WORKER["ps"]
    y = index_to_decision(k, len(ps.projects))
    try:
        result = _WORKER["solver"](apply_decision(net, ps, y), _WORKER["settings"])
    except TNDPError as exc:
        return k, None, None, f"{type(exc).__name__}: {exc}"
    return k, result.total_time, result.converged, None


def _solve_many(net, ps, settings, indices, threads, solver, progress):
    indices = list(indices)
    out = {}
    if threads <= 1 or len(indices) < 2:
        _init_worker(net, ps, settings, solver)
        for done, k in enumerate(indices, start=1):
            out[k] = _solve_index(k)
            if progress is not None:
                progress(done, len(indices))
        return out
    chunk = max(1, len(indices) // (threads * 8))
    with ProcessPoolExecutor(threads, initializer=_init_worker,
                             initargs=(net, ps, settings, solver)) as pool:
        for done, res in enumerate(pool.map(_solve_index, indices, chunksize=chunk), start=1):
            out[res[0]] = res
            if progress is not None:
                progress(done, len(indices))
    return out


def _guard(ps, allow_large):
    n = len(ps.projects)
    if n > MAX_ENUMERATION_PROJECTS and not allow_large:
        raise ValidationError(
            f"{n} projects means {2**n} assignments; refusing above "
            f"{MAX_ENUMERATION_PROJECTS} projects without allow_large"
        )
    return n


def enumerate_decisions(net: Network, ps: ProjectSet,
                        settings: AssignmentSettings = AssignmentSettings(),
                        budget: Optional[float] = None, threads: int = 1,
                        allow_large: bool = False, progress: Optional[Callable] = None,
                        solver: Callable = solve_ue) -> EnumerationTable:
    """Evaluate every decision within budget; over-budget rows carry cost only."""
    n = _guard(ps, allow_large)
    budget = ps.budget if budget is None else budget
    decisions = [index_to_decision(k, n) for k in range(2**n)]
    costs = [decision_cost(ps, y) for y in decisions]
    feasible = [k for k in range(2**n) if costs[k] <= budget]
    solved = _solve_many(net, ps, settings, feasible, threads, solver, progress)
    rows = []
    for k, y in enumerate(decisions):
        row = EnumerationRow(k, str(y), costs[k], costs[k] <= budget)
        if k in solved:
            _, row.ofv, row.converged, row.error = solved[k]
        rows.append(row)
    return EnumerationTable(rows, budget, n)


def optimum_for_budgets(net: Network, ps: ProjectSet, settings: AssignmentSettings,
                        budgets: Iterable[float], threads: int = 1,
                        allow_large: bool = False, solver: Callable = solve_ue) -> list:
    """Exact optimum for each budget from a single unfiltered pass.

    Returns ``(budget, index, ofv)`` tuples in input order.
    """
    budgets = list(budgets)
    if not budgets:
        raise ValidationError("budgets must be nonempty")
    n = _guard(ps, allow_large)
    solved = _solve_many(net, ps, settings, range(2**n), threads, solver, None)
    costs = [decision_cost(ps, index_to_decision(k, n)) for k in range(2**n)]
    out = []
    for budget in budgets:
        best_k, best_v = None, math.inf
        for k in range(2**n):
            value = solved[k][1]
            if costs[k] <= budget and value is not None and value < best_v:
                best_k, best_v = k, value
        out.append((budget, best_k, best_v))
    return out

"""Particle swarm over integer-encoded project portfolios.

Every particle carries a single real coordinate.  Rounded to the nearest
integer ``k`` in ``[0, 2**n - 1]`` it decodes to an n-bit decision vector
(most significant bit = project 1).  Decisions that exceed the budget score a
fixed penalty without solving any assignment; the rest score the equilibrium
total travel time of their decision network.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .assignment import AssignmentSettings, solve_ue
from .errors import InitializationStall, OutOfRange, ValidationError
from .network import DecisionVector, Network, ProjectSet, apply_decision, decision_cost

DEFAULT_PENALTY = 1e9
MAX_INIT_DRAWS = 100_000


@dataclass(frozen=True)
class Constant:
    w: float

    def __post_init__(self):
        if self.w < 0:
            raise ValidationError("inertia weight must be nonnegative")


@dataclass(frozen=True)
class LinearDecreasing:
    w_start: float
    w_end: float

    def __post_init__(self):
        if self.w_end < 0 or self.w_start < self.w_end:
            raise ValidationError("need w_start >= w_end >= 0")


WeightSchedule = Union[Constant, LinearDecreasing]


def inertia_at(schedule: WeightSchedule, t: int, t_max: int) -> float:
    if isinstance(schedule, Constant):
        return schedule.w
    if t_max <= 0:
        return schedule.w_start
    return schedule.w_start + (schedule.w_end - schedule.w_start) * t / t_max


def parse_schedule(text: str) -> WeightSchedule:
    """``"0.7"`` -> Constant(0.7); ``"1.2:0.4"`` -> LinearDecreasing(1.2, 0.4)."""
    if ":" in text:
        start, end = text.split(":", 1)
        return LinearDecreasing(float(start), float(end))
    return Constant(float(text))


def describe_schedule(schedule: WeightSchedule) -> str:
    if isinstance(schedule, Constant):
        return f"{schedule.w!r}"
    return f"{schedule.w_start!r}:{schedule.w_end!r}"


@dataclass(frozen=True)
class PsoSettings:
    swarm_size: int = 10
    c1: float = 2.0
    c2: float = 2.0
    inertia: WeightSchedule = Constant(0.7)
    v_max: Optional[float] = None
    """Velocity bound; ``None`` means the width of the position range."""
    max_iterations: int = 1000
    penalty: float = DEFAULT_PENALTY
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 1:
            raise ValidationError("swarm_size must be >= 1")
        if self.c1 < 0 or self.c2 < 0:
            raise ValidationError("acceleration constants must be nonnegative")
        if self.v_max is not None and not self.v_max > 0:
            raise ValidationError("v_max must be positive")
        if self.max_iterations < 0:
            raise ValidationError("max_iterations must be >= 0")
        if not self.penalty > 0:
            raise ValidationError("penalty must be positive")

    def velocity_bound(self, n_projects: int) -> float:
        if self.v_max is not None:
            return float(self.v_max)
        return float(2**n_projects - 1)


def real_to_index(p: float, n: int) -> int:
    """Nearest integer (halves away from zero), clamped into ``[0, 2**n - 1]``."""
    k = math.floor(abs(p) + 0.5)
    if p < 0:
        k = -k
    return min(max(k, 0), 2**n - 1)


def index_to_decision(k: int, n: int) -> DecisionVector:
    if not 0 <= k <= 2**n - 1:
        raise OutOfRange(f"index {k} outside [0, {2**n - 1}]")
    return DecisionVector(tuple((k >> (n - 1 - j)) & 1 for j in range(n)))


def decision_to_index(y: DecisionVector) -> int:
    k = 0
    for b in y.bits:
        k = (k << 1) | b
    return k


class NtapsCounter:
    """Mutable tally of traffic assignment problems solved."""

    def __init__(self):
        self.count = 0

    def __int__(self):
        return self.count


def evaluate_fitness(
    y: DecisionVector,
    net: Network,
    ps: ProjectSet,
    settings: AssignmentSettings,
    counter: NtapsCounter,
    penalty: float = DEFAULT_PENALTY,
    solver: Callable = solve_ue,
) -> float:
    if decision_cost(ps, y) > ps.budget:
        return penalty
    result = solver(apply_decision(net, ps, y), settings)
    counter.count += 1
    if not result.total_time < penalty:
        raise ValidationError(
            f"penalty {penalty} does not exceed feasible total time {result.total_time}"
        )
    return result.total_time


class FitnessEvaluator:
    """Fitness of decision indices, optionally backed by a table of known values.

    ``ntaps`` counts every equilibrium the search asks for.  When ``cache`` is
    given, repeated decisions are served from it instead of re-solving; they
    still count toward ``ntaps`` (the search needed one assignment each) but
    not toward ``solver_calls``.  Without a cache the two counters agree.
    """

    def __init__(self, net, ps, settings=AssignmentSettings(), penalty=DEFAULT_PENALTY,
                 cache=None, solver=solve_ue):
        self.net = net
        self.ps = ps
        self.settings = settings
        self.penalty = penalty
        self.cache = cache
        self.solver = solver
        self._counter = NtapsCounter()
        self.solver_calls = 0

    @property
    def ntaps(self) -> int:
        return self._counter.count

    @property
    def n_projects(self) -> int:
        return len(self.ps.projects)

    def is_feasible(self, k: int) -> bool:
        return decision_cost(self.ps, index_to_decision(k, self.n_projects)) <= self.ps.budget

    def __call__(self, k: int) -> float:
        y = index_to_decision(k, self.n_projects)
        if self.cache is not None and k in self.cache:
            if decision_cost(self.ps, y) > self.ps.budget:
                return self.penalty
            self._counter.count += 1
            return self.cache[k]
        before = self._counter.count
        value = evaluate_fitness(y, self.net, self.ps, self.settings, self._counter,
                                 self.penalty, self.solver)
        if self._counter.count != before:
            self.solver_calls += 1
            if self.cache is not None:
                self.cache[k] = value
        return value


@dataclass
class Particle:
    position: float
    velocity: float
    best_position: float
    best_fitness: float
    rng: np.random.Generator = field(repr=False)
    fitness: float = math.inf


@dataclass
class RunResult:
    best_decision: DecisionVector
    best_index: int
    best_fitness: float
    found_at_iteration: int
    ofv_trace: list
    """Per iteration (0 = initial swarm), mean fitness over budget-feasible particles."""
    best_trace: list
    """Per iteration, fitness of the global best."""
    ntaps: int
    seed: int
    swarm_size: int

    @property
    def first_iter_avg_ofv(self) -> float:
        return self.ofv_trace[0]

    @property
    def last_iter_avg_ofv(self) -> float:
        return self.ofv_trace[-1]


def particle_streams(seed: int, count: int) -> list:
    """One independent generator per particle, spawned from ``seed``."""
    return [np.random.Generator(np.random.PCG64(s))
            for s in np.random.SeedSequence(seed).spawn(count)]


def initialize_swarm(settings: PsoSettings, ps: ProjectSet, evaluate: Callable):
    """Budget-feasible random swarm with zero velocity; returns (particles, best index)."""
    n = len(ps.projects)
    top = 2**n - 1
    particles = []
    for rng in particle_streams(settings.seed, settings.swarm_size):
        for _ in range(MAX_INIT_DRAWS):
            k = int(rng.integers(0, top + 1))
            if decision_cost(ps, index_to_decision(k, n)) <= ps.budget:
                break
        else:
            raise InitializationStall(
                f"no budget-feasible position after {MAX_INIT_DRAWS} draws"
            )
        particles.append(Particle(float(k), 0.0, float(k), math.inf, rng))
    for p in particles:
        p.fitness = evaluate(int(p.position))
        p.best_fitness = p.fitness
    best = min(range(len(particles)), key=lambda i: particles[i].fitness)
    return particles, best


def pso_step(swarm, global_best: float, w: float, settings: PsoSettings, n_projects: int):
    """Move every particle once, in index order.  Mutates and returns ``swarm``."""
    v_max = settings.velocity_bound(n_projects)
    for p in swarm:
        r1, r2 = p.rng.random(2)
        v = (w * p.velocity
             + settings.c1 * r1 * (p.best_position - p.position)
             + settings.c2 * r2 * (global_best - p.position))
        p.velocity = math.copysign(min(abs(v), v_max), v)
        p.position = float(real_to_index(p.position + p.velocity, n_projects))
    return swarm


def _feasible_mean(swarm, penalty):
    values = [p.fitness for p in swarm if p.fitness < penalty]
    return float(np.mean(values)) if values else math.nan


def run_pso(net: Network, ps: ProjectSet, settings: PsoSettings = PsoSettings(),
            assignment_settings: AssignmentSettings = AssignmentSettings(),
            evaluator: Optional[FitnessEvaluator] = None) -> RunResult:
    if evaluator is None:
        evaluator = FitnessEvaluator(net, ps, assignment_settings, settings.penalty)
    n = len(ps.projects)
    ntaps_start = evaluator.ntaps
    swarm, g = initialize_swarm(settings, ps, evaluator)
    g_pos, g_fit = swarm[g].best_position, swarm[g].best_fitness
    ofv_trace = [_feasible_mean(swarm, settings.penalty)]
    best_trace = [g_fit]
    found_at = 0
    t_last = settings.max_iterations - 1
    for t in range(settings.max_iterations):
        w = inertia_at(settings.inertia, t, t_last)
        pso_step(swarm, g_pos, w, settings, n)
        for p in swarm:
            p.fitness = evaluator(int(p.position))
            if p.fitness < p.best_fitness:
                p.best_position, p.best_fitness = p.position, p.fitness
        for p in swarm:
            if p.best_fitness < g_fit:
                g_pos, g_fit = p.best_position, p.best_fitness
                found_at = t + 1
        ofv_trace.append(_feasible_mean(swarm, settings.penalty))
        best_trace.append(g_fit)
    k = int(g_pos)
    return RunResult(
        best_decision=index_to_decision(k, n),
        best_index=k,
        best_fitness=g_fit,
        found_at_iteration=found_at,
        ofv_trace=ofv_trace,
        best_trace=best_trace,
        ntaps=evaluator.ntaps - ntaps_start,
        seed=settings.seed,
        swarm_size=settings.swarm_size,
    )

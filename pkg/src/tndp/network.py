"""Instance model: base network, quartic link costs, OD demand and candidate projects.

Travel time on every arc follows ``t(x) = alpha + beta * x**4``.  A decision
vector selects projects; :func:`apply_decision` builds the decision network
whose arc set is the base arcs plus the arcs of every accepted project.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, DomainError, ValidationError


@dataclass(frozen=True)
class Arc:
    id: int
    tail: int
    head: int
    alpha: float
    beta: float

    def __post_init__(self):
        if self.tail == self.head:
            raise ValidationError(f"arc {self.id}: self-loop at node {self.tail}")
        if not (self.alpha >= 0 and self.beta >= 0):
            raise ValidationError(
                f"arc {self.id}: coefficients must be nonnegative "
                f"(alpha={self.alpha}, beta={self.beta})"
            )


@dataclass(frozen=True)
class ODPair:
    origin: int
    destination: int
    demand: float

    def __post_init__(self):
        if self.origin == self.destination:
            raise ValidationError(f"OD pair with origin == destination ({self.origin})")
        if not self.demand >= 0:
            raise ValidationError(
                f"negative demand {self.demand} for OD ({self.origin}, {self.destination})"
            )


@dataclass(frozen=True, eq=False)
class Network:
    """Directed graph with per-arc cost coefficients and an OD demand table.

    Instances are immutable.  Array views used by the assignment engine are
    computed lazily and cached on the instance.
    """

    nodes: tuple
    arcs: tuple
    od_pairs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(set(self.nodes))))
        object.__setattr__(self, "arcs", tuple(self.arcs))
        object.__setattr__(self, "od_pairs", tuple(self.od_pairs))
        known = set(self.nodes)
        seen = set()
        for arc in self.arcs:
            if arc.id in seen:
                raise ValidationError(f"duplicate arc id {arc.id}")
            seen.add(arc.id)
            for node in (arc.tail, arc.head):
                if node not in known:
                    raise ValidationError(f"arc {arc.id} references unknown node {node}")
        for od in self.od_pairs:
            for node in (od.origin, od.destination):
                if node not in known:
                    raise ValidationError(f"OD pair references unknown node {node}")

    @classmethod
    def from_arcs(cls, arcs: Iterable[Arc], od_pairs: Iterable[ODPair] = ()) -> Network:
        arcs = tuple(arcs)
        od_pairs = tuple(od_pairs)
        nodes = {a.tail for a in arcs} | {a.head for a in arcs}
        nodes |= {od.origin for od in od_pairs} | {od.destination for od in od_pairs}
        return cls(tuple(nodes), arcs, od_pairs)

    @property
    def n_arcs(self) -> int:
        return len(self.arcs)

    @cached_property
    def arc_ids(self) -> np.ndarray:
        return np.array([a.id for a in self.arcs], dtype=np.int64)

    @cached_property
    def alpha(self) -> np.ndarray:
        return np.array([a.alpha for a in self.arcs], dtype=float)

    @cached_property
    def beta(self) -> np.ndarray:
        return np.array([a.beta for a in self.arcs], dtype=float)

    @cached_property
    def node_index(self) -> dict:
        return {node: i for i, node in enumerate(self.nodes)}

    @cached_property
    def tail_index(self) -> list:
        return [self.node_index[a.tail] for a in self.arcs]

    @cached_property
    def head_index(self) -> list:
        return [self.node_index[a.head] for a in self.arcs]

    @cached_property
    def out_arcs(self) -> list:
        """Per node index, the positions of leaving arcs ordered by arc id."""
        out = [[] for _ in self.nodes]
        for pos in sorted(range(self.n_arcs), key=lambda k: self.arcs[k].id):
            out[self.tail_index[pos]].append(pos)
        return out

    @cached_property
    def demand_by_origin(self) -> dict:
        """Origin node index -> dense demand vector over node indices.

        Positive-demand origins only, in ascending node-id order.
        """
        table = {}
        for od in self.od_pairs:
            if od.demand <= 0:
                continue
            o = self.node_index[od.origin]
            row = table.setdefault(o, [0.0] * len(self.nodes))
            row[self.node_index[od.destination]] += od.demand
        return dict(sorted(table.items()))

    @property
    def total_demand(self) -> float:
        return float(sum(od.demand for od in self.od_pairs))

    def with_extra_arcs(self, extra: Sequence[Arc]) -> Network:
        if not extra:
            return self
        return Network(self.nodes, self.arcs + tuple(extra), self.od_pairs)


def unreachable_pairs(net: Network) -> list:
    """OD pairs with positive demand whose destination is not reachable."""
    succ = {node: [] for node in net.nodes}
    for arc in net.arcs:
        succ[arc.tail].append(arc.head)
    reach_cache = {}
    missing = []
    for od in net.od_pairs:
        if od.demand <= 0:
            continue
        if od.origin not in reach_cache:
            seen = {od.origin}
            queue = deque([od.origin])
            while queue:
                u = queue.popleft()
                for v in succ[u]:
                    if v not in seen:
                        seen.add(v)
                        queue.append(v)
            reach_cache[od.origin] = seen
        if od.destination not in reach_cache[od.origin]:
            missing.append(od)
    return missing


def check_connectivity(net: Network) -> None:
    missing = unreachable_pairs(net)
    if missing:
        od = missing[0]
        raise ValidationError(
            f"unreachable OD pair: no path from {od.origin} to {od.destination} "
            f"({len(missing)} unreachable pair(s) in total)"
        )


class ProjectKind(enum.Enum):
    NEW_ARC = "new"
    IMPROVEMENT = "improvement"

    @classmethod
    def parse(cls, text: str) -> ProjectKind:
        key = text.strip().lower()
        aliases = {"new": cls.NEW_ARC, "newarc": cls.NEW_ARC, "new_arc": cls.NEW_ARC,
                   "improvement": cls.IMPROVEMENT, "improve": cls.IMPROVEMENT}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown project kind {text!r}") from None


@dataclass(frozen=True)
class Project:
    id: int
    kind: ProjectKind
    arcs: tuple
    cost: float

    def __post_init__(self):
        object.__setattr__(self, "arcs", tuple(self.arcs))
        if not self.cost > 0:
            raise ValidationError(f"project {self.id}: cost must be positive, got {self.cost}")
        if not self.arcs:
            raise ValidationError(f"project {self.id}: no arcs")


@dataclass(frozen=True)
class ProjectSet:
    projects: tuple
    budget: float

    def __post_init__(self):
        object.__setattr__(self, "projects", tuple(self.projects))
        for k, p in enumerate(self.projects, start=1):
            if p.id != k:
                raise ValidationError(
                    f"project ids must be 1..n in order; position {k} holds id {p.id}"
                )
        ids = [a.id for p in self.projects for a in p.arcs]
        if len(ids) != len(set(ids)):
            raise ValidationError("project arc ids are not unique")
        if not self.budget >= 0:
            raise ValidationError(f"budget must be nonnegative, got {self.budget}")

    def __len__(self):
        return len(self.projects)

    @cached_property
    def costs(self) -> np.ndarray:
        return np.array([p.cost for p in self.projects], dtype=float)

    @property
    def total_cost(self) -> float:
        return float(sum(p.cost for p in self.projects))

    def with_budget(self, budget: float) -> ProjectSet:
        return ProjectSet(self.projects, budget)


@dataclass(frozen=True)
class DecisionVector:
    """Accept/reject bit per project, in project order."""

    bits: tuple = field(default=())

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValidationError(f"decision entries must be 0 or 1: {self.bits!r}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_string(cls, text: str) -> DecisionVector:
        text = text.strip()
        if any(ch not in "01" for ch in text):
            raise ValidationError(f"decision string must contain only 0/1: {text!r}")
        return cls(tuple(int(ch) for ch in text))

    @classmethod
    def zeros(cls, n: int) -> DecisionVector:
        return cls((0,) * n)

    @classmethod
    def ones(cls, n: int) -> DecisionVector:
        return cls((1,) * n)

    def __len__(self):
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    def __getitem__(self, k):
        return self.bits[k]

    def __str__(self):
        return "".join(str(b) for b in self.bits)

    def accepted(self) -> list:
        """1-based ids of accepted projects."""
        return [k + 1 for k, b in enumerate(self.bits) if b]


def _check_dim(ps: ProjectSet, y: DecisionVector):
    if len(y) != len(ps.projects):
        raise DimensionMismatch(
            f"decision has {len(y)} bits but there are {len(ps.projects)} projects"
        )


def apply_decision(net: Network, ps: ProjectSet, y: DecisionVector) -> Network:
    """Decision network: base arcs plus the arcs of every accepted project."""
    _check_dim(ps, y)
    extra = [arc for bit, p in zip(y.bits, ps.projects) if bit for arc in p.arcs]
    return net.with_extra_arcs(extra)


def decision_cost(ps: ProjectSet, y: DecisionVector) -> float:
    _check_dim(ps, y)
    return float(sum(p.cost for bit, p in zip(y.bits, ps.projects) if bit))


def arc_travel_time(arc: Arc, flow: float) -> float:
    if flow < 0:
        raise DomainError(f"negative flow {flow} on arc {arc.id}")
    return arc.alpha + arc.beta * flow**4


def link_times(net: Network, flows: np.ndarray) -> np.ndarray:
    """Vectorised travel times; no validation."""
    return net.alpha + net.beta * flows**4


def total_travel_time(net: Network, flows) -> float:
    flows = np.asarray(flows, dtype=float)
    if flows.shape != (net.n_arcs,):
        raise DimensionMismatch(
            f"flow vector has shape {flows.shape}, network has {net.n_arcs} arcs"
        )
    if np.any(flows < 0):
        raise DomainError("flows must be nonnegative")
    return float(flows @ link_times(net, flows))

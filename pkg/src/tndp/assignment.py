"""User-equilibrium traffic assignment by the convex-combinations method.

Each iteration loads all demand onto current shortest paths (all-or-nothing),
then moves the flow vector part way toward a target by an exact line search
on the Beckmann objective ``sum_a (alpha_a x_a + beta_a x_a**5 / 5)``.  The
default target is the conjugate combination of the previous target and the
new all-or-nothing load, which keeps every iterate a convex combination of
feasible loads but converges much faster than the plain rule on congested
networks.  The default ``"biconjugate"`` rule blends the new load with the
two previous targets; ``"conjugate"`` uses one previous target and
``"frank-wolfe"`` the new load alone.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteValue, UnreachableDestination, ValidationError
from .network import Network, link_times

DIRECTIONS = ("biconjugate", "conjugate", "frank-wolfe")

# Upper cap on the conjugate weight; without it identical parallel arcs can
# pin the target to the previous one and stall the iteration.
_CONJUGATE_CAP = 0.99


@dataclass(frozen=True)
class AssignmentSettings:
    max_iterations: int = 300
    relative_gap_tolerance: float = 1e-4
    line_search_tolerance: float = 1e-8
    direction: str = "biconjugate"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if not (self.relative_gap_tolerance > 0 and self.line_search_tolerance > 0):
            raise ValidationError("tolerances must be positive")
        if self.direction not in DIRECTIONS:
            raise ValidationError(f"direction must be one of {DIRECTIONS}")


@dataclass
class EquilibriumResult:
    flows: np.ndarray
    total_time: float
    beckmann_value: float
    relative_gap: float
    iterations: int
    converged: bool
    beckmann_trace: list = field(default_factory=list, repr=False)
    gap_trace: list = field(default_factory=list, repr=False)


@dataclass
class ShortestPathTree:
    origin: int
    distance: list
    """Distance per node index; ``math.inf`` when unreachable."""
    pred_arc: list
    """Position of the arc entering each node on its shortest path, -1 at root."""
    order: list
    """Node indices in the order they were settled."""


def shortest_path_tree(net: Network, times, origin, check_demand=True) -> ShortestPathTree:
    """Label-setting shortest paths from ``origin`` (a node id).

    Ties in distance go to the entering arc with the smaller arc id, so the
    tree is a deterministic function of the inputs.
    """
    if origin not in net.node_index:
        raise ValidationError(f"unknown origin node {origin}")
    times = times.tolist() if isinstance(times, np.ndarray) else list(times)
    o = net.node_index[origin]
    n = len(net.nodes)
    dist = [math.inf] * n
    pred = [-1] * n
    done = [False] * n
    dist[o] = 0.0
    heap = [(0.0, o)]
    order = []
    out_arcs, head_index, arc_ids = net.out_arcs, net.head_index, net.arc_ids.tolist()
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        order.append(u)
        for a in out_arcs[u]:
            v = head_index[a]
            if done[v]:
                continue
            nd = d + times[a]
            if nd < dist[v] or (nd == dist[v] and arc_ids[a] < arc_ids[pred[v]]):
                dist[v] = nd
                pred[v] = a
                heapq.heappush(heap, (nd, v))
    if check_demand:
        row = net.demand_by_origin.get(o)
        if row is not None:
            for j, q in enumerate(row):
                if q > 0 and dist[j] == math.inf:
                    raise UnreachableDestination(origin, net.nodes[j])
    return ShortestPathTree(origin, dist, pred, order)


def all_or_nothing(net: Network, times) -> np.ndarray:
    """Load each OD demand onto its current shortest path."""
    flows = [0.0] * net.n_arcs
    tail_index = net.tail_index
    for o, row in net.demand_by_origin.items():
        tree = shortest_path_tree(net, times, net.nodes[o])
        load = list(row)
        pred = tree.pred_arc
        # settle order reversed: children before parents
        for u in reversed(tree.order):
            a = pred[u]
            if a < 0 or load[u] == 0.0:
                continue
            flows[a] += load[u]
            load[tail_index[a]] += load[u]
    return np.array(flows)


def beckmann(net: Network, flows) -> float:
    """Closed-form Beckmann objective ``sum alpha x + beta x^5 / 5``."""
    return float(np.sum(net.alpha * flows + net.beta * flows**5 / 5.0))


def relative_gap(net: Network, flows, aon_flows) -> float:
    times = link_times(net, flows)
    lower = float(aon_flows @ times)
    if lower <= 0.0:
        return 0.0
    return (float(flows @ times) - lower) / lower


def line_search(net: Network, x, x_aon, tol=1e-8) -> float:
    """Step in [0, 1] minimising the Beckmann objective along ``x + s (x_aon - x)``.

    Bisection on the monotone directional derivative.  The lower end of the
    final bracket is returned; the derivative is nonpositive there, so the
    objective never increases.
    """
    direction = x_aon - x
    alpha, beta = net.alpha, net.beta

    def slope(step):
        return float(direction @ (alpha + beta * (x + step * direction) ** 4))

    if slope(0.0) >= 0.0:
        return 0.0
    if slope(1.0) <= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return lo


def _conjugate_target(net, x, aon, previous):
    hess = 4.0 * net.beta * x**3
    prev_dir = previous - x
    num = float(prev_dir @ (hess * (aon - x)))
    den = float(prev_dir @ (hess * (aon - previous)))
    weight = 0.0
    if den != 0.0:
        weight = min(max(num / den, 0.0), _CONJUGATE_CAP)
    return weight * previous + (1.0 - weight) * aon


def _biconjugate_target(net, x, aon, prev1, prev2, prev_step):
    """Blend of the new load with the last two targets, or None when undefined."""
    if not 0.0 < prev_step < 1.0:
        return None
    hess = 4.0 * net.beta * x**3
    to_aon = hess * (aon - x)
    d1 = prev_step * prev1 - x + (1.0 - prev_step) * prev2
    d2 = prev1 - x
    den1 = float(d1 @ (hess * (prev2 - prev1)))
    den2 = float(d2 @ (hess * d2))
    if den1 == 0.0 or den2 == 0.0:
        return None
    mu = -float(d1 @ to_aon) / den1
    nu = -float(d2 @ to_aon) / den2 + mu * prev_step / (1.0 - prev_step)
    mu, nu = max(mu, 0.0), max(nu, 0.0)
    b0 = 1.0 / (1.0 + mu + nu)
    return b0 * aon + nu * b0 * prev1 + mu * b0 * prev2


def solve_ue(net: Network, settings: AssignmentSettings = AssignmentSettings()) -> EquilibriumResult:
    flows = all_or_nothing(net, net.alpha)
    prev1 = prev2 = None
    prev_step = 0.0
    b_trace, g_trace = [], []
    gap = math.inf
    iterations = 0
    converged = False
    with np.errstate(over="ignore", invalid="ignore"):
        for iterations in range(1, settings.max_iterations + 1):
            times = link_times(net, flows)
            if not np.all(np.isfinite(times)):
                raise NonFiniteValue("link travel times overflowed")
            aon = all_or_nothing(net, times)
            gap = relative_gap(net, flows, aon)
            b_trace.append(beckmann(net, flows))
            g_trace.append(gap)
            if gap <= settings.relative_gap_tolerance:
                converged = True
                break
            if iterations == settings.max_iterations:
                break
            target = None
            if settings.direction == "biconjugate" and prev2 is not None:
                target = _biconjugate_target(net, flows, aon, prev1, prev2, prev_step)
            if target is None and settings.direction != "frank-wolfe" and prev1 is not None:
                target = _conjugate_target(net, flows, aon, prev1)
            # fall back to the plain load whenever the blend is not a descent direction
            if target is None or float((target - flows) @ times) >= 0.0:
                target = aon
            step = line_search(net, flows, target, settings.line_search_tolerance)
            flows = flows + step * (target - flows)
            np.maximum(flows, 0.0, out=flows)
            prev2, prev1, prev_step = prev1, target, step
    total = float(flows @ link_times(net, flows))
    if not math.isfinite(total):
        raise NonFiniteValue("total travel time is not finite")
    return EquilibriumResult(
        flows=flows,
        total_time=total,
        beckmann_value=beckmann(net, flows),
        relative_gap=gap,
        iterations=iterations,
        converged=converged,
        beckmann_trace=b_trace,
        gap_trace=g_trace,
    )

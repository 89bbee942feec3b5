"""Dijkstra planning over cost maps, plus the shortest-feasible baseline."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoPath, UnobservedEndpoint
from .kernels import dijkstra_grid

METRIC_OPTIMAL = "metric_optimal"
SHORTEST_FEASIBLE = "shortest_feasible"


@dataclass(frozen=True)
class PlanRequest:
    start: tuple
    goal: tuple
    mode: str = METRIC_OPTIMAL
    feasibility_threshold: float = 0.8
    connectivity: int = 8

    def __post_init__(self):
        if self.mode not in (METRIC_OPTIMAL, SHORTEST_FEASIBLE):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0 < self.feasibility_threshold <= 1:
            raise ValueError("feasibility_threshold must lie in (0, 1]")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if tuple(self.start) == tuple(self.goal):
            raise ValueError("start and goal must differ")


@dataclass(frozen=True)
class PathPlan:
    waypoints: list
    cells: list
    total_cost: float
    total_length: float
    mode: str = METRIC_OPTIMAL

    def metric_cost(self, cmap):
        """Cost of this path under metric-optimal edge weights."""
        return path_cost(self.cells, cmap.values, cmap.cell_size)


def passable_mask(cmap, threshold):
    vals = cmap.values
    return cmap.observed & (np.nan_to_num(vals, nan=np.inf) <= threshold)


def path_cost(cells, values, cell_size):
    total = 0.0
    for (i0, j0), (i1, j1) in zip(cells[:-1], cells[1:]):
        step = math.sqrt(2.0) if (i0 != i1 and j0 != j1) else 1.0
        total += step * (0.5 * (values[i0, j0] + values[i1, j1]))
    return total * cell_size


def plan(cmap, req):
    """Minimum-cost grid path from ``req.start`` to ``req.goal`` (world coordinates).

    Edge weight is step length (meters) times the mean of the two endpoint
    values in metric-optimal mode, step length alone in shortest-feasible
    mode. Cells above the threshold or never observed are impassable.
    """
    start = cmap.world_to_cell(*req.start)
    goal = cmap.world_to_cell(*req.goal)
    if start == goal:
        raise ValueError("start and goal fall in the same cell")
    ok = passable_mask(cmap, req.feasibility_threshold)
    for name, cell in (("start", start), ("goal", goal)):
        if not cmap.contains(*cell) or not cmap.observed[cell]:
            raise UnobservedEndpoint(f"{name} {cell} is outside the map or unobserved")
        if not ok[cell]:
            raise NoPath(f"{name} cell {cell} exceeds the feasibility threshold")
    vals = np.nan_to_num(cmap.values, nan=0.0)
    w = cmap.shape[1]
    flat, total = dijkstra_grid(vals, ok.astype(np.uint8), start[0] * w + start[1], goal[0] * w + goal[1],
                                req.connectivity, req.mode == METRIC_OPTIMAL)
    if not flat:
        raise NoPath(f"no feasible path from {start} to {goal}")
    cells = [divmod(int(k), w) for k in flat]
    waypoints = [tuple(float(c) for c in cmap.cell_center(i, j)) for i, j in cells]
    length = sum(math.hypot(a[0] - b[0], a[1] - b[1]) for a, b in zip(waypoints[:-1], waypoints[1:]))
    return PathPlan(waypoints, cells, float(total) * cmap.cell_size, length, req.mode)


def path_metrics(p, cmap):
    """Length, mean and max cell value along a plan."""
    vals = np.array([cmap.values[i, j] for i, j in p.cells])
    length = sum(math.hypot(a[0] - b[0], a[1] - b[1]) for a, b in zip(p.waypoints[:-1], p.waypoints[1:]))
    return {"length": float(length), "mean_cost": float(vals.mean()), "max_cost": float(vals.max()),
            "metric_cost": float(path_cost(p.cells, cmap.values, cmap.cell_size))}


def cumulative_costs(p, cmap, weighted=True):
    """Running edge-cost sum at each waypoint."""
    out = [0.0]
    vals = cmap.values
    for (i0, j0), (i1, j1) in zip(p.cells[:-1], p.cells[1:]):
        step = math.sqrt(2.0) if (i0 != i1 and j0 != j1) else 1.0
        w = step * (0.5 * (vals[i0, j0] + vals[i1, j1])) if weighted else step
        out.append(out[-1] + w * cmap.cell_size)
    return out

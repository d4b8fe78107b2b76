"""Inspection planning: sweep routes, waypoint generation, greedy multi-agent
waypoint assignment, and Dijkstra-based receding-horizon path steps.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, PlanningError
from .world import (FACE_STEPS, FREE, OCCUPIED, NavGraph, OccupancyMap,
                    OperationalVolume, Voxel, voxel_to_world, world_to_voxel)


@dataclass(frozen=True)
class Waypoint:
    """Inspection pose seed: a free-voxel center plus the unit direction toward
    the occupied voxel that triggered it."""

    position: tuple[float, float, float]
    direction: tuple[float, float, float]
    source_voxel: Voxel
    voxel: Voxel

    @property
    def position_arr(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)

    @property
    def direction_arr(self) -> np.ndarray:
        return np.asarray(self.direction, dtype=float)


@dataclass
class InspectionPath:
    waypoints: list[Waypoint]
    owner: int
    epoch: int = 0

    def __len__(self) -> int:
        return len(self.waypoints)


def mapping_paths(volume: OperationalVolume, starts, n_explorers: int,
                  margin: float = 0.0) -> list[list[np.ndarray]]:
    """Straight out-and-back survey passes along the volume's longest axis.

    The cross-section perpendicular to the longest axis is split into one band
    per explorer along the next-longest axis; each pass runs through its band
    center at the middle of the remaining axis.  Passes are returned as
    waypoint lists ordered so each explorer starts from its nearer end, pulled
    inward from the volume faces by margin.
    """
    if n_explorers < 1:
        raise ConfigurationError("need at least one explorer for mapping paths")
    if len(starts) < n_explorers:
        raise ConfigurationError("fewer start positions than explorers")
    ext = volume.extent
    order = sorted(range(3), key=lambda a: (-ext[a], a))
    long_axis, band_axis, mid_axis = order
    lo, hi = volume.lo_arr, volume.hi_arr

    paths = []
    band_width = ext[band_axis] / n_explorers
    for i in range(n_explorers):
        a = np.zeros(3)
        b = np.zeros(3)
        a[long_axis] = lo[long_axis] + margin
        b[long_axis] = hi[long_axis] - margin
        for p in (a, b):
            p[band_axis] = lo[band_axis] + (i + 0.5) * band_width
            p[mid_axis] = lo[mid_axis] + ext[mid_axis] / 2.0
        start = np.asarray(starts[i], dtype=float)
        if np.linalg.norm(start - a) <= np.linalg.norm(start - b):
            near, far = a, b
        else:
            near, far = b, a
        paths.append([near, far, near.copy()])
    return paths


def generate_waypoints(occ_map: OccupancyMap, boxes, standoff: float) -> list[Waypoint]:
    """Waypoints around occupied voxels that lie inside the inspection boxes.

    For every such voxel with at least one free face neighbor, each free face
    direction yields a candidate at standoff along that face normal from the
    occupied center, snapped to the containing voxel center.  Candidates whose
    voxel is not free (or is off-grid) are dropped.  Duplicates by (voxel,
    direction) are removed; ordering is deterministic.
    """
    grid = occ_map.grid
    if standoff <= 0:
        raise ConfigurationError("waypoint standoff must be positive")
    out: list[Waypoint] = []
    seen: set[tuple[Voxel, tuple[int, int, int]]] = set()
    occupied = occ_map.occupied_voxels()
    if len(occupied) == 0 or not boxes:
        return out
    centers = grid.origin_arr + (occupied + 0.5) * grid.voxel_size
    in_box = np.zeros(len(occupied), dtype=bool)
    for b in boxes:
        in_box |= np.all((centers >= b.lo) & (centers <= b.hi), axis=1)

    dims = grid.dims
    cells = occ_map.cells
    for row, center in zip(occupied[in_box], centers[in_box]):
        vx = (int(row[0]), int(row[1]), int(row[2]))
        for step in FACE_STEPS:
            nb = (vx[0] + step[0], vx[1] + step[1], vx[2] + step[2])
            if not (0 <= nb[0] < dims[0] and 0 <= nb[1] < dims[1] and 0 <= nb[2] < dims[2]):
                continue
            if cells[nb] != FREE:
                continue
            normal = np.asarray(step, dtype=float)
            pos = center + normal * standoff
            try:
                wp_voxel = world_to_voxel(grid, pos)
            except Exception:
                continue
            if cells[wp_voxel] != FREE:
                continue
            wp_pos = voxel_to_world(grid, wp_voxel)
            n_hat = center - wp_pos
            norm = np.linalg.norm(n_hat)
            if norm < 1e-12:
                continue
            n_hat = n_hat / norm
            key = (wp_voxel, (-step[0], -step[1], -step[2]))
            if key in seen:
                continue
            seen.add(key)
            out.append(Waypoint(tuple(wp_pos.tolist()), tuple(n_hat.tolist()),
                                vx, wp_voxel))
    return out


def mtsp_assign(waypoints: list[Waypoint],
                positions: dict[int, np.ndarray]) -> dict[int, InspectionPath]:
    """Greedy round-robin nearest-neighbor split of the waypoints over agents.

    Every path starts at its agent's position.  Agents take turns in ascending
    id; on each turn an agent appends the unvisited waypoint closest to the
    last element of its path and marks it visited, until none remain.  Distance
    ties go to the lowest waypoint index.  The returned paths are an exact
    partition of the input waypoints.
    """
    if not positions:
        raise ConfigurationError("mtsp needs at least one agent position")
    ids = sorted(positions)
    tails = {i: np.asarray(positions[i], dtype=float) for i in ids}
    routes: dict[int, list[Waypoint]] = {i: [] for i in ids}
    coords = np.array([w.position for w in waypoints], dtype=float).reshape(-1, 3)
    unvisited = list(range(len(waypoints)))

    while unvisited:
        for i in ids:
            if not unvisited:
                break
            rel = coords[unvisited] - tails[i]
            d2 = np.einsum("nk,nk->n", rel, rel)
            pick = int(np.argmin(d2))          # argmin takes the first of equals
            w_idx = unvisited.pop(pick)
            routes[i].append(waypoints[w_idx])
            tails[i] = coords[w_idx]
    return {i: InspectionPath(routes[i], owner=i) for i in ids}


def dijkstra_path(graph: NavGraph, occ_map: OccupancyMap, reserved: set,
                  start: Voxel, goal: Voxel) -> list[Voxel]:
    """Shortest collision-free voxel path from start to goal.

    Traversable voxels are the non-occupied cells of the map minus reserved
    voxels (other agents' current cells).  Ties are broken lexicographically by
    voxel index so replanning is reproducible.  Returns [] when the goal is
    unreachable; the path includes both endpoints.
    """
    start = tuple(start)
    goal = tuple(goal)
    cells = occ_map.cells
    if cells[start] == OCCUPIED:
        raise PlanningError(f"start voxel {start} is occupied")
    if start in reserved:
        raise PlanningError(f"start voxel {start} is reserved")
    dims = occ_map.grid.dims
    if not occ_map.grid.in_bounds(goal):
        return []
    if cells[goal] == OCCUPIED or goal in reserved:
        return []
    if start == goal:
        return [start]

    weight = graph.edge_weight
    dist: dict[Voxel, float] = {start: 0.0}
    prev: dict[Voxel, Voxel] = {}
    heap: list[tuple[float, Voxel]] = [(0.0, start)]
    settled: set[Voxel] = set()
    while heap:
        d, v = heapq.heappop(heap)
        if v in settled:
            continue
        settled.add(v)
        if v == goal:
            break
        x, y, z = v
        for dx, dy, dz in FACE_STEPS:
            n = (x + dx, y + dy, z + dz)
            if not (0 <= n[0] < dims[0] and 0 <= n[1] < dims[1] and 0 <= n[2] < dims[2]):
                continue
            if n in settled or cells[n] == OCCUPIED or n in reserved:
                continue
            nd = d + weight
            if nd < dist.get(n, float("inf")):
                dist[n] = nd
                prev[n] = v
                heapq.heappush(heap, (nd, n))
    if goal not in settled:
        return []
    path = [goal]
    while path[-1] != start:
        path.append(prev[path[-1]])
    path.reverse()
    return path


@dataclass
class PlanStep:
    """Result of one receding-horizon planning step."""

    segment: list[Voxel]                 # next voxels to execute, at most horizon
    waypoint: Waypoint | None            # current receding waypoint, None when done
    direction: np.ndarray | None         # camera directive for the receding waypoint
    next_index: int                      # cursor into the inspection path
    epoch_complete: bool
    skipped: list[int] = field(default_factory=list)


def drhlp_step(agent_voxel: Voxel, path: InspectionPath, cursor: int,
               graph: NavGraph, occ_map: OccupancyMap, reserved: set,
               horizon: int) -> PlanStep:
    """Advance the receding-horizon plan toward the next unvisited waypoint.

    Waypoints are marked visited when the agent's voxel matches theirs, and
    skipped when unreachable under the current map and reservations.  When the
    cursor runs off the end of the path the epoch is complete.
    """
    if horizon < 1:
        raise ConfigurationError("horizon must be at least 1")
    idx = cursor
    skipped: list[int] = []
    while idx < len(path.waypoints):
        wp = path.waypoints[idx]
        if tuple(agent_voxel) == wp.voxel:
            idx += 1
            continue
        route = dijkstra_path(graph, occ_map, reserved, tuple(agent_voxel), wp.voxel)
        if not route:
            skipped.append(idx)
            idx += 1
            continue
        return PlanStep(route[1:1 + horizon], wp, wp.direction_arr, idx, False, skipped)
    return PlanStep([], None, None, idx, True, skipped)

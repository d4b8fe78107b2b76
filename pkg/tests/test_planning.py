from collections import deque

import numpy as np
import pytest

from uavinspect.errors import ConfigurationError, PlanningError
from uavinspect.planning import (InspectionPath, Waypoint, dijkstra_path,
                                 drhlp_step, generate_waypoints, mapping_paths,
                                 mtsp_assign)
from uavinspect.world import (FREE, OCCUPIED, BoundingBox, OccupancyMap,
                              OperationalVolume, VoxelGrid, build_graph)


def free_map(dims, voxel=6.0):
    grid = VoxelGrid((0, 0, 0), dims, voxel)
    m = OccupancyMap(grid)
    m.cells[:] = FREE
    return m


def wp(pos, direction=(1.0, 0.0, 0.0), voxel=(0, 0, 0)):
    return Waypoint(tuple(float(c) for c in pos), direction, voxel, voxel)


# --- survey sweep paths ------------------------------------------------------

def test_two_band_sweeps_along_longest_axis():
    vol = OperationalVolume((0, 0, 0), (140, 60, 60))
    paths = mapping_paths(vol, [(0, 10, 30), (0, 50, 30)], 2)
    assert len(paths) == 2
    for path, band_y in zip(paths, (15.0, 45.0)):
        assert len(path) == 3
        assert np.allclose(path[0], (0, band_y, 30))
        assert np.allclose(path[1], (140, band_y, 30))
        assert np.allclose(path[2], path[0])


def test_single_explorer_center_line():
    vol = OperationalVolume((0, 0, 0), (10, 4, 4))
    (path,) = mapping_paths(vol, [(9.5, 0, 0)], 1)
    # nearer endpoint comes first
    assert np.allclose(path[0], (10, 2, 2))
    assert np.allclose(path[1], (0, 2, 2))


def test_vertical_volume_gives_vertical_pass():
    vol = OperationalVolume((0, 0, 0), (4, 4, 20))
    (path,) = mapping_paths(vol, [(2, 2, 1)], 1)
    assert np.allclose(path[0], (2, 2, 0))
    assert np.allclose(path[1], (2, 2, 20))


def test_margin_pulls_endpoints_inward():
    vol = OperationalVolume((0, 0, 0), (60, 12, 12))
    (path,) = mapping_paths(vol, [(0, 0, 0)], 1, margin=3.0)
    assert np.allclose(path[0], (3, 6, 6))
    assert np.allclose(path[1], (57, 6, 6))


def test_mapping_paths_rejects_bad_explorer_count():
    vol = OperationalVolume((0, 0, 0), (10, 10, 10))
    with pytest.raises(ConfigurationError):
        mapping_paths(vol, [], 0)
    with pytest.raises(ConfigurationError):
        mapping_paths(vol, [(0, 0, 0)], 2)


# --- waypoint generation -------------------------------------------------------

def big_box():
    return [BoundingBox((-1000, -1000, -1000), (1000, 1000, 1000))]


def test_isolated_occupied_voxel_yields_six_waypoints():
    m = free_map((5, 5, 5))
    m.cells[2, 2, 2] = OCCUPIED
    wps = generate_waypoints(m, big_box(), standoff=6.0)
    assert len(wps) == 6
    center = np.array([15.0, 15.0, 15.0])
    for w in wps:
        n = w.direction_arr
        assert np.linalg.norm(n) == pytest.approx(1.0)
        # direction points from the waypoint back at the occupied center
        assert np.allclose(w.position_arr + n * 6.0, center)
        assert sorted(np.abs(n)) == pytest.approx([0.0, 0.0, 1.0])
        assert m.cells[w.voxel] == FREE
        assert w.source_voxel == (2, 2, 2)


def test_occupied_voxel_outside_boxes_ignored():
    m = free_map((5, 5, 5))
    m.cells[2, 2, 2] = OCCUPIED
    far = [BoundingBox((100, 100, 100), (200, 200, 200))]
    assert generate_waypoints(m, far, standoff=6.0) == []


def brute_force_free_faces(m):
    faces = 0
    dims = m.grid.dims
    for v in np.argwhere(m.cells == OCCUPIED):
        for step in ((-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)):
            n = tuple(v + np.array(step))
            if all(0 <= n[a] < dims[a] for a in range(3)) and m.cells[n] == FREE:
                faces += 1
    return faces


def test_two_voxel_slab_yields_ten_waypoints():
    m = free_map((6, 5, 5))
    m.cells[2, 2, 2] = OCCUPIED
    m.cells[3, 2, 2] = OCCUPIED
    wps = generate_waypoints(m, big_box(), standoff=6.0)
    assert brute_force_free_faces(m) == 10
    assert len(wps) == 10


def test_waypoints_skip_unknown_neighbors_and_blocked_standoff():
    m = free_map((7, 5, 5))
    m.cells[3, 2, 2] = OCCUPIED
    m.cells[2, 2, 2] = 0          # unknown face neighbor: no waypoint that way
    m.cells[5, 2, 2] = OCCUPIED   # blocks the +x standoff cell at distance 2V
    wps = generate_waypoints(m, big_box(), standoff=12.0)
    directions = {tuple(np.round(w.direction_arr).astype(int)) for w in wps
                  if w.source_voxel == (3, 2, 2)}
    assert (1, 0, 0) not in directions     # -x side blocked by unknown
    assert (-1, 0, 0) not in directions    # +x standoff cell occupied
    assert (0, 1, 0) in directions and (0, 0, 1) in directions


def test_waypoint_standoff_snaps_to_voxel_centers():
    m = free_map((7, 7, 7))
    m.cells[3, 3, 3] = OCCUPIED
    wps = generate_waypoints(m, big_box(), standoff=12.0)
    assert len(wps) == 6
    for w in wps:
        assert np.allclose(w.position_arr + w.direction_arr * 12.0,
                           [21.0, 21.0, 21.0])


def test_waypoints_deduplicated_and_deterministic():
    m = free_map((8, 8, 8))
    m.cells[2:4, 3, 3] = OCCUPIED
    a = generate_waypoints(m, big_box(), standoff=6.0)
    b = generate_waypoints(m, big_box(), standoff=6.0)
    assert a == b
    keys = {(w.voxel, tuple(np.round(w.direction_arr, 9))) for w in a}
    assert len(keys) == len(a)


# --- greedy multi-salesman assignment --------------------------------------------

def test_mtsp_hand_trace():
    wps = [wp((1, 0, 0)), wp((9, 0, 0)), wp((2, 0, 0))]
    positions = {1: np.array([0.0, 0.0, 0.0]), 2: np.array([10.0, 0.0, 0.0])}
    out = mtsp_assign(wps, positions)
    assert [w.position for w in out[1].waypoints] == [(1.0, 0.0, 0.0), (2.0, 0.0, 0.0)]
    assert [w.position for w in out[2].waypoints] == [(9.0, 0.0, 0.0)]


def test_mtsp_single_agent_is_nearest_neighbor_tour():
    rng = np.random.default_rng(61)
    pts = rng.uniform(0, 50, (12, 3))
    wps = [wp(p) for p in pts]
    out = mtsp_assign(wps, {0: np.zeros(3)})
    tour = [w.position_arr for w in out[0].waypoints]
    assert len(tour) == 12
    # replay the greedy rule independently
    remaining = list(range(12))
    cur = np.zeros(3)
    expected = []
    while remaining:
        dists = [float(np.linalg.norm(pts[i] - cur)) for i in remaining]
        pick = remaining.pop(int(np.argmin(dists)))
        expected.append(pick)
        cur = pts[pick]
    assert [tuple(t) for t in tour] == [tuple(pts[i]) for i in expected]


def test_mtsp_no_waypoints_gives_empty_paths():
    out = mtsp_assign([], {0: np.zeros(3), 4: np.ones(3)})
    assert len(out[0].waypoints) == 0
    assert len(out[4].waypoints) == 0


def test_mtsp_partitions_waypoints_randomized():
    rng = np.random.default_rng(67)
    for _ in range(50):
        n_agents = int(rng.integers(1, 6))
        n_wp = int(rng.integers(0, 40))
        wps = [wp(p) for p in rng.uniform(-30, 30, (n_wp, 3))]
        positions = {int(i): rng.uniform(-30, 30, 3)
                     for i in rng.choice(100, size=n_agents, replace=False)}
        out = mtsp_assign(wps, positions)
        assigned = [w for p in out.values() for w in p.waypoints]
        assert len(assigned) == n_wp
        seen = {id(w) for w in assigned}
        assert len(seen) == n_wp
        assert set(out.keys()) == set(positions.keys())


def test_mtsp_requires_positions():
    with pytest.raises(ConfigurationError):
        mtsp_assign([wp((0, 0, 0))], {})


# --- shortest paths ---------------------------------------------------------------

def bfs_hops(occ_map, reserved, start, goal):
    if occ_map.cells[goal] == OCCUPIED or goal in reserved:
        return None
    dims = occ_map.grid.dims
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        v, d = queue.popleft()
        if v == goal:
            return d
        for step in ((-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)):
            n = (v[0] + step[0], v[1] + step[1], v[2] + step[2])
            if not all(0 <= n[a] < dims[a] for a in range(3)):
                continue
            if n in seen or occ_map.cells[n] == OCCUPIED or n in reserved:
                continue
            seen.add(n)
            queue.append((n, d + 1))
    return None


def test_dijkstra_straight_corridor():
    m = free_map((3, 1, 1))
    g = build_graph(m.grid, m)
    path = dijkstra_path(g, m, set(), (0, 0, 0), (2, 0, 0))
    assert path == [(0, 0, 0), (1, 0, 0), (2, 0, 0)]
    assert (len(path) - 1) * g.edge_weight == 12.0


def test_dijkstra_detours_around_center_obstacle():
    m = free_map((3, 3, 1))
    m.cells[1, 1, 0] = OCCUPIED
    g = build_graph(m.grid, m)
    path = dijkstra_path(g, m, set(), (0, 1, 0), (2, 1, 0))
    assert len(path) == 5
    assert (1, 1, 0) not in path


def test_dijkstra_same_start_and_goal():
    m = free_map((2, 2, 2))
    g = build_graph(m.grid, m)
    assert dijkstra_path(g, m, set(), (1, 1, 1), (1, 1, 1)) == [(1, 1, 1)]


def test_dijkstra_respects_reservations():
    m = free_map((3, 1, 1))
    g = build_graph(m.grid, m)
    assert dijkstra_path(g, m, {(1, 0, 0)}, (0, 0, 0), (2, 0, 0)) == []
    with pytest.raises(PlanningError):
        dijkstra_path(g, m, {(0, 0, 0)}, (0, 0, 0), (2, 0, 0))


def test_dijkstra_start_occupied_raises():
    m = free_map((3, 1, 1))
    m.cells[0, 0, 0] = OCCUPIED
    g = build_graph(m.grid, m)
    with pytest.raises(PlanningError):
        dijkstra_path(g, m, set(), (0, 0, 0), (2, 0, 0))


def test_dijkstra_matches_bfs_oracle_random_grids():
    rng = np.random.default_rng(71)
    for _ in range(30):
        m = free_map((8, 8, 8), voxel=6.0)
        blocked = rng.random((8, 8, 8)) < 0.2
        m.cells[blocked] = OCCUPIED
        g = build_graph(m.grid, m)
        free_cells = [tuple(v) for v in np.argwhere(m.cells == FREE)]
        if len(free_cells) < 2:
            continue
        idx = rng.choice(len(free_cells), size=2, replace=False)
        start, goal = free_cells[idx[0]], free_cells[idx[1]]
        path = dijkstra_path(g, m, set(), start, goal)
        hops = bfs_hops(m, set(), start, goal)
        if hops is None:
            assert path == []
        else:
            assert len(path) - 1 == hops
            for v in path:
                assert m.cells[v] == FREE
            for a, b in zip(path, path[1:]):
                assert sum(abs(a[i] - b[i]) for i in range(3)) == 1


def test_dijkstra_deterministic_tie_breaks():
    m = free_map((5, 5, 1))
    g = build_graph(m.grid, m)
    p1 = dijkstra_path(g, m, set(), (0, 0, 0), (4, 4, 0))
    p2 = dijkstra_path(g, m, set(), (0, 0, 0), (4, 4, 0))
    assert p1 == p2


# --- receding-horizon step ----------------------------------------------------------

def corridor_path(m, owner=0):
    """One waypoint at the far end of a 10-voxel corridor."""
    goal = (9, 0, 0)
    center = tuple((np.array(goal) + 0.5) * m.grid.voxel_size)
    return InspectionPath([Waypoint(center, (1.0, 0.0, 0.0), goal, goal)], owner)


def test_drhlp_horizon_limits_segment():
    m = free_map((10, 1, 1))
    g = build_graph(m.grid, m)
    sigma = corridor_path(m)
    step = drhlp_step((0, 0, 0), sigma, 0, g, m, set(), horizon=3)
    assert step.segment == [(1, 0, 0), (2, 0, 0), (3, 0, 0)]
    assert not step.epoch_complete
    assert step.waypoint is sigma.waypoints[0]
    # from the fourth voxel the replanned segment continues toward the goal
    step2 = drhlp_step((3, 0, 0), sigma, step.next_index, g, m, set(), horizon=3)
    assert step2.segment == [(4, 0, 0), (5, 0, 0), (6, 0, 0)]


def test_drhlp_adjacent_waypoint_then_epoch_complete():
    m = free_map((2, 1, 1))
    g = build_graph(m.grid, m)
    goal = (1, 0, 0)
    sigma = InspectionPath([Waypoint((9.0, 3.0, 3.0), (1, 0, 0), goal, goal)], 0)
    step = drhlp_step((0, 0, 0), sigma, 0, g, m, set(), horizon=3)
    assert step.segment == [(1, 0, 0)]
    done = drhlp_step((1, 0, 0), sigma, step.next_index, g, m, set(), horizon=3)
    assert done.epoch_complete
    assert done.next_index == 1


def test_drhlp_skips_unreachable_waypoint():
    m = free_map((4, 1, 1))
    m.cells[1, 0, 0] = OCCUPIED
    g = build_graph(m.grid, m)
    unreachable = (3, 0, 0)
    reachable = (0, 0, 0)
    sigma = InspectionPath([
        Waypoint((21.0, 3.0, 3.0), (1, 0, 0), unreachable, unreachable),
        Waypoint((3.0, 3.0, 3.0), (1, 0, 0), reachable, reachable),
    ], 0)
    step = drhlp_step((0, 0, 0), sigma, 0, g, m, set(), horizon=3)
    # first waypoint skipped, second is where the agent already stands
    assert step.skipped == [0]
    assert step.epoch_complete
    assert step.next_index == 2


def test_drhlp_replans_around_new_blockage():
    m = free_map((5, 2, 1))
    g = build_graph(m.grid, m)
    goal = (4, 0, 0)
    sigma = InspectionPath([Waypoint((27.0, 3.0, 3.0), (1, 0, 0), goal, goal)], 0)
    first = drhlp_step((0, 0, 0), sigma, 0, g, m, set(), horizon=2)
    assert first.segment == [(1, 0, 0), (2, 0, 0)]
    # a new obstacle appears mid-route; the next replan detours through y=1
    m.cells[2, 0, 0] = OCCUPIED
    second = drhlp_step((1, 0, 0), sigma, 0, g, m, set(), horizon=4)
    assert (2, 0, 0) not in second.segment
    assert (1, 1, 0) in second.segment or (2, 1, 0) in second.segment

"""Mission orchestration.

Each tick runs five serialized stages: sense (LiDAR into per-agent maps),
exchange (LoS-gated map gossip), plan (waypoint generation, assignment, and
receding-horizon path steps), act (claim-arbitrated motion plus gimbal
pointing), and score (camera observations folded into the ledger).

Stage one of a mission is the survey: explorers fly their sweep routes while
mapping; photographers hold until they hear from an explorer that has finished
its route.  Stage two is cooperative inspection, which runs until the mission
clock expires.  Everything is deterministic for a fixed config and scene.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .agents import (EXPLORER, KINDS, PHOTOGRAPHER, AgentState, GimbalLimits,
                     GimbalState, TrackingConfig, step_dynamics, track_segment,
                     point_gimbal)
from .comms import NeighborSet, discover_neighbors, exchange_and_merge
from .errors import ConfigurationError, OutOfBoundsError, PlanningError
from .planning import (InspectionPath, dijkstra_path, drhlp_step,
                       generate_waypoints, mapping_paths, mtsp_assign)
from .scene import Scene, scene_occupancy
from .sensors import CameraConfig, LidarConfig, Observation, lidar_sweep, observe
from .world import (FREE, UNKNOWN, OccupancyMap, build_graph, build_grid,
                    carve_free, compute_operational_volume, integrate_points,
                    save_map, voxel_to_world, world_to_voxel)


@dataclass(frozen=True)
class AgentSpec:
    kind: str
    start: tuple[float, float, float]
    v_max: float | None = None          # defaults by kind when None
    omega_max: float = 1.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown agent kind {self.kind!r}")

    @property
    def speed_limit(self) -> float:
        if self.v_max is not None:
            return self.v_max
        return 4.0 if self.kind == EXPLORER else 5.0


@dataclass(frozen=True)
class MissionConfig:
    duration: float
    agents: tuple[AgentSpec, ...]
    tick: float = 0.1
    voxel_size: float = 6.0
    horizon: int = 3
    waypoint_standoff: float | None = None     # defaults to one voxel
    capture_stride: int = 1
    blocked_replan_ticks: int = 12
    seed: int = 0
    camera: CameraConfig = CameraConfig()
    lidar: LidarConfig = LidarConfig()
    gimbal: GimbalLimits = GimbalLimits()
    tracking: TrackingConfig = TrackingConfig()

    def __post_init__(self):
        if self.duration <= 0:
            raise ConfigurationError("mission duration must be positive")
        if self.tick <= 0:
            raise ConfigurationError("tick must be positive")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be at least 1")
        if self.capture_stride < 1:
            raise ConfigurationError("capture stride must be at least 1")
        n_e = sum(1 for a in self.agents if a.kind == EXPLORER)
        if n_e not in (1, 2):
            raise ConfigurationError(f"explorer count must be 1 or 2, got {n_e}")

    @property
    def standoff(self) -> float:
        return self.waypoint_standoff if self.waypoint_standoff else self.voxel_size

    @property
    def num_explorers(self) -> int:
        return sum(1 for a in self.agents if a.kind == EXPLORER)


class ScoreLedger:
    """Best observation quality per interest point over all agents and time."""

    def __init__(self, point_ids, quality_floor: float):
        self.point_ids = np.asarray(point_ids, dtype=int)
        self.floor = float(quality_floor)
        self._index = {int(p): i for i, p in enumerate(self.point_ids)}
        if len(self._index) != len(self.point_ids):
            raise ConfigurationError("interest point ids are not unique")
        n = len(self.point_ids)
        self.best_q = np.zeros(n)
        self.best_q_blur = np.zeros(n)
        self.best_q_res = np.zeros(n)
        self.counts = np.zeros(n, dtype=int)

    @property
    def num_points(self) -> int:
        return len(self.point_ids)

    def index_of(self, point_id: int) -> int:
        try:
            return self._index[int(point_id)]
        except KeyError:
            raise KeyError(f"unknown interest point id {point_id}") from None

    def mean_best(self) -> float:
        if self.num_points == 0:
            return 0.0
        return float(self.best_q.mean())


def update_ledger(ledger: ScoreLedger, observations: list[Observation]) -> ScoreLedger:
    """Fold observations into the ledger.  Only qualities strictly above the
    floor count; the per-point best is a running max."""
    for o in observations:
        i = ledger.index_of(o.point_id)
        if o.q > ledger.floor:
            ledger.counts[i] += 1
            if o.q > ledger.best_q[i]:
                ledger.best_q[i] = o.q
                ledger.best_q_blur[i] = o.q_blur
                ledger.best_q_res[i] = o.q_res
    return ledger


def inspection_score(ledger: ScoreLedger) -> float:
    """Sum over interest points of the best quality any agent ever achieved.

    Uses exact summation so the result is independent of accumulation order
    and reproducible from the raw observation log.
    """
    return math.fsum(ledger.best_q.tolist())


def intensity_heatmap(ledger: ScoreLedger, scene: Scene) -> list[tuple]:
    """Per-point inspection intensity: (id, x, y, z, count, best_q) records."""
    out = []
    for i, pid in enumerate(ledger.point_ids):
        x, y, z = scene.point_positions[i]
        out.append((int(pid), float(x), float(y), float(z),
                    int(ledger.counts[i]), float(ledger.best_q[i])))
    return out


@dataclass
class MissionResult:
    q_total: float
    ledger: ScoreLedger
    score_trace: list[float]
    observations: list[tuple]            # (tick, agent, point_id, q_blur, q_res, q)
    connectivity: list[tuple]            # (tick, ((i, j), ...))
    plan_events: list[str]
    voxel_trace: list[tuple]             # (tick, ((agent, voxel), ...))
    collisions_same_voxel: int
    occupied_entries: int
    clamp_events: int
    phase_change_ticks: dict[int, int]
    final_maps: dict[int, OccupancyMap]
    phase_maps: dict[int, OccupancyMap]
    heatmap: list[tuple]
    num_ticks: int

    @property
    def violations(self) -> int:
        return self.collisions_same_voxel + self.occupied_entries

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr(self.q_total).encode())
        h.update(repr(self.score_trace).encode())
        h.update(repr(self.observations).encode())
        h.update(repr(self.voxel_trace).encode())
        h.update(repr(self.connectivity).encode())
        for i in sorted(self.final_maps):
            h.update(self.final_maps[i].cells.tobytes())
        return h.hexdigest()


def average_quality_trace(result: MissionResult) -> np.ndarray:
    """Per-tick mean of the ledger's best quality over all interest points."""
    return np.asarray(result.score_trace, dtype=float)


@dataclass
class _Runtime:
    """Mutable per-agent bookkeeping owned by the tick loop."""

    spec: AgentSpec
    state: AgentState
    gimbal: GimbalState
    occ: OccupancyMap
    voxel: tuple
    phase: int = 1
    route: list = field(default_factory=list)
    route_idx: int = 0
    sigma: InspectionPath | None = None
    cursor: int = 0
    kappa: int = 0
    segment: list = field(default_factory=list)
    seg_i: int = 0
    look_dir: np.ndarray | None = None
    need_replan: bool = True
    blocked: int = 0
    blocked_replans: int = 0

    @property
    def id(self) -> int:
        return self.state.id


class _Mission:
    def __init__(self, cfg: MissionConfig, scene: Scene):
        self.cfg = cfg
        self.scene = scene
        starts = [np.asarray(a.start, dtype=float) for a in cfg.agents]
        if not scene.inspection_boxes:
            raise ConfigurationError("scene has no inspection boxes")
        self.volume = compute_operational_volume(scene.inspection_boxes, starts,
                                                 cfg.voxel_size)
        self.grid = build_grid(self.volume, cfg.voxel_size)
        self.graph = build_graph(self.grid, OccupancyMap(self.grid))
        self.truth = scene_occupancy(scene, self.grid)

        explorer_starts = [np.asarray(a.start, dtype=float)
                           for a in cfg.agents if a.kind == EXPLORER]
        routes = mapping_paths(self.volume, explorer_starts, cfg.num_explorers,
                               margin=cfg.voxel_size / 2.0)

        self.agents: list[_Runtime] = []
        used_voxels = set()
        e_idx = 0
        for aid, spec in enumerate(cfg.agents):
            state = AgentState(aid, spec.kind, np.asarray(spec.start, dtype=float),
                               v_max=spec.speed_limit, omega_max=spec.omega_max)
            vox = world_to_voxel(self.grid, state.position)
            if vox in used_voxels:
                raise ConfigurationError(f"agents share start voxel {vox}")
            used_voxels.add(vox)
            if self.truth[vox]:
                raise ConfigurationError(f"agent {aid} starts inside structure voxel {vox}")
            rt = _Runtime(spec, state, GimbalState(limits=cfg.gimbal),
                          OccupancyMap(self.grid), vox)
            if spec.kind == EXPLORER:
                rt.route = routes[e_idx]
                e_idx += 1
            self.agents.append(rt)

        self.ledger = ScoreLedger(scene.point_ids, cfg.camera.quality_floor)
        self.score_trace: list[float] = []
        self.observations: list[tuple] = []
        self.connectivity: list[tuple] = []
        self.plan_events: list[str] = []
        self.voxel_trace: list[tuple] = []
        self.collisions = 0
        self.occupied_entries = 0
        self.clamp_events = 0
        self.phase_change_ticks: dict[int, int] = {}
        self.phase_maps: dict[int, OccupancyMap] = {}

    # --- stage helpers -------------------------------------------------

    def _sense(self, k: int, t: float) -> None:
        for a in self.agents:
            if a.spec.kind == EXPLORER:
                hits, misses = lidar_sweep(a.state, self.scene, self.cfg.lidar, t)
                if len(hits):
                    integrate_points(a.occ, a.state.position, hits)
                if len(misses):
                    carve_free(a.occ, a.state.position, misses)
            # an agent's own voxel is evidently traversable
            if a.occ.cells[a.voxel] == UNKNOWN:
                a.occ.cells[a.voxel] = FREE

    def _exchange(self, k: int) -> NeighborSet:
        states = [a.state for a in self.agents]
        neighbors = discover_neighbors(states, self.scene)
        maps = {a.id: a.occ for a in self.agents}
        epochs = {a.id: a.kappa for a in self.agents}
        merged = exchange_and_merge(states, neighbors, maps, epochs)
        for a in self.agents:
            a.occ = merged[a.id]
        self.connectivity.append((k, tuple(neighbors.edges())))

        by_id = {a.id: a for a in self.agents}
        for a in self.agents:
            if a.spec.kind == PHOTOGRAPHER and a.phase == 1:
                heard = any(by_id[j].spec.kind == EXPLORER and by_id[j].phase == 2
                            for j in neighbors.of(a.id))
                if heard:
                    self._enter_phase2(a, k)
        return neighbors

    def _enter_phase2(self, a: _Runtime, k: int) -> None:
        a.phase = 2
        a.need_replan = True
        a.segment = []
        a.seg_i = 0
        self.phase_change_ticks[a.id] = k
        self.phase_maps[a.id] = a.occ.copy()
        self.plan_events.append(f"tick {k} agent {a.id} enters inspection stage")

    def _reserved(self, a: _Runtime) -> set:
        return {b.voxel for b in self.agents if b.id != a.id}

    def _plan_survey(self, a: _Runtime, k: int) -> bool:
        """Advance the mapping route; returns True once the route is finished."""
        reserved = self._reserved(a)
        while a.route_idx < len(a.route):
            goal = a.route[a.route_idx]
            goal_vox = world_to_voxel(self.grid, goal)
            if a.voxel == goal_vox or a.blocked_replans >= 3:
                if a.blocked_replans >= 3:
                    self.plan_events.append(
                        f"tick {k} agent {a.id} abandons stalled survey point {goal_vox}")
                a.blocked_replans = 0
                a.route_idx += 1
                a.need_replan = True
                continue
            if a.need_replan or a.seg_i >= len(a.segment):
                try:
                    path = dijkstra_path(self.graph, a.occ, reserved, a.voxel, goal_vox)
                except PlanningError:
                    a.segment = []
                    a.seg_i = 0
                    return False
                if not path:
                    self.plan_events.append(
                        f"tick {k} agent {a.id} skips unreachable survey point {goal_vox}")
                    a.route_idx += 1
                    continue
                a.segment = path[1:1 + self.cfg.horizon]
                a.seg_i = 0
                a.need_replan = False
            return False
        return True

    def _regenerate(self, a: _Runtime, neighbors: NeighborSet, k: int) -> None:
        waypoints = generate_waypoints(a.occ, self.scene.inspection_boxes,
                                       self.cfg.standoff)
        if not waypoints:
            a.sigma = None
            return
        by_id = {b.id: b for b in self.agents}
        positions = {a.id: a.state.position}
        for j in neighbors.of(a.id):
            if by_id[j].phase == 2:
                positions[j] = by_id[j].state.position
        assignment = mtsp_assign(waypoints, positions)
        a.sigma = assignment[a.id]
        a.sigma.epoch = a.kappa
        a.cursor = 0
        a.need_replan = True
        sizes = ",".join(f"{i}:{len(p.waypoints)}" for i, p in sorted(assignment.items()))
        self.plan_events.append(
            f"tick {k} agent {a.id} epoch {a.kappa} waypoints {len(waypoints)} split {sizes}")

    def _plan_inspect(self, a: _Runtime, neighbors: NeighborSet, k: int) -> None:
        reserved = self._reserved(a)
        regenerated = False
        while True:
            if a.sigma is None:
                if regenerated:
                    a.segment = []
                    a.seg_i = 0
                    a.look_dir = None
                    return
                self._regenerate(a, neighbors, k)
                regenerated = True
                if a.sigma is None:
                    a.segment = []
                    a.seg_i = 0
                    a.look_dir = None
                    return
                continue
            wps = a.sigma.waypoints
            if a.blocked_replans >= 3 and a.cursor < len(wps):
                self.plan_events.append(
                    f"tick {k} agent {a.id} abandons stalled waypoint {wps[a.cursor].voxel}")
                a.cursor += 1
                a.blocked_replans = 0
                a.need_replan = True
            at_waypoint = a.cursor < len(wps) and a.voxel == wps[a.cursor].voxel
            if not (a.need_replan or a.seg_i >= len(a.segment) or at_waypoint):
                return
            try:
                step = drhlp_step(a.voxel, a.sigma, a.cursor, self.graph, a.occ,
                                  reserved, self.cfg.horizon)
            except PlanningError:
                a.segment = []
                a.seg_i = 0
                return
            for s in step.skipped:
                self.plan_events.append(
                    f"tick {k} agent {a.id} skips unreachable waypoint {wps[s].voxel}")
            a.cursor = step.next_index
            if step.epoch_complete:
                if len(wps) > 0:
                    self.plan_events.append(
                        f"tick {k} agent {a.id} completes epoch {a.kappa}")
                    a.kappa += 1
                a.sigma = None
                a.segment = []
                a.seg_i = 0
                continue
            a.segment = step.segment
            a.seg_i = 0
            a.look_dir = step.direction
            a.need_replan = False
            return

    def _plan(self, neighbors: NeighborSet, k: int) -> None:
        for a in self.agents:
            if a.phase == 1:
                if a.spec.kind == EXPLORER:
                    if self._plan_survey(a, k):
                        self._enter_phase2(a, k)
                        self._plan_inspect(a, neighbors, k)
                else:
                    a.segment = []
                    a.seg_i = 0
            else:
                self._plan_inspect(a, neighbors, k)

    def _act(self, k: int) -> None:
        claims = {a.voxel: a.id for a in self.agents}
        for a in self.agents:
            target_voxel = a.voxel
            if a.seg_i < len(a.segment):
                want = a.segment[a.seg_i]
                if want == a.voxel:
                    a.seg_i += 1
                    if a.seg_i < len(a.segment):
                        want = a.segment[a.seg_i]
                if want != a.voxel:
                    # enter only voxels no one holds and the local map has
                    # confirmed free; plans may run through unknown space but
                    # execution waits at the sensing frontier
                    if want not in claims and a.occ.cells[want] == FREE:
                        claims[want] = a.id
                        target_voxel = want
                        a.blocked = 0
                    else:
                        a.blocked += 1
                        if a.blocked >= self.cfg.blocked_replan_ticks:
                            a.need_replan = True
                            a.blocked = 0
                            a.blocked_replans += 1

            # aim down the straight run of the plan so cruise speed builds up;
            # only the immediate next voxel is ever claimed
            aim = target_voxel
            if target_voxel != a.voxel and a.seg_i < len(a.segment):
                j = a.seg_i
                step = tuple(target_voxel[i] - a.voxel[i] for i in range(3))
                while j + 1 < len(a.segment):
                    nxt, cur = a.segment[j + 1], a.segment[j]
                    if tuple(nxt[i] - cur[i] for i in range(3)) == step:
                        aim = nxt
                        j += 1
                    else:
                        break

            target_pos = voxel_to_world(self.grid, aim)
            yaw_des = self._desired_yaw(a, target_pos)
            u = track_segment(a.state, target_pos, self.cfg.tracking, yaw_des)
            new_state = step_dynamics(a.state, u, self.cfg.tick)

            accepted = True
            try:
                nv = world_to_voxel(self.grid, new_state.position)
            except OutOfBoundsError:
                accepted = False
            if accepted and not (nv == a.voxel or claims.get(nv) == a.id):
                accepted = False
            if accepted:
                a.state = new_state
                if nv != a.voxel:
                    a.voxel = nv
                    a.blocked_replans = 0
                    if a.seg_i < len(a.segment) and nv == a.segment[a.seg_i]:
                        a.seg_i += 1
            else:
                held = a.state.copy()
                held.velocity = np.zeros(3)
                held.yaw = new_state.yaw
                held.yaw_rate = new_state.yaw_rate
                a.state = held
                self.clamp_events += 1

            if a.look_dir is not None and a.phase == 2:
                a.gimbal = point_gimbal(a.gimbal, a.state, a.look_dir)
            else:
                forward = np.array([math.cos(a.state.yaw), math.sin(a.state.yaw), 0.0])
                a.gimbal = point_gimbal(a.gimbal, a.state, forward)

    def _desired_yaw(self, a: _Runtime, target_pos: np.ndarray) -> float | None:
        if a.phase == 2 and a.look_dir is not None:
            lx, ly = float(a.look_dir[0]), float(a.look_dir[1])
            if math.hypot(lx, ly) > 1e-9:
                return math.atan2(ly, lx)
            return None
        rel = target_pos - a.state.position
        if math.hypot(rel[0], rel[1]) > 0.5:
            return math.atan2(rel[1], rel[0])
        return None

    def _score(self, k: int) -> None:
        if k % self.cfg.capture_stride == 0:
            for a in self.agents:
                obs = observe(a.state, a.gimbal, self.scene, self.cfg.camera, k)
                for o in obs:
                    self.observations.append(
                        (k, a.id, o.point_id, o.q_blur, o.q_res, o.q))
                update_ledger(self.ledger, obs)
        self.score_trace.append(self.ledger.mean_best())

    def _audit(self, k: int) -> None:
        row = tuple((a.id, a.voxel) for a in self.agents)
        self.voxel_trace.append((k, row))
        seen = set()
        for _, vox in row:
            if vox in seen:
                self.collisions += 1
            seen.add(vox)
            if self.truth[vox]:
                self.occupied_entries += 1

    def run(self) -> MissionResult:
        n_ticks = max(1, int(round(self.cfg.duration / self.cfg.tick)))
        for k in range(n_ticks):
            t = k * self.cfg.tick
            self._sense(k, t)
            neighbors = self._exchange(k)
            self._plan(neighbors, k)
            self._act(k)
            self._score(k)
            self._audit(k)
        return MissionResult(
            q_total=inspection_score(self.ledger),
            ledger=self.ledger,
            score_trace=self.score_trace,
            observations=self.observations,
            connectivity=self.connectivity,
            plan_events=self.plan_events,
            voxel_trace=self.voxel_trace,
            collisions_same_voxel=self.collisions,
            occupied_entries=self.occupied_entries,
            clamp_events=self.clamp_events,
            phase_change_ticks=self.phase_change_ticks,
            final_maps={a.id: a.occ for a in self.agents},
            phase_maps=self.phase_maps,
            heatmap=intensity_heatmap(self.ledger, self.scene),
            num_ticks=n_ticks,
        )


def run_mission(cfg: MissionConfig, scene: Scene) -> MissionResult:
    """Execute a full two-stage mission; deterministic for fixed inputs."""
    return _Mission(cfg, scene).run()


def write_outputs(result: MissionResult, out_dir: str) -> None:
    """Write the run artifacts: summary, traces, logs, and map dumps."""
    os.makedirs(out_dir, exist_ok=True)
    maps_dir = os.path.join(out_dir, "maps")
    os.makedirs(maps_dir, exist_ok=True)

    coverage = 0.0
    if result.ledger.num_points:
        coverage = float(np.count_nonzero(result.ledger.best_q > 0.0)
                         / result.ledger.num_points)
    lines = [
        f"inspection_score: {result.q_total!r}",
        f"interest_points: {result.ledger.num_points}",
        f"points_scored: {int(np.count_nonzero(result.ledger.best_q > 0.0))}",
        f"coverage_fraction: {coverage!r}",
        f"mean_final_quality: {result.ledger.mean_best()!r}",
        f"ticks: {result.num_ticks}",
        f"collisions_same_voxel: {result.collisions_same_voxel}",
        f"occupied_entries: {result.occupied_entries}",
        f"clamp_events: {result.clamp_events}",
        f"phase_changes: {sorted(result.phase_change_ticks.items())}",
        f"digest: {result.digest()}",
    ]
    with open(os.path.join(out_dir, "mission_result.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")

    with open(os.path.join(out_dir, "score_trace.csv"), "w") as fh:
        fh.write("tick,mean_quality\n")
        for k, q in enumerate(result.score_trace):
            fh.write(f"{k},{q!r}\n")

    with open(os.path.join(out_dir, "observations.csv"), "w") as fh:
        fh.write("tick,agent,point_id,q_blur,q_res,q\n")
        for k, aid, pid, qb, qr, q in result.observations:
            fh.write(f"{k},{aid},{pid},{qb!r},{qr!r},{q!r}\n")

    with open(os.path.join(out_dir, "heatmap.csv"), "w") as fh:
        fh.write("point_id,x,y,z,count,best_q\n")
        for pid, x, y, z, count, best in result.heatmap:
            fh.write(f"{pid},{x!r},{y!r},{z!r},{count},{best!r}\n")

    with open(os.path.join(out_dir, "connectivity.csv"), "w") as fh:
        fh.write("tick,edges\n")
        for k, edges in result.connectivity:
            fh.write(f"{k},{';'.join(f'{i}-{j}' for i, j in edges)}\n")

    with open(os.path.join(out_dir, "plans.log"), "w") as fh:
        fh.write("\n".join(result.plan_events) + ("\n" if result.plan_events else ""))

    for aid, occ in sorted(result.phase_maps.items()):
        save_map(occ, os.path.join(maps_dir, f"agent{aid}_stage2.vox"))
    for aid, occ in sorted(result.final_maps.items()):
        save_map(occ, os.path.join(maps_dir, f"agent{aid}_final.vox"))

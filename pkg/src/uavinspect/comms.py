"""Peer-to-peer map exchange, gated purely by line of sight.

One synchronous exchange round runs per engine tick: every agent merges the
map snapshots of all peers it can currently see.  Merging is commutative, so
ordering within a round cannot matter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agents import AgentState
from .scene import Scene, line_of_sight
from .world import OccupancyMap, merge_maps


@dataclass
class NeighborSet:
    """Symmetric visibility relation between agents at one tick."""

    peers: dict[int, frozenset[int]]

    def of(self, agent_id: int) -> frozenset[int]:
        return self.peers.get(agent_id, frozenset())

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for i in sorted(self.peers):
            for j in sorted(self.peers[i]):
                if i < j:
                    out.append((i, j))
        return out


@dataclass
class Message:
    sender: int
    position: np.ndarray
    occupancy: OccupancyMap
    epoch: int = 0


def discover_neighbors(states: list[AgentState], scene: Scene) -> NeighborSet:
    """All unobstructed agent pairs; symmetric by construction."""
    peers: dict[int, set[int]] = {s.id: set() for s in states}
    for i in range(len(states)):
        for j in range(i + 1, len(states)):
            a, b = states[i], states[j]
            if line_of_sight(scene, a.position, b.position):
                peers[a.id].add(b.id)
                peers[b.id].add(a.id)
    return NeighborSet({k: frozenset(v) for k, v in peers.items()})


def exchange_and_merge(states: list[AgentState], neighbors: NeighborSet,
                       maps: dict[int, OccupancyMap],
                       epochs: dict[int, int] | None = None) -> dict[int, OccupancyMap]:
    """One gossip round: each agent merges the pre-round maps of its LoS peers.

    Works on a snapshot of all maps, so a chain A-B-C leaves A with A+B and the
    middle agent with all three after a single round.
    """
    by_id = {s.id: s for s in states}
    snapshot = {
        i: Message(i, by_id[i].position.copy(), maps[i],
                   (epochs or {}).get(i, 0))
        for i in maps
    }
    merged: dict[int, OccupancyMap] = {}
    for i in sorted(maps):
        acc = maps[i]
        for j in sorted(neighbors.of(i)):
            acc = merge_maps(acc, snapshot[j].occupancy)
        merged[i] = acc if acc is not maps[i] else maps[i].copy()
    return merged

"""Pre-shock collaboration graph and distance-to-seed categories."""

from __future__ import annotations

import csv
import logging
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from itertools import combinations
from typing import IO, AbstractSet, Iterable, Mapping

from .errors import NetworkError
from .ingest import CommitEvent

log = logging.getLogger(__name__)


class DistanceCategory(str, Enum):
    SEED = "seed"
    DIST1 = "dist1"
    DIST2 = "dist2"
    DIST3PLUS = "dist3plus"

    @classmethod
    def from_distance(cls, d: int | None) -> "DistanceCategory":
        if d is None or d >= 3:
            return cls.DIST3PLUS
        return (cls.SEED, cls.DIST1, cls.DIST2)[d]


@dataclass
class CollaborationGraph:
    adjacency: dict[str, set[str]] = field(default_factory=dict)

    @property
    def nodes(self) -> list[str]:
        return sorted(self.adjacency)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return sorted((a, b) for a, nbrs in self.adjacency.items() for b in nbrs if a < b)

    def __contains__(self, dev: str) -> bool:
        return dev in self.adjacency

    def __len__(self) -> int:
        return len(self.adjacency)

    def add_node(self, dev: str) -> None:
        self.adjacency.setdefault(dev, set())

    def add_edge(self, a: str, b: str) -> None:
        if a == b:
            return
        self.adjacency.setdefault(a, set()).add(b)
        self.adjacency.setdefault(b, set()).add(a)

    def write_edges_csv(self, stream: IO[str]) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(("dev_a", "dev_b"))
        writer.writerows(self.edges)


def build_graph(
    events: Iterable[CommitEvent], shock_instant: datetime, min_commits: int = 4
) -> CollaborationGraph:
    """Link developers who each made >= ``min_commits`` pre-shock events to a shared repo.

    Commits and pull requests both count toward the threshold.
    """
    pair_counts = Counter(
        (e.repo_id, e.developer_id) for e in events if e.timestamp_utc < shock_instant
    )
    members: dict[str, list[str]] = defaultdict(list)
    for (repo, dev), n in pair_counts.items():
        if n >= min_commits:
            members[repo].append(dev)

    graph = CollaborationGraph()
    for devs in members.values():
        for dev in devs:
            graph.add_node(dev)
        for a, b in combinations(devs, 2):
            graph.add_edge(a, b)
    return graph


def bfs_distances(graph: CollaborationGraph, seeds: AbstractSet[str]) -> dict[str, int]:
    """Multi-source BFS; unreachable nodes are absent from the result."""
    dist = {s: 0 for s in seeds if s in graph}
    queue = deque(sorted(dist))
    while queue:
        u = queue.popleft()
        for v in graph.adjacency[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def distance_categories(
    graph: CollaborationGraph, seed_set: AbstractSet[str]
) -> dict[str, DistanceCategory]:
    """Categorize every graph node by its hop distance from the nearest seed.

    Nodes farther than two hops, or unreachable, fall in DIST3PLUS. Seeds
    missing from the graph are ignored (logged as a warning).
    """
    if not seed_set:
        raise NetworkError("EMPTY_SEED_SET", "at least one seed developer is required")
    outside = sum(1 for s in seed_set if s not in graph)
    if outside:
        log.warning("%d seed developer(s) not in the collaboration graph were ignored", outside)
    dist = bfs_distances(graph, seed_set)
    return {dev: DistanceCategory.from_distance(dist.get(dev)) for dev in graph.nodes}


def write_categories_csv(categories: Mapping[str, DistanceCategory], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(("developer_id", "category"))
    for dev in sorted(categories):
        writer.writerow((dev, categories[dev].value))

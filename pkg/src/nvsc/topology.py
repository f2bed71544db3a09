"""Directed communication graphs with the leader as node 0."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Topology:
    """Dense 0/1 adjacency over nodes 0..N; row i lists whom agent i hears."""

    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=np.int64)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be a square matrix")
        if not np.isin(adj, (0, 1)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    @property
    def n_followers(self) -> int:
        return self.adjacency.shape[0] - 1

    def degree(self, i: int) -> int:
        """Number of in-neighbours of agent i."""
        return int(self.adjacency[i].sum())

    def to_list(self) -> list[list[int]]:
        return self.adjacency.tolist()

    def __eq__(self, other):
        return isinstance(other, Topology) and np.array_equal(self.adjacency, other.adjacency)

    __hash__ = None


def build_lpf(n_followers: int) -> Topology:
    """Leader-predecessor-follower graph: follower i hears the leader and follower i-1."""
    if n_followers < 1:
        raise ValueError("a platoon needs at least one follower")
    adj = np.zeros((n_followers + 1, n_followers + 1), dtype=np.int64)
    adj[1:, 0] = 1
    for i in range(2, n_followers + 1):
        adj[i, i - 1] = 1
    return Topology(adj)


def reachable_from_leader(adjacency: np.ndarray) -> set[int]:
    """Nodes reached from node 0 by following information flow j -> i when a_ij = 1."""
    adj = np.asarray(adjacency)
    seen = {0}
    queue = deque([0])
    while queue:
        j = queue.popleft()
        for i in np.flatnonzero(adj[:, j]):
            i = int(i)
            if i not in seen:
                seen.add(i)
                queue.append(i)
    return seen


def validate(t: Topology) -> list[str]:
    """Return every violated graph invariant; an empty list means the graph is usable."""
    adj = t.adjacency
    problems = []
    if adj[0].any():
        problems.append("leader row nonzero")
    for i in np.flatnonzero(np.diag(adj)):
        problems.append(f"self-loop at node {int(i)}")
    missing = sorted(set(range(adj.shape[0])) - reachable_from_leader(adj))
    for i in missing:
        problems.append(f"node {i} unreachable from root")
    return problems


def neighbors(t: Topology, i: int) -> frozenset[int]:
    """In-neighbours {j : a_ij = 1} of follower i (1-based)."""
    if not 1 <= i <= t.n_followers:
        raise IndexError(f"follower index {i} outside 1..{t.n_followers}")
    return frozenset(int(j) for j in np.flatnonzero(t.adjacency[i]))

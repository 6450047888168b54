"""Shared fixtures: random tree builders and definition-level brute-force
oracles, kept independent of the package's own algorithms."""

from __future__ import annotations

from collections import deque

import numpy as np
import pytest

from jordantrack.tree import TreeArena


def random_arena(seed: int, n: int, path_bias: float = 0.2) -> TreeArena:
    """Random recursive tree with a tunable bias toward path-like growth."""
    rng = np.random.default_rng(seed)
    arena = TreeArena(root_slots=0, time=0.0)
    for i in range(1, n):
        if i > 1 and rng.random() < path_bias:
            parent = i - 1
        else:
            parent = int(rng.integers(0, i))
        arena.add_child(parent, float(i), 0, consume_slot=False)
    return arena


def adjacency(arena: TreeArena) -> dict[int, list[int]]:
    adj: dict[int, list[int]] = {v: [] for v in range(len(arena))}
    for v in range(1, len(arena)):
        p = arena.parent[v]
        adj[v].append(p)
        adj[p].append(v)
    return adj


def bfs_distances(adj: dict[int, list[int]], src: int) -> dict[int, int]:
    dist = {src: 0}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def brute_eccentricities(arena: TreeArena) -> list[int]:
    adj = adjacency(arena)
    return [max(bfs_distances(adj, v).values()) for v in range(len(arena))]


def brute_jordan(arena: TreeArena) -> tuple[tuple[int, ...], int]:
    eccs = brute_eccentricities(arena)
    psi = min(eccs)
    return tuple(v for v, e in enumerate(eccs) if e == psi), psi


def brute_neighbor_depths(arena: TreeArena, v: int) -> list[tuple[int, int]]:
    adj = adjacency(arena)
    out = []
    for nb in adj[v]:
        # farthest distance from nb inside the component not containing v
        dist = {v: None, nb: 0}
        queue = deque([nb])
        depth = 0
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    depth = max(depth, dist[w])
                    queue.append(w)
        out.append((nb, depth))
    return sorted(out, key=lambda t: (-t[1], t[0]))


def brute_balancedness(arena: TreeArena) -> tuple[tuple[int, ...], int]:
    adj = adjacency(arena)
    n = len(arena)
    scores = []
    for v in range(n):
        worst = 0
        for nb in adj[v]:
            seen = {v, nb}
            queue = deque([nb])
            size = 1
            while queue:
                u = queue.popleft()
                for w in adj[u]:
                    if w not in seen:
                        seen.add(w)
                        size += 1
                        queue.append(w)
            worst = max(worst, size)
        scores.append(worst)
    best = min(scores)
    return tuple(v for v, s in enumerate(scores) if s == best), best


@pytest.fixture
def path4() -> TreeArena:
    arena = TreeArena(0)
    arena.add_child(0, 1, 0, consume_slot=False)
    arena.add_child(1, 2, 0, consume_slot=False)
    arena.add_child(2, 3, 0, consume_slot=False)
    return arena


@pytest.fixture
def star6() -> TreeArena:
    arena = TreeArena(0)
    for i in range(5):
        arena.add_child(0, i + 1, 0, consume_slot=False)
    return arena

"""Rooted-tree storage for an infected subgraph, with exact center computations.

The arena stores only infected vertices; the underlying (possibly infinite)
host tree is represented lazily through each node's residual count of
not-yet-infected neighbor slots.
"""

from __future__ import annotations

from dataclasses import dataclass
from collections import deque

NO_PARENT = -1


class TreeArena:
    """Index-addressed rooted tree of infected nodes.

    Node ids are dense integers assigned in infection order; the root is
    always id 0. Single-writer: growth engines mutate an arena in place,
    read-only queries may run concurrently on a finished arena.
    """

    __slots__ = ("parent", "children", "depth", "infected_at", "residual")

    def __init__(self, root_slots: int, time: float = 0.0):
        self.parent: list[int] = [NO_PARENT]
        self.children: list[list[int]] = [[]]
        self.depth: list[int] = [0]
        self.infected_at: list[float] = [time]
        self.residual: list[int] = [root_slots]

    def __len__(self) -> int:
        return len(self.parent)

    def check_node(self, v: int) -> None:
        if not 0 <= v < len(self.parent):
            raise ValueError(f"unknown node id {v}")

    def add_child(self, parent: int, time: float, child_slots: int,
                  consume_slot: bool = True) -> int:
        """Attach a fresh leaf under `parent`, returning its id."""
        self.check_node(parent)
        if consume_slot:
            if self.residual[parent] <= 0:
                raise ValueError(f"node {parent} has no residual slots")
            self.residual[parent] -= 1
        child = len(self.parent)
        self.parent.append(parent)
        self.children[parent].append(child)
        self.children.append([])
        self.depth.append(self.depth[parent] + 1)
        self.infected_at.append(time)
        self.residual.append(child_slots)
        return child

    def neighbors(self, v: int) -> list[int]:
        self.check_node(v)
        p = self.parent[v]
        if p == NO_PARENT:
            return list(self.children[v])
        return [p] + self.children[v]

    def degree(self, v: int) -> int:
        return len(self.children[v]) + (self.parent[v] != NO_PARENT)


@dataclass(frozen=True)
class CenterSnapshot:
    """Exact center data for one observation of a (growing) tree.

    `centers` holds every eccentricity minimizer (1 or 2 nodes, adjacent when
    2); the canonical representative is the lowest id and is what
    `dist_to_root` and the depth fields refer to. A missing neighbor subtree
    (tree smaller than required) is reported as depth -1, which keeps the
    identity psi = deepest_depth + 1 valid down to the single-node tree.
    """

    observation_index: int
    time: float
    centers: tuple[int, ...]
    psi: int
    dist_to_root: int
    deepest_depth: int
    second_deepest_depth: int
    n_nodes: int
    moved: bool = False

    @property
    def canonical(self) -> int:
        return self.centers[0]

    @property
    def center_count(self) -> int:
        return len(self.centers)


def _bfs_farthest(tree: TreeArena, src: int) -> tuple[int, int, list[int]]:
    """Return (farthest node, its distance, dist array); ties pick lowest id."""
    n = len(tree)
    dist = [-1] * n
    dist[src] = 0
    queue = deque([src])
    best, best_d = src, 0
    parent = tree.parent
    children = tree.children
    while queue:
        u = queue.popleft()
        du = dist[u]
        if du > best_d or (du == best_d and u < best):
            best, best_d = u, du
        p = parent[u]
        if p != NO_PARENT and dist[p] < 0:
            dist[p] = du + 1
            queue.append(p)
        for c in children[u]:
            if dist[c] < 0:
                dist[c] = du + 1
                queue.append(c)
    return best, best_d, dist


def eccentricity(tree: TreeArena, v: int) -> int:
    """Maximum hop distance from v to any node of the infected tree."""
    tree.check_node(v)
    _, d, _ = _bfs_farthest(tree, v)
    return d


def distance(tree: TreeArena, u: int, v: int) -> int:
    """Hop count along the unique tree path between u and v."""
    tree.check_node(u)
    tree.check_node(v)
    depth, parent = tree.depth, tree.parent
    d = 0
    while depth[u] > depth[v]:
        u = parent[u]
        d += 1
    while depth[v] > depth[u]:
        v = parent[v]
        d += 1
    while u != v:
        u = parent[u]
        v = parent[v]
        d += 2
    return d


def neighbor_subtree_depths(tree: TreeArena, v: int) -> list[tuple[int, int]]:
    """Depths of the subtrees rooted at each neighbor of v, in the tree rooted at v.

    Depth is the edge count of the longest path from the neighbor down inside
    its subtree (a lone neighbor has depth 0). Sorted by depth descending,
    ties by lower neighbor id.
    """
    tree.check_node(v)
    n = len(tree)
    dist = [-1] * n
    branch = [-1] * n
    dist[v] = 0
    best: dict[int, int] = {}
    queue = deque()
    for nb in tree.neighbors(v):
        dist[nb] = 1
        branch[nb] = nb
        best[nb] = 0
        queue.append(nb)
    parent = tree.parent
    children = tree.children
    while queue:
        u = queue.popleft()
        du = dist[u]
        b = branch[u]
        if du - 1 > best[b]:
            best[b] = du - 1
        p = parent[u]
        if p != NO_PARENT and dist[p] < 0:
            dist[p] = du + 1
            branch[p] = b
            queue.append(p)
        for c in children[u]:
            if dist[c] < 0:
                dist[c] = du + 1
                branch[c] = b
                queue.append(c)
    return sorted(((nb, d) for nb, d in best.items()), key=lambda t: (-t[1], t[0]))


def jordan_center_exact(tree: TreeArena) -> CenterSnapshot:
    """Exact Jordan center via the classical two-sweep diameter argument.

    The center of a tree is the midpoint (one or two nodes) of any diameter
    path and psi = ceil(diameter / 2); this is O(n) against the O(n^2)
    all-pairs definition, which the tests replay independently.
    """
    n = len(tree)
    if n == 0:
        raise ValueError("empty tree has no center")
    if n == 1:
        return CenterSnapshot(0, tree.infected_at[0], (0,), 0, 0, -1, -1, 1)
    a, _, _ = _bfs_farthest(tree, 0)
    b, diam, dist_a = _bfs_farthest(tree, a)
    # walk from b toward a along decreasing dist_a to recover a diameter path
    path = [b]
    u = b
    while dist_a[u] > 0:
        for w in tree.neighbors(u):
            if dist_a[w] == dist_a[u] - 1:
                u = w
                break
        path.append(u)
    if diam % 2 == 0:
        centers: tuple[int, ...] = (path[diam // 2],)
    else:
        pair = (path[diam // 2], path[diam // 2 + 1])
        centers = tuple(sorted(pair))
    psi = (diam + 1) // 2
    canonical = centers[0]
    depths = neighbor_subtree_depths(tree, canonical)
    deepest = depths[0][1] if depths else -1
    second = depths[1][1] if len(depths) > 1 else -1
    return CenterSnapshot(0, tree.infected_at[-1], centers, psi,
                          tree.depth[canonical], deepest, second, n)


def subtree_sizes(tree: TreeArena) -> list[int]:
    """Node count of the subtree below each node (in the root-rooted tree)."""
    n = len(tree)
    size = [1] * n
    parent = tree.parent
    # ids are assigned in infection order, so every child has a larger id
    for u in range(n - 1, 0, -1):
        size[parent[u]] += size[u]
    return size


def balancedness_center(tree: TreeArena) -> tuple[tuple[int, ...], int]:
    """Centroid: minimizers of the maximum neighbor-subtree node count."""
    n = len(tree)
    if n == 0:
        raise ValueError("empty tree has no center")
    if n == 1:
        return (0,), 0
    size = subtree_sizes(tree)
    best_score = n
    best: list[int] = []
    for v in range(n):
        score = n - size[v] if tree.parent[v] != NO_PARENT else 0
        for c in tree.children[v]:
            if size[c] > score:
                score = size[c]
        if score < best_score:
            best_score = score
            best = [v]
        elif score == best_score:
            best.append(v)
    return tuple(sorted(best)), best_score

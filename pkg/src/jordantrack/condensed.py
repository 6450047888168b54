"""Exact branch-aggregated independent-cascade engine for protocol-scale runs.

A 40-step supercritical cascade holds hundreds of millions of vertices, far
past any per-node arena. The center, its neighbor-subtree depths, and the
node counts only depend on the tree near the root plus the depth/size of each
deep branch, so this engine keeps an explicit skeleton of the first
`skeleton_levels` levels and collapses every subtree hanging below it into a
(frontier count, depth, size) process. One aggregated branch with frontier m
spawns Binomial(m * slots, p) children per step, which is exactly the law of
the per-node engine, so every tracked observable keeps its exact
distribution while memory stays in kilobytes.

If a trial's center walks deep enough to need structure below the skeleton
(never observed at the reference parameters), SkeletonOverflow is raised and
the harness retries the same seed with a deeper skeleton.
"""

from __future__ import annotations

import numpy as np

from .growth import UnderlyingTreeSpec
from .tree import CenterSnapshot
from .tracking import (
    BALANCEDNESS,
    JORDAN,
    BalancednessSnapshot,
    Transition,
    TrialTrace,
    verify_movement,
    verify_snapshot,
)

PARENT_DIR = -2  # direction key for the subtree seen through the parent


class SkeletonOverflow(Exception):
    """The exact center left the explicit skeleton; retry with a deeper one."""


class CondensedIC:
    """One independent-cascade trial with aggregated deep branches."""

    def __init__(self, spec: UnderlyingTreeSpec, p: float,
                 rng: np.random.Generator, skeleton_levels: int = 10):
        if spec.kind not in ("regular", "irregular"):
            raise ValueError("condensed engine requires a regular/irregular host tree")
        if skeleton_levels < 2:
            raise ValueError("skeleton_levels must be >= 2")
        self.spec = spec
        self.p = p
        self.rng = rng
        self.H = skeleton_levels
        # explicit skeleton (depth <= H), ids in infection order
        self.parent = [-1]
        self.children: list[list[int]] = [[]]
        self.depth = [0]
        self.slots = [spec.root_slots(rng)]
        self.frontier = [0]          # explicit nodes infected at the last step
        # aggregated branches, one per infected depth-H node with offspring
        self.br_hang: list[int] = []
        self.br_frontier: list[int] = []
        self.br_depth: list[int] = []
        self.br_count: list[int] = []
        self.br_alive: list[bool] = []
        self.branches_at: dict[int, list[int]] = {}
        self.n_nodes = 1
        self.step_index = 0
        self.dead = False

    def _slot_totals(self, frontiers: np.ndarray) -> np.ndarray:
        """Total child slots held by each branch's frontier.

        Each frontier node's child count is an independent uniform draw from
        degree_choices; drawing it at use instead of at creation is the same
        one-shot sample.
        """
        spec = self.spec
        if spec.kind == "regular":
            return frontiers * spec.d
        choices = spec.degree_choices
        if len(choices) == 1:
            return frontiers * choices[0]
        if len(choices) == 2:
            extra = self.rng.binomial(frontiers, 0.5)
            return frontiers * choices[0] + extra * (choices[1] - choices[0])
        totals = np.zeros_like(frontiers)
        probs = [1.0 / len(choices)] * len(choices)
        for i, m in enumerate(frontiers):
            counts = self.rng.multinomial(int(m), probs)
            totals[i] = int(np.dot(counts, choices))
        return totals

    def advance(self) -> None:
        """One cascade step: explicit frontier attempts, then branch updates."""
        self.step_index += 1
        if self.dead:
            return
        rng, p, spec = self.rng, self.p, self.spec
        n_existing_branches = len(self.br_hang)  # created-this-step branches attempt next step
        new_frontier: list[int] = []
        for u in self.frontier:
            r = self.slots[u]
            k = int(rng.binomial(r, p)) if r > 0 else 0
            if k == 0:
                continue
            if self.depth[u] < self.H:
                for _ in range(k):
                    c = len(self.parent)
                    self.parent.append(u)
                    self.children[u].append(c)
                    self.children.append([])
                    self.depth.append(self.depth[u] + 1)
                    self.slots.append(spec.child_slots(rng))
                    new_frontier.append(c)
            else:
                idx = len(self.br_hang)
                self.br_hang.append(u)
                self.br_frontier.append(k)
                self.br_depth.append(self.depth[u] + 1)
                self.br_count.append(k)
                self.br_alive.append(True)
                self.branches_at.setdefault(u, []).append(idx)
            self.n_nodes += k
        self.frontier = new_frontier

        alive_idx = [i for i in range(n_existing_branches) if self.br_alive[i]]
        if alive_idx:
            fronts = np.asarray([self.br_frontier[i] for i in alive_idx], dtype=np.int64)
            totals = self._slot_totals(fronts)
            new_counts = rng.binomial(totals, p)
            for i, k in zip(alive_idx, new_counts):
                k = int(k)
                if k > 0:
                    self.br_depth[i] += 1
                    self.br_count[i] += k
                    self.br_frontier[i] = k
                    self.n_nodes += k
                else:
                    self.br_frontier[i] = 0
                    self.br_alive[i] = False
        if not self.frontier and not any(self.br_alive):
            self.dead = True

    # ------------------------------------------------------------------
    # exact structural queries on the condensed tree

    def _down_heights(self) -> list[int]:
        n = len(self.parent)
        branch_reach = [0] * n  # longest path from node into its own branches
        for hang, idxs in self.branches_at.items():
            best = 0
            dh = self.depth[hang]
            for i in idxs:
                v = self.br_depth[i] - dh
                if v > best:
                    best = v
            branch_reach[hang] = best
        down = [0] * n
        children = self.children
        for u in range(n - 1, -1, -1):
            best = branch_reach[u]
            for c in children[u]:
                v = 1 + down[c]
                if v > best:
                    best = v
            down[u] = best
        self._branch_reach = branch_reach
        return down

    def _eccentricities(self) -> tuple[list[int], list[int], list[int]]:
        down = self._down_heights()
        n = len(self.parent)
        up = [0] * n
        ecc = [0] * n
        ecc[0] = down[0]
        children = self.children
        branch_reach = self._branch_reach
        for v in range(n):
            kids = children[v]
            top1 = top2 = 0
            for c in kids:
                h = 1 + down[c]
                if h > top1:
                    top1, top2 = h, top1
                elif h > top2:
                    top2 = h
            br = branch_reach[v]
            upv = up[v]
            for c in kids:
                h = 1 + down[c]
                # sibling max excluding c; with ties top2 == top1
                others = top2 if h == top1 else top1
                best_side = others if others > br else br
                up[c] = 1 + (upv if upv > best_side else best_side)
                e = down[c] if down[c] > up[c] else up[c]
                ecc[c] = e
        self._down, self._up = down, up
        return ecc, down, up

    def _directions(self, v: int) -> list[tuple[int, int, bool]]:
        """(key, subtree depth, is_branch) for every neighbor direction of v.

        Node directions use the neighbor id as key (PARENT_DIR for the parent
        side); branch directions use ~branch_index and are virtual.
        """
        dirs: list[tuple[int, int, bool]] = []
        if self.parent[v] != -1:
            dirs.append((PARENT_DIR, self._up[v] - 1, False))
        for c in self.children[v]:
            dirs.append((c, self._down[c], False))
        dh = self.depth[v]
        for i in self.branches_at.get(v, ()):
            dirs.append((~i, self.br_depth[i] - dh - 1, True))
        return dirs

    def _alive_counts(self) -> list[int]:
        n = len(self.parent)
        alive = [0] * n
        for u in self.frontier:
            alive[u] += 1
        for i, a in enumerate(self.br_alive):
            if a:
                alive[self.br_hang[i]] += 1
        children = self.children
        for u in range(n - 1, 0, -1):
            alive[self.parent[u]] += alive[u]
        return alive


def _top2_dirs(dirs: list[tuple[int, int, bool]]) -> tuple[int, tuple | None, int]:
    """Deepest direction (ties to node directions, then lowest key) and depths."""
    m1, d1, m2 = -1, None, -1
    for entry in dirs:
        _, dep, _ = entry
        if dep > m1 or (dep == m1 and d1 is not None and _dir_order(entry) < _dir_order(d1)):
            if d1 is not None and m1 > m2:
                m2 = m1
            m1, d1 = dep, entry
        elif dep > m2:
            m2 = dep
    return m1, d1, m2


def _dir_order(entry: tuple[int, int, bool]) -> tuple[int, int]:
    key, _, is_branch = entry
    return (1, ~key) if is_branch else (0, key if key != PARENT_DIR else -1)


class _JordanObserver:
    """Movement-semantics center tracking on the condensed structure."""

    def __init__(self, sim: CondensedIC, trace: TrialTrace, verify: bool):
        self.sim = sim
        self.trace = trace
        self.verify = verify
        self.center = 0
        self.psi = 0
        self.prev_dirs: dict[int, int] = {}

    def observe(self, obs_index: int) -> None:
        sim = self.sim
        ecc, _, _ = sim._eccentricities()
        old_center = self.center
        psi_prev = self.psi
        prev_dirs = self.prev_dirs

        dirs_post = sim._directions(old_center)
        m1_post, d1_post, m2_post = _top2_dirs(dirs_post)
        post_by_key = {k: dep for k, dep, _ in dirs_post}
        m1_prev, d1_prev, m2_prev = _top2_dirs(
            [(k, dep, False) for k, dep in prev_dirs.items()]) if prev_dirs else (-1, None, -1)
        grew1 = d1_prev is not None and post_by_key.get(d1_prev[0], -1) > m1_prev
        n2_key, n2_dep = None, -1
        for k, dep in prev_dirs.items():
            if d1_prev is not None and k == d1_prev[0]:
                continue
            if dep > n2_dep:
                n2_key, n2_dep = k, dep
        grew2 = n2_key is not None and post_by_key.get(n2_key, -1) > n2_dep
        top2_grew = bool(grew1 and grew2)

        moved = False
        hops = 0
        alive_non_deepest = None
        alive_counts = None
        while True:
            dirs = sim._directions(self.center)
            m1, d1, m2 = _top2_dirs(dirs)
            if d1 is None or m1 < 1 or m2 > m1 - 2:
                break
            key, _, is_branch = d1
            if is_branch:
                raise SkeletonOverflow(f"center would enter branch at step {obs_index}")
            if not moved:
                if alive_counts is None:
                    alive_counts = sim._alive_counts()
                total_alive = alive_counts[0]
                cnt = 0
                for k2, _, is_br in dirs:
                    if k2 == key:
                        continue
                    if is_br:
                        cnt += sim.br_alive[~k2]
                    elif k2 == PARENT_DIR:
                        cnt += (total_alive - alive_counts[self.center]) > 0
                    else:
                        cnt += alive_counts[k2] > 0
                alive_non_deepest = cnt
            moved = True
            hops += 1
            self.center = sim.parent[self.center] if key == PARENT_DIR else key

        # exact center set over the whole tree: the skeleton argmin, plus an
        # overflow check that no branch interior could beat it
        psi = min(ecc)
        centers = tuple(u for u in range(len(ecc)) if ecc[u] == psi)
        if len(centers) > 2:
            raise RuntimeError("more than two Jordan centers")
        canonical = centers[0]
        cdirs = sim._directions(canonical)
        cm1, cd1, cm2 = _top2_dirs(cdirs)
        # a uniquely-deepest virtual direction can hide a deeper or tied
        # co-center inside the branch; both cases force a deeper skeleton
        if cd1 is not None and cd1[2] and cm2 <= cm1 - 1:
            raise SkeletonOverflow("center set reaches below the skeleton")
        self.psi = 1 + cm1 if cdirs else 0

        snapshot = CenterSnapshot(
            observation_index=obs_index, time=float(sim.step_index),
            centers=centers, psi=psi, dist_to_root=sim.depth[canonical],
            deepest_depth=cm1, second_deepest_depth=cm2,
            n_nodes=sim.n_nodes, moved=moved)
        self.trace.snapshots.append(snapshot)
        self.trace.tracked_centers.append(self.center)
        if obs_index > 0:
            transition = Transition(
                obs_index=obs_index, time=float(sim.step_index),
                old_center=old_center, new_center=self.center,
                moved=moved, hops=hops, psi_prev=psi_prev, psi_post=psi,
                max1_prev=m1_prev, max2_prev=m2_prev,
                max1_post=m1_post, max2_post=m2_post,
                deepest_neighbor_post=(
                    None if d1_post is None
                    else (sim.parent[old_center] if d1_post[0] == PARENT_DIR
                          else d1_post[0]) if not d1_post[2] else None),
                co_deepest=(m1_prev == m2_prev != -1),
                top2_grew=top2_grew,
                alive_non_deepest=alive_non_deepest,
                old_center_infected_at=float(sim.depth[old_center]) if moved else None,
                new_center_infected_at=float(sim.depth[self.center]) if moved else None)
            self.trace.transitions.append(transition)
            if self.verify:
                v = verify_movement(transition)
                for f in v.failures:
                    self.trace.failures.append((obs_index, f))
        if self.verify:
            v = verify_snapshot(self.trace.snapshots[-1])
            for f in v.failures:
                self.trace.failures.append((obs_index, f))
        # store this center's direction depths for the next transition
        self.prev_dirs = {k: dep for k, dep, _ in sim._directions(self.center)}


class _BalancednessObserver:
    """Centroid tracking on the condensed structure (sizes, not depths)."""

    def __init__(self, sim: CondensedIC, trace: TrialTrace):
        self.sim = sim
        self.trace = trace
        self.prev_canonical: int | None = None

    def observe(self, obs_index: int) -> None:
        sim = self.sim
        n = len(sim.parent)
        size = [1] * n
        for i, hang in enumerate(sim.br_hang):
            size[hang] += sim.br_count[i]
        for u in range(n - 1, 0, -1):
            size[sim.parent[u]] += size[u]
        total = sim.n_nodes
        best_score = total
        best: list[int] = []
        for v in range(n):
            score = total - size[v] if sim.parent[v] != -1 else 0
            for c in sim.children[v]:
                if size[c] > score:
                    score = size[c]
            branch_max = 0
            for i in sim.branches_at.get(v, ()):
                if sim.br_count[i] > branch_max:
                    branch_max = sim.br_count[i]
            if branch_max > score:
                score = branch_max
            if score < best_score:
                best_score, best = score, [v]
            elif score == best_score:
                best.append(v)
        canonical = best[0]
        # if the biggest component of the winner is a branch holding at least
        # half the mass, the true centroid may sit inside it
        for i in sim.branches_at.get(canonical, ()):
            if 2 * sim.br_count[i] >= total:
                raise SkeletonOverflow("centroid reaches below the skeleton")
        moved = self.prev_canonical is not None and canonical != self.prev_canonical
        self.prev_canonical = canonical
        self.trace.snapshots.append(BalancednessSnapshot(
            observation_index=obs_index, time=float(sim.step_index),
            centers=tuple(best[:2]), score=best_score,
            dist_to_root=sim.depth[canonical], n_nodes=total, moved=moved))
        self.trace.tracked_centers.append(canonical)


def run_condensed_ic_trial(spec: UnderlyingTreeSpec, p: float, steps: int,
                           seed: int, center_kinds: tuple[str, ...] = (JORDAN,),
                           verify: bool = False,
                           skeleton_levels: int = 10) -> dict[str, TrialTrace]:
    """Run one condensed IC trial, observing after every step.

    Raises SkeletonOverflow when the requested skeleton is too shallow; the
    caller retries with a deeper one and the same seed.
    """
    rng = np.random.default_rng(seed)
    sim = CondensedIC(spec, p, rng, skeleton_levels=skeleton_levels)
    params = {"p": p, "steps": steps, "tree": spec.kind,
              "skeleton_levels": skeleton_levels}
    traces: dict[str, TrialTrace] = {}
    observers = []
    for kind in center_kinds:
        trace = TrialTrace(model="IC", center_kind=kind, params=params,
                           seed=seed, engine="condensed")
        traces[kind] = trace
        if kind == JORDAN:
            observers.append(_JordanObserver(sim, trace, verify))
        elif kind == BALANCEDNESS:
            observers.append(_BalancednessObserver(sim, trace))
        else:
            raise ValueError(f"unknown center kind {kind!r}")
    for ob in observers:
        ob.observe(0)
    for s in range(1, steps + 1):
        sim.advance()
        for ob in observers:
            ob.observe(s)
    for trace in traces.values():
        trace.dead = sim.dead
    return traces

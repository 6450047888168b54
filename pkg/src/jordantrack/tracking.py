"""Incremental Jordan-center maintenance over growing trees, trace recording,
and runtime verification of the center-movement laws.

The tracker follows the movement semantics of the source model: the current
center changes only when some neighbor attains strictly smaller eccentricity,
and then it moves one hop into the deepest neighbor subtree. Center-set
changes that merely add or drop a tied co-center are logged separately and do
not count as movement.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .tree import (
    NO_PARENT,
    CenterSnapshot,
    TreeArena,
    balancedness_center,
    jordan_center_exact,
    neighbor_subtree_depths,
)
from .growth import GrowthEvent

JORDAN = "jordan"
BALANCEDNESS = "balancedness"


@dataclass(frozen=True)
class Transition:
    """Everything the movement lemmas constrain about one observation step.

    Depth fields describe the old tracked center: `*_prev` before the batch,
    `*_post` after the batch but before any movement. Missing neighbors are
    depth -1.
    """

    obs_index: int
    time: float
    old_center: int
    new_center: int
    moved: bool
    hops: int
    psi_prev: int
    psi_post: int
    max1_prev: int
    max2_prev: int
    max1_post: int
    max2_post: int
    deepest_neighbor_post: int | None
    co_deepest: bool          # the two deepest subtrees tied before the batch
    top2_grew: bool           # both of the two deepest subtrees grew in depth
    alive_non_deepest: int | None = None   # IC only, evaluated on movement
    old_center_infected_at: float | None = None
    new_center_infected_at: float | None = None


@dataclass
class VerificationVerdict:
    ok: bool
    failures: list[str] = field(default_factory=list)
    co_deepest_exempt: bool = False
    details: dict = field(default_factory=dict)


@dataclass
class PersistenceReport:
    last_change_index: int | None
    distinct_centers: int
    max_dist_to_root: int
    revisit_detected: bool
    stable_in_tail: bool
    movement_count: int
    set_change_count: int
    distinct_centers_tail: int


@dataclass(frozen=True)
class BalancednessSnapshot:
    observation_index: int
    time: float
    centers: tuple[int, ...]
    score: int
    dist_to_root: int
    n_nodes: int
    moved: bool

    @property
    def canonical(self) -> int:
        return self.centers[0]

    @property
    def center_count(self) -> int:
        return len(self.centers)


@dataclass
class TrialTrace:
    """Ordered observations of one seeded run plus its growth events."""

    model: str
    center_kind: str
    params: dict
    seed: int
    engine: str = "arena"
    snapshots: list = field(default_factory=list)
    transitions: list[Transition] = field(default_factory=list)
    tracked_centers: list[int] = field(default_factory=list)
    events: list[GrowthEvent] | None = None
    dead: bool = False
    truncated: bool = False
    failures: list[tuple[int, str]] = field(default_factory=list)


def _top2(depths: dict[int, int]) -> tuple[int, int | None, int]:
    """(deepest depth, its neighbor (lowest id on ties), second depth)."""
    m1, n1, m2 = -1, None, -1
    for nb, d in depths.items():
        if d > m1 or (d == m1 and (n1 is None or nb < n1)):
            if n1 is not None:
                if m1 > m2:
                    m2 = m1
            m1, n1 = d, nb
        elif d > m2:
            m2 = d
    return m1, n1, m2


class CenterTracker:
    """Maintains the Jordan center of a growing arena incrementally.

    The tracker keeps, for the current center, the exact depth of every
    neighbor-rooted subtree; leaf additions update it in O(1), a movement
    (rare) triggers one O(n) rebuild rooted at the new center. The movement
    rule itself is local: the center hops into the deepest neighbor subtree
    exactly when the second deepest lags it by two or more.
    """

    def __init__(self, arena: TreeArena, model: str,
                 fault_suppress_first_movement: bool = False):
        if len(arena) != 1:
            raise ValueError("tracker must start on a single-root arena")
        self.arena = arena
        self.model = model
        self.center = 0
        self.psi = 0
        self.centers: tuple[int, ...] = (0,)
        self.dist = [0]
        self.branch = [-1]
        self.added_obs = [0]
        self.depths: dict[int, int] = {}
        self.last_growth: dict[int, int] = {}
        self.obs_index = -1
        self._fault_pending = fault_suppress_first_movement

    def _rebuild(self) -> None:
        arena = self.arena
        n = len(arena)
        dist = [-1] * n
        branch = [-1] * n
        center = self.center
        dist[center] = 0
        depths: dict[int, int] = {}
        last_growth: dict[int, int] = {}
        queue = deque()
        for nb in arena.neighbors(center):
            dist[nb] = 1
            branch[nb] = nb
            depths[nb] = 0
            last_growth[nb] = self.added_obs[nb]
            queue.append(nb)
        parent, children, added = arena.parent, arena.children, self.added_obs
        while queue:
            u = queue.popleft()
            du, b = dist[u], branch[u]
            if du - 1 > depths[b]:
                depths[b] = du - 1
            if added[u] > last_growth[b]:
                last_growth[b] = added[u]
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
        self.dist, self.branch = dist, branch
        self.depths, self.last_growth = depths, last_growth

    def _center_set(self) -> tuple[int, ...]:
        if not self.depths:
            return (self.center,)
        m1, _, m2 = _top2(self.depths)
        psi = m1 + 1
        co = [self.center]
        for nb, d in self.depths.items():
            excl = m2 if d == m1 else m1
            back = max(0, 1 + excl)
            if max(d, 1 + back) == psi:
                co.append(nb)
        centers = tuple(sorted(co))
        if len(centers) > 2:
            raise RuntimeError(f"more than two Jordan centers: {centers}")
        return centers

    def observe(self, time: float, events: Iterable[GrowthEvent]
                ) -> tuple[CenterSnapshot, Transition | None]:
        self.obs_index += 1
        obs = self.obs_index
        arena = self.arena
        old_center = self.center
        psi_prev = self.psi
        prev_depths = dict(self.depths)
        m1_prev, n1_prev, m2_prev = _top2(prev_depths)

        for ev in events:
            p, c = ev.parent, ev.child
            dp = self.dist[p] + 1
            self.dist.append(dp)
            b = c if p == self.center else self.branch[p]
            self.branch.append(b)
            self.added_obs.append(obs)
            if self.depths.get(b, -1) < dp - 1:
                self.depths[b] = dp - 1
            self.last_growth[b] = obs

        m1_post, n1_post, m2_post = _top2(self.depths)
        grew1 = n1_prev is not None and self.depths.get(n1_prev, -1) > m1_prev
        # second-rank branch before the batch (ties by id), for the corollary
        n2_prev = None
        best = (-1, None)
        for nb, d in prev_depths.items():
            if nb == n1_prev:
                continue
            if d > best[0] or (d == best[0] and (best[1] is None or nb < best[1])):
                best = (d, nb)
        n2_prev = best[1]
        grew2 = n2_prev is not None and self.depths.get(n2_prev, -1) > prev_depths[n2_prev]
        top2_grew = bool(grew1 and grew2)

        moved = False
        hops = 0
        alive_non_deepest: int | None = None
        new_center_time: float | None = None
        while self.depths:
            m1, n1, m2 = _top2(self.depths)
            if m2 > m1 - 2:
                break
            if m1 < 1:
                break
            if self._fault_pending:
                self._fault_pending = False
                break
            if not moved and self.model == "IC":
                alive_non_deepest = sum(
                    1 for nb in self.depths
                    if nb != n1 and self.last_growth.get(nb) == obs)
            moved = True
            hops += 1
            self.center = n1
            self._rebuild()

        m1, _, m2 = _top2(self.depths)
        self.psi = m1 + 1 if self.depths else 0
        self.centers = self._center_set()
        canonical = self.centers[0]
        if canonical == self.center:
            deepest, second = m1, m2
        else:
            dd = neighbor_subtree_depths(arena, canonical)
            deepest = dd[0][1] if dd else -1
            second = dd[1][1] if len(dd) > 1 else -1
        snapshot = CenterSnapshot(
            observation_index=obs, time=time, centers=self.centers,
            psi=self.psi, dist_to_root=arena.depth[canonical],
            deepest_depth=deepest, second_deepest_depth=second,
            n_nodes=len(arena), moved=moved)
        transition = None
        if obs > 0:
            if moved:
                new_center_time = arena.infected_at[self.center]
            transition = Transition(
                obs_index=obs, time=time, old_center=old_center,
                new_center=self.center, moved=moved, hops=hops,
                psi_prev=psi_prev, psi_post=self.psi,
                max1_prev=m1_prev, max2_prev=m2_prev,
                max1_post=m1_post, max2_post=m2_post,
                deepest_neighbor_post=n1_post,
                co_deepest=(m1_prev == m2_prev != -1),
                top2_grew=top2_grew,
                alive_non_deepest=alive_non_deepest,
                old_center_infected_at=arena.infected_at[old_center] if moved else None,
                new_center_infected_at=new_center_time)
        return snapshot, transition


def verify_movement(transition: Transition) -> VerificationVerdict:
    """Check one observation step against the center-movement laws:
    (a) movement happens iff the second-deepest subtree sat two below the
        centrality and stayed there while the deepest grew;
    (b) on movement the new center is the deepest neighbor;
    (c) on movement the centrality is preserved;
    (d) the center moves at most one hop;
    (e) no movement when both of the two deepest subtrees grew.
    Transitions whose two deepest subtrees tie are exempt from (a) and
    flagged instead of failed.
    """
    t = transition
    verdict = VerificationVerdict(ok=True)
    expected = (t.max2_prev == t.psi_prev - 2
                and t.max2_post == t.psi_prev - 2
                and t.max1_post == t.psi_prev)
    if t.moved != expected:
        if t.co_deepest:
            verdict.co_deepest_exempt = True
        else:
            verdict.failures.append("movement-iff")
    if t.moved:
        if t.new_center != t.deepest_neighbor_post:
            verdict.failures.append("moved-to-deepest")
        if t.psi_post != t.psi_prev:
            verdict.failures.append("psi-preserved-on-move")
    if t.hops > 1:
        verdict.failures.append("single-hop")
    if t.top2_grew and t.moved:
        verdict.failures.append("no-move-when-top2-grew")
    verdict.ok = not verdict.failures
    if not verdict.ok:
        verdict.details = {"obs_index": t.obs_index}
    return verdict


def verify_snapshot(snapshot: CenterSnapshot) -> VerificationVerdict:
    """Structural center facts: the deepest neighbor subtree sits exactly one
    below the centrality and the second deepest at most two below; at most two
    centers exist."""
    verdict = VerificationVerdict(ok=True)
    s = snapshot
    if s.n_nodes >= 2:
        if s.deepest_depth != s.psi - 1:
            verdict.failures.append("deepest-psi-minus-1")
        if not (s.psi - 2 <= s.second_deepest_depth <= s.psi - 1):
            verdict.failures.append("second-deepest-range")
    if not 1 <= len(s.centers) <= 2:
        verdict.failures.append("center-count")
    verdict.ok = not verdict.failures
    if not verdict.ok:
        verdict.details = {"obs_index": s.observation_index}
    return verdict


def verify_ic_specifics(trace: TrialTrace) -> VerificationVerdict:
    """IC-only laws: movements happen only once every sibling subtree of the
    old center is dead, the old center was infected before the new one, and an
    abandoned center is never revisited."""
    if trace.model != "IC":
        raise ValueError("verify_ic_specifics requires an IC trace")
    verdict = VerificationVerdict(ok=True)
    abandoned: set[int] = set()
    for t in trace.transitions:
        if not t.moved:
            continue
        if t.alive_non_deepest is not None and t.alive_non_deepest > 0:
            verdict.failures.append("ic-dead-siblings")
            verdict.details.setdefault("ic-dead-siblings", []).append(t.obs_index)
        if (t.old_center_infected_at is not None
                and t.new_center_infected_at is not None
                and not t.old_center_infected_at < t.new_center_infected_at):
            verdict.failures.append("ic-infection-order")
            verdict.details.setdefault("ic-infection-order", []).append(t.obs_index)
        abandoned.add(t.old_center)
        if t.new_center in abandoned:
            verdict.failures.append("ic-no-revisit")
            verdict.details.setdefault("ic-no-revisit", []).append(t.obs_index)
    verdict.ok = not verdict.failures
    return verdict


def persistence_report(trace: TrialTrace, tail_window: int) -> PersistenceReport:
    snaps = trace.snapshots
    if not snaps:
        raise ValueError("empty trace")
    if tail_window > len(snaps):
        raise ValueError("tail_window exceeds trace length")
    moved_flags = [s.moved for s in snaps]
    last_change = None
    for i, m in enumerate(moved_flags):
        if m:
            last_change = i
    visited: list[int] = []
    for c in trace.tracked_centers:
        if not visited or visited[-1] != c:
            visited.append(c)
    revisit = len(visited) != len(set(visited))
    set_changes = sum(
        1 for a, b in zip(snaps, snaps[1:]) if a.centers != b.centers)
    tail = trace.tracked_centers[-tail_window:] if tail_window > 0 else []
    return PersistenceReport(
        last_change_index=last_change,
        distinct_centers=len(set(trace.tracked_centers)),
        max_dist_to_root=max(s.dist_to_root for s in snaps),
        revisit_detected=revisit,
        stable_in_tail=not any(moved_flags[len(snaps) - tail_window:]) if tail_window > 0 else True,
        movement_count=sum(moved_flags),
        set_change_count=set_changes,
        distinct_centers_tail=len(set(tail)) if tail else 0)


class _JordanTraceObserver:
    def __init__(self, arena, trace: TrialTrace, model: str, verify: bool,
                 oracle_check: bool, fault_suppress_first_movement: bool):
        self.trace = trace
        self.arena = arena
        self.verify = verify
        self.oracle_check = oracle_check
        self.tracker = CenterTracker(
            arena, model,
            fault_suppress_first_movement=fault_suppress_first_movement)

    def observe(self, time: float, events: list[GrowthEvent]) -> None:
        trace = self.trace
        snapshot, transition = self.tracker.observe(time, events)
        trace.snapshots.append(snapshot)
        trace.tracked_centers.append(self.tracker.center)
        if transition is not None:
            trace.transitions.append(transition)
            if self.verify:
                v = verify_movement(transition)
                for f in v.failures:
                    trace.failures.append((snapshot.observation_index, f))
        if self.verify:
            v = verify_snapshot(snapshot)
            for f in v.failures:
                trace.failures.append((snapshot.observation_index, f))
        if self.oracle_check:
            exact = jordan_center_exact(self.arena)
            if exact.centers != snapshot.centers or exact.psi != snapshot.psi:
                trace.failures.append((snapshot.observation_index, "oracle-mismatch"))


class _BalancednessTraceObserver:
    def __init__(self, arena, trace: TrialTrace):
        self.arena = arena
        self.trace = trace
        self.prev_canonical: int | None = None
        self.obs = -1

    def observe(self, time: float, events: list[GrowthEvent]) -> None:
        self.obs += 1
        arena = self.arena
        centers, score = balancedness_center(arena)
        canonical = centers[0]
        moved = self.prev_canonical is not None and canonical != self.prev_canonical
        self.prev_canonical = canonical
        self.trace.snapshots.append(BalancednessSnapshot(
            observation_index=self.obs, time=time, centers=centers, score=score,
            dist_to_root=arena.depth[canonical], n_nodes=len(arena), moved=moved))
        self.trace.tracked_centers.append(canonical)


def track_multi(arena: TreeArena,
                batches: Iterator[tuple[float, list[GrowthEvent]]],
                *, model: str, center_kinds: tuple[str, ...] = (JORDAN,),
                seed: int = 0, params: dict | None = None, verify: bool = False,
                oracle_check: bool = False, collect_events: bool = False,
                fault_suppress_first_movement: bool = False) -> dict[str, TrialTrace]:
    """Drive one growth stream past any number of center observers.

    The batch generator must apply each event to the arena before yielding it,
    so every observer sees the arena exactly as of its observation point.
    """
    traces: dict[str, TrialTrace] = {}
    observers = []
    for kind in center_kinds:
        trace = TrialTrace(model=model, center_kind=kind, params=params or {},
                           seed=seed, events=[] if collect_events else None)
        traces[kind] = trace
        if kind == JORDAN:
            observers.append(_JordanTraceObserver(
                arena, trace, model, verify, oracle_check,
                fault_suppress_first_movement))
        elif kind == BALANCEDNESS:
            observers.append(_BalancednessTraceObserver(arena, trace))
        else:
            raise ValueError(f"unknown center kind {kind!r}")

    def handle(time: float, events: list[GrowthEvent]) -> None:
        for ob in observers:
            ob.observe(time, events)
        if collect_events:
            for trace in traces.values():
                trace.events.extend(events)

    handle(arena.infected_at[0], [])
    for time, events in batches:
        handle(time, events)
    return traces


def track(arena: TreeArena, batches: Iterator[tuple[float, list[GrowthEvent]]],
          *, model: str, center_kind: str = JORDAN, seed: int = 0,
          params: dict | None = None, verify: bool = False,
          oracle_check: bool = False, collect_events: bool = False,
          fault_suppress_first_movement: bool = False) -> TrialTrace:
    """Consume a batch stream and produce one snapshot per observation.

    With verify=True every transition and snapshot is checked against the
    movement laws; with oracle_check=True the incremental center is compared
    to a from-scratch recomputation at every observation. Failures are
    recorded on the trace rather than raised.
    """
    return track_multi(
        arena, batches, model=model, center_kinds=(center_kind,), seed=seed,
        params=params, verify=verify, oracle_check=oracle_check,
        collect_events=collect_events,
        fault_suppress_first_movement=fault_suppress_first_movement)[center_kind]


def track_balancedness(arena: TreeArena,
                       batches: Iterator[tuple[float, list[GrowthEvent]]],
                       *, model: str, seed: int = 0, params: dict | None = None,
                       collect_events: bool = False) -> TrialTrace:
    """Balancedness-center (centroid) variant of track()."""
    return track(arena, batches, model=model, center_kind=BALANCEDNESS,
                 seed=seed, params=params, collect_events=collect_events)

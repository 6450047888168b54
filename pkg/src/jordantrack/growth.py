"""Seeded stochastic growth engines: independent cascade, discrete and
continuous susceptible-infected spread, and preferential attachment.

All engines mutate a TreeArena in place and emit GrowthEvent records; an
identical (model, parameters, seed) triple reproduces the identical event
list bit for bit.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .tree import TreeArena

MASK64 = (1 << 64) - 1
GOLDEN64 = 0x9E3779B97F4A7C15

IC = "IC"
DSI = "DSI"
CSI = "CSI"
PA = "PA"
MODELS = (IC, DSI, CSI, PA)


def mix64(x: int) -> int:
    """Stationary 64-bit finalizer (splitmix64)."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Derive a per-trial seed; independent streams, no cross-trial sharing."""
    return mix64((master_seed + (trial_index + 1) * GOLDEN64) & MASK64)


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(trial_seed(master_seed, trial_index))


@dataclass(frozen=True)
class UnderlyingTreeSpec:
    """Host tree on which the infection spreads.

    regular: the root has d+1 children and every other vertex d children.
    irregular: every node's child count is drawn once, uniformly from
    degree_choices, at creation and never resampled.
    """

    kind: str = "regular"
    d: int = 4
    degree_choices: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind == "regular":
            if self.d < 2:
                raise ValueError("regular tree requires d >= 2")
        elif self.kind == "irregular":
            if not self.degree_choices:
                raise ValueError("irregular tree requires degree_choices")
            if min(self.degree_choices) < 3:
                raise ValueError("irregular tree requires min degree choice >= 3")
        elif self.kind != "none":
            raise ValueError(f"unknown tree kind {self.kind!r}")

    def root_slots(self, rng: np.random.Generator) -> int:
        if self.kind == "regular":
            return self.d + 1
        if self.kind == "irregular":
            return self.child_slots(rng)
        return 0

    def child_slots(self, rng: np.random.Generator) -> int:
        if self.kind == "regular":
            return self.d
        if self.kind == "irregular":
            choices = self.degree_choices
            return choices[int(rng.integers(0, len(choices)))]
        return 0

    def mean_child_slots(self) -> float:
        if self.kind == "regular":
            return float(self.d)
        return sum(self.degree_choices) / len(self.degree_choices)


@dataclass(frozen=True)
class GrowthEvent:
    """One infection: `child` is fresh, `parent` was infected strictly earlier."""

    time: float
    parent: int
    child: int


@dataclass
class StopCondition:
    """First satisfied condition wins; max_events is a safety abort."""

    max_steps: int | None = None
    max_nodes: int | None = None
    max_depth: int | None = None
    max_time: float | None = None
    max_events: int | None = None


@dataclass
class GrowthState:
    """Model-specific frontier state for one trial."""

    model: str
    tree_spec: UnderlyingTreeSpec
    p: float = 0.0
    lam: float = 1.0  # continuous-SI rate, fixed at 1
    step: int = 0
    clock: float = 0.0
    dead: bool = False
    truncated: bool = False
    frontier: list[int] = field(default_factory=list)   # IC: last step's infections
    active: list[int] = field(default_factory=list)     # DSI: nodes with residual > 0
    queue: list[tuple[float, int, int]] = field(default_factory=list)  # CSI
    seq: int = 0
    depth_first_time: list[float] = field(default_factory=list)  # CSI first-passage per level


def new_tree(spec: UnderlyingTreeSpec, rng: np.random.Generator) -> TreeArena:
    return TreeArena(spec.root_slots(rng))


def new_state(model: str, tree: TreeArena, spec: UnderlyingTreeSpec, p: float = 0.0,
              rng: np.random.Generator | None = None,
              strict_supercritical: bool = False) -> GrowthState:
    if model not in MODELS:
        raise ValueError(f"unknown growth model {model!r}")
    if model in (IC, DSI):
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if strict_supercritical and p * spec.mean_child_slots() <= 1.0:
            raise ValueError("pd <= 1: subcritical spread rejected (strict_supercritical)")
    state = GrowthState(model=model, tree_spec=spec, p=p)
    if model == IC:
        state.frontier = [0]
    elif model == DSI:
        state.active = [0] if tree.residual[0] > 0 else []
    elif model == CSI:
        if rng is None:
            raise ValueError("CSI state requires an rng to schedule the root's edges")
        _enqueue_edges(state, 0, 0.0, tree.residual[0], rng)
        state.depth_first_time = [0.0]
    return state


def _enqueue_edges(state: GrowthState, node: int, now: float, slots: int,
                   rng: np.random.Generator) -> None:
    # memorylessness of Exp(1) makes drawing every edge delay at parent
    # infection equivalent to racing them lazily
    if slots <= 0:
        return
    delays = rng.exponential(1.0 / state.lam, size=slots)
    for dt in delays:
        heapq.heappush(state.queue, (now + float(dt), state.seq, node))
        state.seq += 1


def step_ic(state: GrowthState, tree: TreeArena, rng: np.random.Generator) -> list[GrowthEvent]:
    """One independent-cascade step: each frontier node gets a single round of
    Bernoulli(p) attempts on its residual slots, then turns sterile."""
    if state.model != IC:
        raise ValueError("step_ic requires an IC state")
    if state.dead or not state.frontier:
        state.dead = True
        return []
    state.step += 1
    now = state.step
    events: list[GrowthEvent] = []
    new_frontier: list[int] = []
    p = state.p
    spec = state.tree_spec
    for u in state.frontier:
        r = tree.residual[u]
        k = int(rng.binomial(r, p)) if r > 0 else 0
        for _ in range(k):
            c = tree.add_child(u, now, spec.child_slots(rng))
            events.append(GrowthEvent(now, u, c))
            new_frontier.append(c)
        # u turns sterile by leaving the frontier; its unused residual slots
        # stay on record as never-infected neighbors
    state.frontier = new_frontier
    state.clock = now
    if not new_frontier:
        state.dead = True
    return events


def step_dsi(state: GrowthState, tree: TreeArena, rng: np.random.Generator) -> list[GrowthEvent]:
    """One discrete-SI step: every infected node with residual slots retries
    Bernoulli(p) per slot; failures repeat on later steps."""
    if state.model != DSI:
        raise ValueError("step_dsi requires a DSI state")
    state.step += 1
    now = state.step
    events: list[GrowthEvent] = []
    still_active: list[int] = []
    added: list[int] = []
    p = state.p
    spec = state.tree_spec
    for u in state.active:
        r = tree.residual[u]
        k = int(rng.binomial(r, p)) if r > 0 else 0
        for _ in range(k):
            c = tree.add_child(u, now, spec.child_slots(rng))
            events.append(GrowthEvent(now, u, c))
            added.append(c)
        if tree.residual[u] > 0:
            still_active.append(u)
    for c in added:
        if tree.residual[c] > 0:
            still_active.append(c)
    still_active.sort()
    state.active = still_active
    state.clock = now
    return events


def run_csi(state: GrowthState, tree: TreeArena, rng: np.random.Generator,
            stop: StopCondition) -> list[GrowthEvent]:
    """Event-driven continuous SI: pop the earliest scheduled edge, infect,
    schedule the fresh node's edges. Stops on the first satisfied condition."""
    if state.model != CSI:
        raise ValueError("run_csi requires a CSI state")
    events: list[GrowthEvent] = []
    spec = state.tree_spec
    max_depth_seen = tree.depth[-1] if len(tree) > 1 else 0
    while True:
        if stop.max_nodes is not None and len(tree) >= stop.max_nodes:
            return events
        if stop.max_depth is not None and max_depth_seen >= stop.max_depth:
            return events
        if stop.max_events is not None and len(events) >= stop.max_events:
            state.truncated = True
            return events
        if not state.queue:
            state.dead = True  # unreachable on an infinite host tree
            return events
        t, _, parent = heapq.heappop(state.queue)
        if stop.max_time is not None and t > stop.max_time:
            state.clock = stop.max_time
            return events
        state.clock = t
        c = tree.add_child(parent, t, spec.child_slots(rng))
        events.append(GrowthEvent(t, parent, c))
        d = tree.depth[c]
        if d > max_depth_seen:
            max_depth_seen = d
            state.depth_first_time.append(t)
        _enqueue_edges(state, c, t, tree.residual[c], rng)


def step_pa(tree: TreeArena, rng: np.random.Generator) -> GrowthEvent:
    """Attach one new leaf to a node sampled with probability degree/(2*edges);
    the very first edge is forced onto the root."""
    n = len(tree)
    if n == 1:
        parent = 0
    else:
        r = int(rng.integers(0, 2 * (n - 1)))
        acc = 0
        parent = n - 1
        for v in range(n):
            acc += tree.degree(v)
            if r < acc:
                parent = v
                break
    c = tree.add_child(parent, float(n), 0, consume_slot=False)
    return GrowthEvent(float(n), parent, c)


def is_dead(state: GrowthState, tree: TreeArena) -> bool:
    """Whether an IC spread can never grow again (frontier emptied)."""
    if state.model != IC:
        raise ValueError("is_dead is defined for the IC model only")
    return state.dead or not state.frontier

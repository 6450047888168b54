import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jordantrack.growth import (
    CSI,
    DSI,
    IC,
    PA,
    GrowthEvent,
    StopCondition,
    UnderlyingTreeSpec,
    new_state,
    new_tree,
    run_csi,
    step_dsi,
    step_ic,
    step_pa,
    trial_rng,
)
from jordantrack.tracking import (
    Transition,
    persistence_report,
    track,
    track_balancedness,
    verify_ic_specifics,
    verify_movement,
)
from jordantrack.tree import TreeArena, balancedness_center, distance, jordan_center_exact

from conftest import brute_balancedness

REG2 = UnderlyingTreeSpec(kind="regular", d=2)
REG4 = UnderlyingTreeSpec(kind="regular", d=4)


def grow_batches(model, spec, p, rng, tree, *, steps=None, nodes=None):
    state = new_state(model, tree, spec, p=p, rng=rng)
    if model in (IC, DSI):
        step_fn = step_ic if model == IC else step_dsi
        def gen():
            for _ in range(steps):
                if model == IC and state.dead:
                    yield float(state.step + 1), []
                    state.step += 1
                    continue
                events = step_fn(state, tree, rng)
                yield float(state.step), events
        return gen()
    if model == CSI:
        def gen():
            while len(tree) < nodes:
                events = run_csi(state, tree, rng,
                                 StopCondition(max_nodes=len(tree) + 1))
                if not events:
                    return
                yield events[0].time, events
        return gen()
    if model == PA:
        def gen():
            while len(tree) < nodes:
                ev = step_pa(tree, rng)
                yield ev.time, [ev]
        return gen()
    raise ValueError(model)


def manual_batches(arena: TreeArena, additions: list[list[int]]):
    """Grow a hand-built tree: each batch is a list of parent ids."""
    step = 0
    for parents in additions:
        step += 1
        events = []
        for p in parents:
            c = arena.add_child(p, float(step), 0, consume_slot=False)
            events.append(GrowthEvent(float(step), p, c))
        yield float(step), events


class TestTrack:
    def test_no_growth_single_snapshot(self):
        arena = TreeArena(3)
        trace = track(arena, iter([]), model=IC)
        assert len(trace.snapshots) == 1
        snap = trace.snapshots[0]
        assert snap.centers == (0,) and snap.psi == 0 and snap.n_nodes == 1

    def test_symmetric_p1_growth_center_stays_root(self):
        rng = trial_rng(0, 0)
        tree = new_tree(REG2, rng)
        trace = track(tree, grow_batches(IC, REG2, 1.0, rng, tree, steps=3),
                      model=IC, verify=True, oracle_check=True)
        assert all(s.centers == (0,) for s in trace.snapshots)
        assert not trace.failures

    @pytest.mark.parametrize("model,p", [(IC, 0.5), (DSI, 0.45), (CSI, 0.0), (PA, 0.0)])
    def test_oracle_replay(self, model, p):
        spec = REG4 if model != PA else UnderlyingTreeSpec(kind="none")
        for s in range(4):
            rng = trial_rng(50 + s, 0)
            tree = new_tree(spec, rng)
            kw = {"steps": 10} if model in (IC, DSI) else {"nodes": 150}
            trace = track(tree, grow_batches(model, spec, p, rng, tree, **kw),
                          model=model, verify=True, oracle_check=True)
            assert trace.failures == []

    def test_path_growth_moves_center_one_hop_at_a_time(self):
        arena = TreeArena(0)
        trace = track(arena, manual_batches(arena, [[0], [1], [2], [3], [4]]),
                      model=DSI, verify=True, oracle_check=True)
        assert trace.failures == []
        # path of 6: canonical center ends between, moved flags recorded
        moves = [s.moved for s in trace.snapshots]
        assert sum(moves) >= 2
        for t in trace.transitions:
            assert t.hops <= 1


class TestVerifyMovement:
    def test_constructed_movement_case(self):
        # center 0 with branches: deepest grows, sibling stuck two below
        arena = TreeArena(0)
        batches = manual_batches(arena, [[0, 0], [1], [3]])
        # tree: 0 -> {1, 2}; 1 -> 3; 3 -> 4 ... center must move to 1
        trace = track(arena, batches, model=DSI, verify=True, oracle_check=True)
        assert trace.failures == []
        moved = [t for t in trace.transitions if t.moved]
        assert len(moved) == 1
        t = moved[0]
        assert t.new_center == 1
        assert t.psi_post == t.psi_prev
        assert t.max2_prev == t.psi_prev - 2
        assert t.max1_post == t.psi_prev

    def test_no_move_when_both_deep_branches_grow(self):
        arena = TreeArena(0)
        # two branches growing in lockstep: center pinned at root
        batches = manual_batches(arena, [[0, 0], [1, 2], [3, 4], [5, 6]])
        trace = track(arena, batches, model=DSI, verify=True, oracle_check=True)
        assert trace.failures == []
        assert all(not t.moved for t in trace.transitions)
        assert any(t.top2_grew for t in trace.transitions)

    def test_movement_iff_clause_fires_on_suppressed_move(self):
        arena = TreeArena(0)
        batches = manual_batches(arena, [[0], [1], [2]])
        trace = track(arena, batches, model=DSI, verify=True,
                      fault_suppress_first_movement=True)
        clauses = {c for _, c in trace.failures}
        assert "movement-iff" in clauses

    def test_verdict_object_shape(self):
        t = Transition(obs_index=1, time=1.0, old_center=0, new_center=0,
                       moved=False, hops=0, psi_prev=2, psi_post=3,
                       max1_prev=1, max2_prev=1, max1_post=2, max2_post=2,
                       deepest_neighbor_post=1, co_deepest=True, top2_grew=True)
        v = verify_movement(t)
        assert v.ok and not v.failures


class TestVerifyICSpecifics:
    def test_requires_ic(self):
        arena = TreeArena(0)
        trace = track(arena, iter([]), model=DSI)
        with pytest.raises(ValueError):
            verify_ic_specifics(trace)

    def test_vacuous_on_stably_centered_trace(self):
        rng = trial_rng(0, 0)
        tree = new_tree(REG2, rng)
        trace = track(tree, grow_batches(IC, REG2, 1.0, rng, tree, steps=3), model=IC)
        assert verify_ic_specifics(trace).ok

    def test_two_hop_narrative(self):
        # one lopsided cascade: side branches die, center chases the runner
        arena = TreeArena(0)
        batches = manual_batches(arena, [
            [0, 0, 0],      # root spawns 1,2,3
            [1],            # only 1's branch stays alive -> 4
            [4],            # 5 ... center moves toward 1 then 4
            [5],
            [6],
        ])
        trace = track(arena, batches, model=IC, verify=True, oracle_check=True)
        assert trace.failures == []
        verdict = verify_ic_specifics(trace)
        assert verdict.ok, verdict.failures
        moves = [t for t in trace.transitions if t.moved]
        assert len(moves) >= 2
        assert all(t.alive_non_deepest == 0 for t in moves)
        # infection order along the center path
        for t in moves:
            assert t.old_center_infected_at < t.new_center_infected_at

    def test_seeded_runs_zero_revisits(self):
        for s in range(60):
            rng = trial_rng(900 + s, 0)
            tree = new_tree(REG4, rng)
            trace = track(tree, grow_batches(IC, REG4, 0.4, rng, tree, steps=14),
                          model=IC, verify=True)
            assert trace.failures == []
            verdict = verify_ic_specifics(trace)
            assert verdict.ok, verdict.failures


class TestFuzzInvariants:
    def test_ten_thousand_transitions_zero_failures(self):
        transitions = 0
        configs = [(IC, REG2, 0.6, {"steps": 14}), (IC, REG4, 0.4, {"steps": 12}),
                   (DSI, REG2, 0.4, {"steps": 12}), (DSI, REG4, 0.3, {"steps": 10}),
                   (CSI, REG2, 0.0, {"nodes": 120}), (PA, UnderlyingTreeSpec(kind="none"), 0.0, {"nodes": 120})]
        seed = 0
        while transitions < 10_000:
            model, spec, p, kw = configs[seed % len(configs)]
            rng = trial_rng(3000 + seed, 0)
            tree = new_tree(spec, rng)
            trace = track(tree, grow_batches(model, spec, p, rng, tree, **kw),
                          model=model, verify=True)
            assert trace.failures == [], (model, seed, trace.failures[:3])
            transitions += len(trace.transitions)
            seed += 1

    def test_psi_growth_and_hop_bounds(self):
        for s in range(10):
            rng = trial_rng(70 + s, 0)
            tree = new_tree(REG4, rng)
            trace = track(tree, grow_batches(DSI, REG4, 0.5, rng, tree, steps=10),
                          model=DSI)
            for a, b, t in zip(trace.snapshots, trace.snapshots[1:], trace.transitions):
                assert 0 <= b.psi - a.psi <= 1
                if t.moved:
                    assert b.psi == a.psi
                    assert distance(tree, t.old_center, t.new_center) == 1
                assert 1 <= len(b.centers) <= 2


class TestPersistenceReport:
    def test_constant_center(self):
        rng = trial_rng(0, 0)
        tree = new_tree(REG2, rng)
        trace = track(tree, grow_batches(IC, REG2, 1.0, rng, tree, steps=4), model=IC)
        report = persistence_report(trace, tail_window=3)
        assert report.last_change_index is None
        assert report.distinct_centers == 1
        assert report.stable_in_tail
        assert not report.revisit_detected

    def test_single_change_with_tail_window(self):
        arena = TreeArena(0)
        additions = [[0], [1], [2]] + [[0]] * 37  # one early run, then noise leaves
        trace = track(arena, manual_batches(arena, additions), model=DSI)
        assert len(trace.snapshots) == 41
        report = persistence_report(trace, tail_window=10)
        assert report.last_change_index is not None and report.last_change_index <= 5
        assert report.stable_in_tail

    def test_tail_window_validation(self):
        arena = TreeArena(0)
        trace = track(arena, iter([]), model=IC)
        with pytest.raises(ValueError):
            persistence_report(trace, tail_window=5)


class TestBalancedness:
    def test_single_node(self):
        arena = TreeArena(0)
        trace = track_balancedness(arena, iter([]), model=PA)
        assert trace.snapshots[0].centers == (0,)
        assert trace.snapshots[0].score == 0

    def test_path_growth_matches_exhaustive_oracle(self):
        arena = TreeArena(0)
        additions = [[i] for i in range(12)]
        oracle_states = []
        check = TreeArena(0)
        for i in range(12):
            check.add_child(i, float(i + 1), 0, consume_slot=False)
            oracle_states.append(brute_balancedness(check))
        trace = track_balancedness(arena, manual_batches(arena, additions), model=PA)
        for snap, (centers, score) in zip(trace.snapshots[1:], oracle_states):
            assert snap.centers == centers
            assert snap.score == score

    def test_random_growth_matches_brute_force(self):
        rng = trial_rng(31, 0)
        tree = new_tree(REG4, rng)
        trace = track_balancedness(
            tree, grow_batches(DSI, REG4, 0.5, rng, tree, steps=8), model=DSI)
        final_centers, final_score = brute_balancedness(tree)
        assert trace.snapshots[-1].centers == final_centers
        assert trace.snapshots[-1].score == final_score

    def test_churn_flags_present(self):
        arena = TreeArena(0)
        additions = [[i] for i in range(20)]
        trace = track_balancedness(arena, manual_batches(arena, additions), model=PA)
        assert sum(s.moved for s in trace.snapshots) >= 4


@given(seed=st.integers(0, 2**31 - 1),
       model_idx=st.integers(0, 2),
       p=st.floats(0.3, 0.8))
@settings(max_examples=60, deadline=None)
def test_property_oracle_equality(seed, model_idx, p):
    model = (IC, DSI, CSI)[model_idx]
    spec = REG2
    rng = trial_rng(seed, 0)
    tree = new_tree(spec, rng)
    kw = {"steps": 8} if model in (IC, DSI) else {"nodes": 60}
    trace = track(tree, grow_batches(model, spec, p, rng, tree, **kw),
                  model=model, verify=True, oracle_check=True)
    assert trace.failures == []

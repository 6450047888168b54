import json

import pytest

from jordantrack.growth import StopCondition, UnderlyingTreeSpec
from jordantrack.harness import (
    PRESET_NAMES,
    ExperimentConfig,
    preset,
    render_trace_csv,
    run,
    run_trial,
    verify_suite,
)


def tiny_csi_config(**overrides):
    base = dict(model="CSI", tree=UnderlyingTreeSpec(kind="regular", d=2), p=0.0,
                stop=StopCondition(max_nodes=40), trials=4, master_seed=99,
                observation="per_node", tail_window=10)
    base.update(overrides)
    return ExperimentConfig(**base)


class TestConfig:
    def test_rejects_unknown_model(self):
        with pytest.raises(ValueError):
            ExperimentConfig(model="SIR")

    def test_rejects_bad_probability(self):
        with pytest.raises(ValueError):
            ExperimentConfig(model="IC", p=1.5)

    def test_rejects_missing_stop(self):
        with pytest.raises(ValueError):
            ExperimentConfig(model="CSI", observation="per_node",
                             stop=StopCondition())

    def test_rejects_wrong_observation_policy(self):
        with pytest.raises(ValueError):
            ExperimentConfig(model="CSI", observation="per_step",
                             stop=StopCondition(max_nodes=10))

    def test_roundtrip_dict(self):
        cfg = tiny_csi_config()
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again.to_dict() == cfg.to_dict()

    def test_engine_resolution(self):
        assert preset("ic_fig").resolved_engine() == "condensed"
        assert tiny_csi_config().resolved_engine() == "arena"
        matrix_ic = ExperimentConfig(model="IC", p=0.4,
                                     stop=StopCondition(max_nodes=500))
        assert matrix_ic.resolved_engine() == "arena"


class TestPresets:
    def test_names(self):
        assert PRESET_NAMES == ("balancedness_fig", "csi_fig", "ic_fig",
                                "ic_irregular_fig", "pa_fig")

    def test_ic_fig_protocol(self):
        cfg = preset("ic_fig")
        assert (cfg.model, cfg.tree.d, cfg.p) == ("IC", 4, 0.4)
        assert cfg.stop.max_steps == 40
        assert cfg.trials == 100
        assert cfg.tail_window == 10

    def test_ic_irregular_fig(self):
        cfg = preset("ic_irregular_fig")
        assert cfg.tree.kind == "irregular"
        assert cfg.tree.degree_choices == (3, 4)
        assert cfg.p == 0.4

    def test_csi_fig_protocol(self):
        cfg = preset("csi_fig")
        assert cfg.model == "CSI" and cfg.stop.max_nodes == 100
        assert cfg.trials == 100

    def test_balancedness_fig_tracks_both(self):
        cfg = preset("balancedness_fig")
        assert set(cfg.center_kinds) == {"jordan", "balancedness"}

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            preset("nope")

    def test_presets_carry_fixed_seeds(self):
        assert preset("ic_fig").master_seed == preset("ic_fig").master_seed
        assert preset("ic_fig").master_seed != 0


class TestRun:
    def test_symmetric_ic_single_trial(self):
        cfg = ExperimentConfig(model="IC", tree=UnderlyingTreeSpec(kind="regular", d=2),
                               p=1.0, stop=StopCondition(max_steps=3), trials=1,
                               master_seed=5, observation="per_step", tail_window=2,
                               engine="arena")
        report = run(cfg)
        rep = report.reports["jordan"][0]
        assert rep.distinct_centers == 1
        assert rep.max_dist_to_root == 0
        assert report.dead_runs == 0

    def test_histogram_mass_equals_trials(self):
        report = run(tiny_csi_config(trials=7))
        agg = report.per_kind["jordan"]
        assert sum(agg.histogram_max_dist.values()) == 7
        assert sum(agg.histogram_changes.values()) == 7

    def test_csv_bodies_deterministic(self):
        a = run(tiny_csi_config()).csv_bodies["jordan"]
        b = run(tiny_csi_config()).csv_bodies["jordan"]
        assert a == b

    def test_parallel_equals_sequential(self):
        seq = run(tiny_csi_config(trials=6, workers=1))
        par = run(tiny_csi_config(trials=6, workers=3))
        assert seq.csv_bodies == par.csv_bodies
        a, b = seq.summary_dict(), par.summary_dict()
        a.pop("config"), b.pop("config")  # config echo differs only in workers
        assert a == b

    def test_different_seed_changes_bodies(self):
        a = run(tiny_csi_config()).csv_bodies["jordan"]
        b = run(tiny_csi_config(master_seed=100)).csv_bodies["jordan"]
        assert a != b

    def test_output_files(self, tmp_path):
        report = run(tiny_csi_config(), output_dir=tmp_path)
        csv_path = tmp_path / "trace_jordan.csv"
        summary_path = tmp_path / "summary.json"
        assert csv_path.exists() and summary_path.exists()
        lines = csv_path.read_text().splitlines()
        assert lines[0].startswith("# generated_at=")
        assert lines[1].split(",")[0] == "trial"
        body = "\n".join(lines[1:]) + "\n"
        assert body == report.csv_bodies["jordan"]
        summary = json.loads(summary_path.read_text())
        assert summary["trials"] == 4
        assert summary["config"]["model"] == "CSI"

    def test_balancedness_kind_emits_second_csv(self):
        cfg = ExperimentConfig(model="IC", tree=UnderlyingTreeSpec(kind="regular", d=2),
                               p=0.6, stop=StopCondition(max_steps=6), trials=3,
                               master_seed=4, observation="per_step", tail_window=3,
                               center_kinds=("jordan", "balancedness"), engine="arena")
        report = run(cfg)
        assert set(report.csv_bodies) == {"jordan", "balancedness"}
        header = report.csv_bodies["balancedness"].splitlines()[0]
        assert "score" in header

    def test_condensed_run_counts_dead(self):
        cfg = ExperimentConfig(model="IC", tree=UnderlyingTreeSpec(kind="regular", d=4),
                               p=0.4, stop=StopCondition(max_steps=12), trials=30,
                               master_seed=17, observation="per_step", tail_window=5,
                               engine="condensed")
        report = run(cfg)
        assert 0 < report.dead_runs < 30
        assert report.truncated_runs == 0

    def test_node_cap_flags_truncation(self):
        cfg = ExperimentConfig(model="DSI", tree=UnderlyingTreeSpec(kind="regular", d=4),
                               p=0.9, stop=StopCondition(max_steps=30), trials=1,
                               master_seed=3, observation="per_step", tail_window=0,
                               engine="arena", node_cap=200)
        report = run(cfg)
        assert report.truncated_runs == 1


class TestTrialSeeding:
    def test_trials_use_independent_streams(self):
        cfg = tiny_csi_config(trials=3)
        t0 = run_trial(cfg, 0)["jordan"]
        t1 = run_trial(cfg, 1)["jordan"]
        assert t0.seed != t1.seed
        k0 = [(s.centers, s.n_nodes) for s in t0.snapshots]
        k1 = [(s.centers, s.n_nodes) for s in t1.snapshots]
        assert k0 != k1

    def test_rerun_single_trial_identical(self):
        cfg = tiny_csi_config()
        a = run_trial(cfg, 2)["jordan"]
        b = run_trial(cfg, 2)["jordan"]
        assert [(s.centers, s.psi, s.time) for s in a.snapshots] == \
            [(s.centers, s.psi, s.time) for s in b.snapshots]


class TestVerifySuite:
    def test_small_matrix_passes(self):
        summary = verify_suite(seeds=3)
        assert summary.passed, summary.failures[:5]
        assert summary.checks == 3 * 10
        assert summary.oracle_observations > 0

    def test_fault_injection_reports_clause(self):
        summary = verify_suite(inject_fault=True)
        assert not summary.passed
        clauses = {f["clause"] for f in summary.failures}
        assert "movement-iff" in clauses
        assert all(f.get("fault_injected") for f in summary.failures)


class TestRenderCsv:
    def test_header_and_rows(self):
        body = render_trace_csv("jordan", [(0, 0, "0.0", 0, 1, 0, 0, -1, -1, 1, 0)])
        lines = body.splitlines()
        assert lines[0].startswith("trial,obs_index,model_time")
        assert lines[1] == "0,0,0.0,0,1,0,0,-1,-1,1,0"

"""Experiment orchestration: seeded trial matrices, invariant sweeps,
aggregation, and deterministic CSV/JSON emission.

Re-running any configuration with the same master seed reproduces the trace
CSV bodies byte for byte; only the leading '#' comment line carries a
timestamp.
"""

from __future__ import annotations

import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .condensed import SkeletonOverflow, run_condensed_ic_trial
from .growth import (
    CSI,
    DSI,
    IC,
    MODELS,
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
    trial_seed,
)
from .tracking import (
    BALANCEDNESS,
    JORDAN,
    PersistenceReport,
    TrialTrace,
    persistence_report,
    track_multi,
    verify_ic_specifics,
)

PER_STEP = "per_step"
PER_NODE = "per_node"

SKELETON_LADDER = (10, 14, 18, 22, 26)

JORDAN_CSV_COLUMNS = ("trial", "obs_index", "model_time", "center_canonical",
                      "center_count", "psi", "dist_to_root", "deepest_depth",
                      "second_deepest_depth", "n_nodes", "changed_flag")
BALANCEDNESS_CSV_COLUMNS = ("trial", "obs_index", "model_time", "center_canonical",
                            "center_count", "score", "dist_to_root", "n_nodes",
                            "changed_flag")


@dataclass
class ExperimentConfig:
    model: str = IC
    tree: UnderlyingTreeSpec = field(default_factory=UnderlyingTreeSpec)
    p: float = 0.4
    stop: StopCondition = field(default_factory=lambda: StopCondition(max_steps=40))
    trials: int = 100
    master_seed: int = 1
    observation: str = PER_STEP
    tail_window: int = 10
    center_kinds: tuple[str, ...] = (JORDAN,)
    verify: bool = False
    engine: str = "auto"
    node_cap: int = 10_000_000
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.model in (IC, DSI) and not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.observation not in (PER_STEP, PER_NODE):
            raise ValueError(f"unknown observation policy {self.observation!r}")
        if self.model in (IC, DSI) and self.observation == PER_NODE:
            raise ValueError("discrete models observe per step")
        if self.model in (CSI, PA) and self.observation == PER_STEP:
            raise ValueError(f"{self.model} observes per node addition")
        for kind in self.center_kinds:
            if kind not in (JORDAN, BALANCEDNESS):
                raise ValueError(f"unknown center kind {kind!r}")
        if not self.center_kinds:
            raise ValueError("at least one center kind required")
        if self.engine not in ("auto", "arena", "condensed"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.engine == "condensed" and self.model != IC:
            raise ValueError("condensed engine only supports the IC model")
        if self.tail_window < 0:
            raise ValueError("tail_window must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        s = self.stop
        if self.model in (IC, DSI) and s.max_steps is None and s.max_nodes is None:
            raise ValueError("discrete models need max_steps or max_nodes")
        if self.model in (CSI, PA) and s.max_nodes is None and s.max_time is None:
            raise ValueError(f"{self.model} needs max_nodes or max_time")

    def resolved_engine(self) -> str:
        if self.engine != "auto":
            return self.engine
        if (self.model == IC and self.stop.max_steps is not None
                and self.stop.max_nodes is None):
            return "condensed"
        return "arena"

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "tree": {"kind": self.tree.kind, "d": self.tree.d,
                     "degree_choices": list(self.tree.degree_choices)},
            "p": self.p,
            "stop": {"max_steps": self.stop.max_steps,
                     "max_nodes": self.stop.max_nodes,
                     "max_depth": self.stop.max_depth,
                     "max_time": self.stop.max_time,
                     "max_events": self.stop.max_events},
            "trials": self.trials,
            "master_seed": self.master_seed,
            "observation": self.observation,
            "tail_window": self.tail_window,
            "center_kinds": list(self.center_kinds),
            "verify": self.verify,
            "engine": self.engine,
            "node_cap": self.node_cap,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        tree = data.get("tree", {})
        stop = data.get("stop", {})
        return cls(
            model=data.get("model", IC),
            tree=UnderlyingTreeSpec(
                kind=tree.get("kind", "regular"), d=tree.get("d", 4),
                degree_choices=tuple(tree.get("degree_choices") or ())),
            p=data.get("p", 0.4),
            stop=StopCondition(
                max_steps=stop.get("max_steps"), max_nodes=stop.get("max_nodes"),
                max_depth=stop.get("max_depth"), max_time=stop.get("max_time"),
                max_events=stop.get("max_events")),
            trials=data.get("trials", 100),
            master_seed=data.get("master_seed", 1),
            observation=data.get("observation", PER_STEP),
            tail_window=data.get("tail_window", 10),
            center_kinds=tuple(data.get("center_kinds", [JORDAN])),
            verify=data.get("verify", False),
            engine=data.get("engine", "auto"),
            node_cap=data.get("node_cap", 10_000_000),
            workers=data.get("workers", 1),
        )


def _arena_batches(config: ExperimentConfig, tree, state, rng, flags: dict):
    """Yield (time, events) per observation, mutating the arena as it goes."""
    stop = config.stop
    model = config.model
    if model in (IC, DSI):
        step_fn = step_ic if model == IC else step_dsi
        step = 0
        while True:
            if stop.max_steps is not None and step >= stop.max_steps:
                return
            if stop.max_nodes is not None and len(tree) >= stop.max_nodes:
                return
            if len(tree) > config.node_cap:
                flags["truncated"] = True
                return
            if model == IC and state.dead and stop.max_steps is not None:
                # dead cascades stay observable through the step horizon
                step += 1
                yield float(step), []
                continue
            if model == IC and state.dead:
                return
            events = step_fn(state, tree, rng)
            step += 1
            yield float(step), events
    elif model == CSI:
        while True:
            if stop.max_nodes is not None and len(tree) >= stop.max_nodes:
                return
            if len(tree) > config.node_cap:
                flags["truncated"] = True
                return
            one = StopCondition(max_nodes=len(tree) + 1, max_time=stop.max_time,
                                max_events=stop.max_events)
            events = run_csi(state, tree, rng, one)
            if not events:
                flags["truncated"] = flags["truncated"] or state.truncated
                return
            yield events[0].time, events
    elif model == PA:
        while True:
            if stop.max_nodes is not None and len(tree) >= stop.max_nodes:
                return
            if len(tree) > config.node_cap:
                flags["truncated"] = True
                return
            ev = step_pa(tree, rng)
            yield ev.time, [ev]


def run_trial(config: ExperimentConfig, trial_index: int) -> dict[str, TrialTrace]:
    """Run one seeded trial, returning a trace per requested center kind."""
    seed = trial_seed(config.master_seed, trial_index)
    if config.resolved_engine() == "condensed":
        last_error: SkeletonOverflow | None = None
        for levels in SKELETON_LADDER:
            try:
                traces = run_condensed_ic_trial(
                    config.tree, config.p, config.stop.max_steps, seed,
                    center_kinds=config.center_kinds, verify=config.verify,
                    skeleton_levels=levels)
                break
            except SkeletonOverflow as exc:
                last_error = exc
        else:
            raise RuntimeError(f"skeleton ladder exhausted: {last_error}")
    else:
        rng = trial_rng(config.master_seed, trial_index)
        tree = new_tree(config.tree, rng)
        state = new_state(config.model, tree, config.tree, p=config.p, rng=rng)
        flags = {"truncated": False}
        batches = _arena_batches(config, tree, state, rng, flags)
        traces = track_multi(
            tree, batches, model=config.model, center_kinds=config.center_kinds,
            seed=seed, params={"p": config.p, "model": config.model},
            verify=config.verify)
        for trace in traces.values():
            trace.truncated = flags["truncated"]
            trace.dead = config.model == IC and state.dead
    if config.verify and config.model == IC:
        jordan = traces.get(JORDAN)
        if jordan is not None:
            verdict = verify_ic_specifics(jordan)
            for f in verdict.failures:
                jordan.failures.append((-1, f))
    return traces


def _trial_job(args) -> tuple[int, dict[str, TrialTrace]]:
    config, idx = args
    return idx, run_trial(config, idx)


@dataclass
class KindAggregate:
    histogram_max_dist: dict[int, int] = field(default_factory=dict)
    histogram_changes: dict[int, int] = field(default_factory=dict)
    tail_stable_fraction_survivors: float | None = None
    tail_stable_fraction_all: float = 0.0
    median_max_dist: float = 0.0
    median_distinct_tail: float = 0.0
    mean_changes: float = 0.0

    def to_dict(self) -> dict:
        return {
            "histogram_max_dist": {str(k): v for k, v in sorted(self.histogram_max_dist.items())},
            "histogram_changes": {str(k): v for k, v in sorted(self.histogram_changes.items())},
            "tail_stable_fraction_survivors": self.tail_stable_fraction_survivors,
            "tail_stable_fraction_all": self.tail_stable_fraction_all,
            "median_max_dist": self.median_max_dist,
            "median_distinct_tail": self.median_distinct_tail,
            "mean_changes": self.mean_changes,
        }


@dataclass
class AggregateReport:
    config: ExperimentConfig
    trials: int
    dead_runs: int
    truncated_runs: int
    verdict_failures: int
    failure_manifest: list[dict]
    reports: dict[str, list[PersistenceReport]]
    per_kind: dict[str, KindAggregate]
    csv_bodies: dict[str, str]
    revisit_count: int = 0

    def summary_dict(self) -> dict:
        return {
            "tool": "jordantrack",
            "version": __version__,
            "config": self.config.to_dict(),
            "trials": self.trials,
            "dead_runs": self.dead_runs,
            "truncated_runs": self.truncated_runs,
            "verdict_failures": self.verdict_failures,
            "failure_manifest": self.failure_manifest,
            "revisit_count": self.revisit_count,
            "per_kind": {k: v.to_dict() for k, v in self.per_kind.items()},
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary_dict(), indent=2, sort_keys=True)


def _fmt_time(t: float) -> str:
    return repr(float(t))


def render_trace_csv(kind: str, rows: list[tuple]) -> str:
    columns = JORDAN_CSV_COLUMNS if kind == JORDAN else BALANCEDNESS_CSV_COLUMNS
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(str(x) for x in row))
    return "\n".join(lines) + "\n"


def _trace_rows(kind: str, trial: int, trace: TrialTrace) -> list[tuple]:
    rows = []
    for s in trace.snapshots:
        if kind == JORDAN:
            rows.append((trial, s.observation_index, _fmt_time(s.time), s.canonical,
                         s.center_count, s.psi, s.dist_to_root, s.deepest_depth,
                         s.second_deepest_depth, s.n_nodes, int(s.moved)))
        else:
            rows.append((trial, s.observation_index, _fmt_time(s.time), s.canonical,
                         s.center_count, s.score, s.dist_to_root, s.n_nodes,
                         int(s.moved)))
    return rows


def run(config: ExperimentConfig, output_dir: str | Path | None = None) -> AggregateReport:
    """Execute every trial, aggregate order-independently, and optionally
    write trace CSVs plus a summary JSON."""
    indexed: dict[int, dict[str, TrialTrace]] = {}
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for idx, traces in pool.map(_trial_job,
                                        ((config, i) for i in range(config.trials))):
                indexed[idx] = traces
    else:
        for i in range(config.trials):
            indexed[i] = run_trial(config, i)

    dead = truncated = 0
    failures: list[dict] = []
    revisits = 0
    rows: dict[str, list[tuple]] = {k: [] for k in config.center_kinds}
    reports: dict[str, list[PersistenceReport]] = {k: [] for k in config.center_kinds}
    per_trial_flags: list[tuple[bool, bool]] = []
    for i in sorted(indexed):
        traces = indexed[i]
        first = traces[config.center_kinds[0]]
        dead += first.dead
        truncated += first.truncated
        per_trial_flags.append((first.dead, first.truncated))
        for kind in config.center_kinds:
            trace = traces[kind]
            rows[kind].extend(_trace_rows(kind, i, trace))
            tail = min(config.tail_window, len(trace.snapshots))
            reports[kind].append(persistence_report(trace, tail))
            for obs, clause in trace.failures:
                failures.append({"trial": i, "obs_index": obs, "clause": clause,
                                 "kind": kind})
        jr = reports[JORDAN][-1] if JORDAN in reports else None
        if jr is not None and jr.revisit_detected:
            revisits += 1

    per_kind: dict[str, KindAggregate] = {}
    for kind in config.center_kinds:
        agg = KindAggregate()
        reps = reports[kind]
        for r in reps:
            agg.histogram_max_dist[r.max_dist_to_root] = \
                agg.histogram_max_dist.get(r.max_dist_to_root, 0) + 1
            agg.histogram_changes[r.movement_count] = \
                agg.histogram_changes.get(r.movement_count, 0) + 1
        agg.tail_stable_fraction_all = sum(r.stable_in_tail for r in reps) / len(reps)
        survivors = [r for r, (d, t) in zip(reps, per_trial_flags) if not d and not t]
        if survivors:
            agg.tail_stable_fraction_survivors = \
                sum(r.stable_in_tail for r in survivors) / len(survivors)
        agg.median_max_dist = float(statistics.median(r.max_dist_to_root for r in reps))
        agg.median_distinct_tail = float(statistics.median(r.distinct_centers_tail for r in reps))
        agg.mean_changes = sum(r.movement_count for r in reps) / len(reps)
        per_kind[kind] = agg

    csv_bodies = {k: render_trace_csv(k, rows[k]) for k in config.center_kinds}
    report = AggregateReport(
        config=config, trials=config.trials, dead_runs=dead,
        truncated_runs=truncated, verdict_failures=len(failures),
        failure_manifest=failures, reports=reports, per_kind=per_kind,
        csv_bodies=csv_bodies, revisit_count=revisits)
    if output_dir is not None:
        write_outputs(report, output_dir)
    return report


def write_outputs(report: AggregateReport, output_dir: str | Path) -> list[Path]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat()
    paths = []
    for kind, body in report.csv_bodies.items():
        path = out / f"trace_{kind}.csv"
        path.write_text(f"# generated_at={stamp}\n" + body)
        paths.append(path)
    summary = out / "summary.json"
    summary.write_text(report.summary_json() + "\n")
    paths.append(summary)
    return paths


# ----------------------------------------------------------------------
# presets reproducing the published experiment protocols

def _preset_configs() -> dict[str, ExperimentConfig]:
    return {
        "ic_fig": ExperimentConfig(
            model=IC, tree=UnderlyingTreeSpec(kind="regular", d=4), p=0.4,
            stop=StopCondition(max_steps=40), trials=100, master_seed=982451653,
            observation=PER_STEP, tail_window=10),
        "ic_irregular_fig": ExperimentConfig(
            model=IC,
            tree=UnderlyingTreeSpec(kind="irregular", degree_choices=(3, 4)),
            p=0.4, stop=StopCondition(max_steps=40), trials=100,
            master_seed=982451653, observation=PER_STEP, tail_window=10),
        "csi_fig": ExperimentConfig(
            model=CSI, tree=UnderlyingTreeSpec(kind="regular", d=4), p=0.0,
            stop=StopCondition(max_nodes=100), trials=100, master_seed=741101,
            observation=PER_NODE, tail_window=30),
        "pa_fig": ExperimentConfig(
            model=PA, tree=UnderlyingTreeSpec(kind="none"), p=0.0,
            stop=StopCondition(max_nodes=100), trials=100, master_seed=271828,
            observation=PER_NODE, tail_window=30),
        "balancedness_fig": ExperimentConfig(
            model=IC, tree=UnderlyingTreeSpec(kind="regular", d=4), p=0.4,
            stop=StopCondition(max_steps=40), trials=100, master_seed=982451653,
            observation=PER_STEP, tail_window=10,
            center_kinds=(JORDAN, BALANCEDNESS)),
    }


PRESET_NAMES = tuple(sorted(_preset_configs()))


def preset(name: str) -> ExperimentConfig:
    """Documented parameterization of one published experiment."""
    configs = _preset_configs()
    if name not in configs:
        raise ValueError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")
    return configs[name]


# ----------------------------------------------------------------------
# invariant suite

@dataclass
class VerifySummary:
    checks: int
    oracle_observations: int
    failures: list[dict]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"checks": self.checks,
                "oracle_observations": self.oracle_observations,
                "failures": self.failures, "passed": self.passed}


def _matrix_configs() -> list[ExperimentConfig]:
    configs = []
    for d in (2, 3):
        for p in (0.3, 0.6):
            configs.append(ExperimentConfig(
                model=IC, tree=UnderlyingTreeSpec(kind="regular", d=d), p=p,
                stop=StopCondition(max_steps=10, max_nodes=150), trials=1,
                observation=PER_STEP, tail_window=0, verify=True, engine="arena"))
    for p in (0.3, 0.5):
        configs.append(ExperimentConfig(
            model=DSI, tree=UnderlyingTreeSpec(kind="regular", d=2), p=p,
            stop=StopCondition(max_steps=8, max_nodes=150), trials=1,
            observation=PER_STEP, tail_window=0, verify=True, engine="arena"))
    for d in (2, 3):
        configs.append(ExperimentConfig(
            model=CSI, tree=UnderlyingTreeSpec(kind="regular", d=d), p=0.0,
            stop=StopCondition(max_nodes=80), trials=1,
            observation=PER_NODE, tail_window=0, verify=True, engine="arena"))
    configs.append(ExperimentConfig(
        model=PA, tree=UnderlyingTreeSpec(kind="none"), p=0.0,
        stop=StopCondition(max_nodes=80), trials=1,
        observation=PER_NODE, tail_window=0, verify=True, engine="arena"))
    configs.append(ExperimentConfig(
        model=IC, tree=UnderlyingTreeSpec(kind="irregular", degree_choices=(3, 4)),
        p=0.35, stop=StopCondition(max_steps=8, max_nodes=200), trials=1,
        observation=PER_STEP, tail_window=0, verify=True, engine="arena"))
    return configs


def verify_suite(seeds: int = 50, inject_fault: bool = False) -> VerifySummary:
    """Run the invariant matrix: every model on a small parameter grid, with
    inline movement verdicts and an exact-oracle replay at every observation.

    With inject_fault=True the tracker is forced to skip one movement in a
    cascade fixture; the suite must then report the violated clause, which is
    how the suite itself is validated end to end.
    """
    failures: list[dict] = []
    checks = 0
    oracle_obs = 0
    if inject_fault:
        spec = UnderlyingTreeSpec(kind="regular", d=2)
        for s in range(20):
            rng = trial_rng(20240811, s)
            tree = new_tree(spec, rng)
            state = new_state(IC, tree, spec, p=0.6, rng=rng)
            flags = {"truncated": False}
            cfg = ExperimentConfig(model=IC, tree=spec, p=0.6,
                                   stop=StopCondition(max_steps=12), trials=1,
                                   observation=PER_STEP, tail_window=0,
                                   engine="arena")
            batches = _arena_batches(cfg, tree, state, rng, flags)
            traces = track_multi(tree, batches, model=IC, seed=s, verify=True,
                                 oracle_check=True,
                                 fault_suppress_first_movement=True)
            checks += 1
            for obs, clause in traces[JORDAN].failures:
                failures.append({"model": IC, "seed": s, "obs_index": obs,
                                 "clause": clause, "fault_injected": True})
        return VerifySummary(checks=checks, oracle_observations=0, failures=failures)

    for cfg in _matrix_configs():
        for s in range(seeds):
            rng = trial_rng(cfg.master_seed, s)
            tree = new_tree(cfg.tree, rng)
            state = new_state(cfg.model, tree, cfg.tree, p=cfg.p, rng=rng)
            flags = {"truncated": False}
            batches = _arena_batches(cfg, tree, state, rng, flags)
            traces = track_multi(tree, batches, model=cfg.model, seed=s,
                                 verify=True, oracle_check=True)
            trace = traces[JORDAN]
            if cfg.model == IC:
                verdict = verify_ic_specifics(trace)
                for f in verdict.failures:
                    trace.failures.append((-1, f))
            checks += 1
            oracle_obs += len(trace.snapshots)
            for obs, clause in trace.failures:
                failures.append({"model": cfg.model, "d": cfg.tree.d,
                                 "p": cfg.p, "seed": s, "obs_index": obs,
                                 "clause": clause})
    return VerifySummary(checks=checks, oracle_observations=oracle_obs,
                         failures=failures)

"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from .growth import StopCondition, UnderlyingTreeSpec
from .harness import ExperimentConfig


class TreeSpecModel(BaseModel):
    kind: str = "regular"
    d: int = 4
    degree_choices: list[int] = Field(default_factory=list)

    def to_spec(self) -> UnderlyingTreeSpec:
        return UnderlyingTreeSpec(kind=self.kind, d=self.d,
                                  degree_choices=tuple(self.degree_choices))


class StopModel(BaseModel):
    max_steps: int | None = None
    max_nodes: int | None = None
    max_depth: int | None = None
    max_time: float | None = None
    max_events: int | None = None

    def to_stop(self) -> StopCondition:
        return StopCondition(max_steps=self.max_steps, max_nodes=self.max_nodes,
                             max_depth=self.max_depth, max_time=self.max_time,
                             max_events=self.max_events)


class ExperimentRequest(BaseModel):
    model: str = "IC"
    tree: TreeSpecModel = Field(default_factory=TreeSpecModel)
    p: float = 0.4
    stop: StopModel = Field(default_factory=lambda: StopModel(max_steps=40))
    trials: int = 100
    master_seed: int = 1
    observation: str = "per_step"
    tail_window: int = 10
    center_kinds: list[str] = Field(default_factory=lambda: ["jordan"])
    verify: bool = False
    engine: str = "auto"
    node_cap: int = 10_000_000
    workers: int = 1

    def to_config(self) -> ExperimentConfig:
        return ExperimentConfig(
            model=self.model, tree=self.tree.to_spec(), p=self.p,
            stop=self.stop.to_stop(), trials=self.trials,
            master_seed=self.master_seed, observation=self.observation,
            tail_window=self.tail_window, center_kinds=tuple(self.center_kinds),
            verify=self.verify, engine=self.engine, node_cap=self.node_cap,
            workers=self.workers)

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "ExperimentRequest":
        return cls.model_validate(config.to_dict())


class ExperimentResponse(BaseModel):
    summary: dict
    csv: dict[str, str]


class PresetListResponse(BaseModel):
    presets: list[str]


class VerifyRequest(BaseModel):
    seeds: int = 50
    inject_fault: bool = False


class VerifyFailure(BaseModel):
    clause: str
    obs_index: int | None = None
    model: str | None = None
    seed: int | None = None
    trial: int | None = None
    d: int | None = None
    p: float | None = None
    kind: str | None = None
    fault_injected: bool = False


class VerifyResponse(BaseModel):
    passed: bool
    checks: int
    oracle_observations: int
    failures: list[VerifyFailure]


class ExtinctionResponse(BaseModel):
    p: float
    d: int
    extinction_probability: float
    survival_probability: float
    fixed_point_residual: float


class GammaResponse(BaseModel):
    d: int
    gamma: float
    mu_at_gamma: float


class WindowsRequest(BaseModel):
    d: int = 4
    gamma: float | None = None  # solved from d when omitted
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 0.0
    delta: float = 1.0
    n: int = 100
    x: float = 0.0


class WindowsResponse(BaseModel):
    gamma: float
    n: int
    x: float
    lower_tail_threshold: float
    upper_tail_threshold: float


class FrontSpeedRequest(BaseModel):
    d: int = 4
    n_lo: int = 10
    n_hi: int = 30
    trials: int = 20
    master_seed: int = 0


class FrontSpeedResponse(BaseModel):
    slope: float
    intercept: float
    gamma_reference: float
    slope_over_gamma: float
    n_lo: int
    n_hi: int
    trials: int
    truncated: bool
    mean_first_passage: dict[str, float]


class HealthResponse(BaseModel):
    status: str
    version: str

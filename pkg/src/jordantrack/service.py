"""HTTP service exposing the simulator, trackers, and branching analytics.

The service is stateless: experiment runs execute synchronously and return
the aggregate summary plus the rendered trace CSV bodies; clients own file
persistence. The CLI is a thin client of this app (in process by default).
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__
from .branching import (
    BranchingSpec,
    FirstPassageSpec,
    estimate_front_speed,
    first_passage_windows,
    gw_extinction_prob,
    mu,
    time_constant_gamma,
)
from .harness import PRESET_NAMES, preset, run, verify_suite
from .schemas import (
    ExperimentRequest,
    ExperimentResponse,
    ExtinctionResponse,
    FrontSpeedRequest,
    FrontSpeedResponse,
    GammaResponse,
    HealthResponse,
    PresetListResponse,
    VerifyFailure,
    VerifyRequest,
    VerifyResponse,
    WindowsRequest,
    WindowsResponse,
)

app = FastAPI(title="jordantrack", version=__version__)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.get("/presets", response_model=PresetListResponse)
def list_presets() -> PresetListResponse:
    return PresetListResponse(presets=list(PRESET_NAMES))


@app.get("/presets/{name}", response_model=ExperimentRequest)
def get_preset(name: str) -> ExperimentRequest:
    try:
        config = preset(name)
    except ValueError as exc:
        raise HTTPException(status_code=404, detail=str(exc))
    return ExperimentRequest.from_config(config)


@app.post("/experiments/run", response_model=ExperimentResponse)
def run_experiment(request: ExperimentRequest) -> ExperimentResponse:
    try:
        config = request.to_config()
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    report = run(config)
    return ExperimentResponse(summary=report.summary_dict(), csv=report.csv_bodies)


@app.post("/verify", response_model=VerifyResponse)
def run_verify(request: VerifyRequest) -> VerifyResponse:
    summary = verify_suite(seeds=request.seeds, inject_fault=request.inject_fault)
    return VerifyResponse(
        passed=summary.passed, checks=summary.checks,
        oracle_observations=summary.oracle_observations,
        failures=[VerifyFailure(**f) for f in summary.failures])


@app.get("/analysis/extinction", response_model=ExtinctionResponse)
def extinction(p: float, d: int) -> ExtinctionResponse:
    try:
        spec = BranchingSpec(p=p, d=d)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    q = gw_extinction_prob(spec)
    return ExtinctionResponse(
        p=p, d=d, extinction_probability=q, survival_probability=1.0 - q,
        fixed_point_residual=abs(spec.pgf(q) - q))


@app.get("/analysis/gamma", response_model=GammaResponse)
def gamma(d: int) -> GammaResponse:
    try:
        g = time_constant_gamma(d)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return GammaResponse(d=d, gamma=g, mu_at_gamma=mu(g, d))


@app.post("/analysis/windows", response_model=WindowsResponse)
def windows(request: WindowsRequest) -> WindowsResponse:
    try:
        g = request.gamma if request.gamma is not None else time_constant_gamma(request.d)
        spec = FirstPassageSpec(d=request.d, gamma=g, c1=request.c1,
                                c2=request.c2, c3=request.c3, delta=request.delta)
        t1, t2 = first_passage_windows(spec, request.n, request.x)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return WindowsResponse(gamma=g, n=request.n, x=request.x,
                           lower_tail_threshold=t1, upper_tail_threshold=t2)


@app.post("/analysis/front-speed", response_model=FrontSpeedResponse)
def front_speed(request: FrontSpeedRequest) -> FrontSpeedResponse:
    try:
        result = estimate_front_speed(
            request.d, (request.n_lo, request.n_hi), request.trials,
            master_seed=request.master_seed)
        g = time_constant_gamma(request.d)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    means = {
        str(request.n_lo + i): sum(times) / len(times)
        for i, times in enumerate(result.samples) if times
    }
    return FrontSpeedResponse(
        slope=result.slope, intercept=result.intercept, gamma_reference=g,
        slope_over_gamma=result.slope / g, n_lo=request.n_lo, n_hi=request.n_hi,
        trials=request.trials, truncated=result.truncated,
        mean_first_passage=means)

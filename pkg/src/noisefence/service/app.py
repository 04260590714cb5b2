"""HTTP front end wrapping the core package; every endpoint is stateless and
deterministic given the seeds in the request."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import analytic, verify
from ..attack import AttackConfig
from ..classifier import Dataset, Model, accuracy, gen_blobs, output_stats
from ..core import DomainError, RngStream, derive_stream
from ..estimator import EstimatorConfig
from ..grid import ExperimentConfig, ModelSpec, build_model, make_data, run_grid
from ..oracle import NoiseSpec
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    AnalyzeRow,
    GridRequest,
    GridResponse,
    GridRow,
    TrainRequest,
    TrainResponse,
    VerifyRequest,
    VerifyResponse,
)

app = FastAPI(title="noisefence", version="0.1.0")


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/analyze", response_model=AnalyzeResponse)
def analyze(req: AnalyzeRequest) -> AnalyzeResponse:
    try:
        rows = analytic.analysis_rows(
            req.sigmas,
            beta=req.beta,
            mean_dft=req.mean_dft,
            mean_ft=req.mean_ft,
            a_lambda=req.a * req.lam,
            eta_over_v0=req.eta / req.v0,
            epsilon=req.epsilon,
            repeat_a=req.repeat_a,
            repeat_epsilon=req.repeat_epsilon,
        )
    except DomainError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return AnalyzeResponse(rows=[AnalyzeRow(**row) for row in rows])


@app.post("/train", response_model=TrainResponse)
def train_model(req: TrainRequest) -> TrainResponse:
    spec = ModelSpec(**req.model_spec.model_dump())
    master = RngStream(req.seed)
    try:
        model, data = build_model(spec, master)
    except DomainError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    _train_set, holdout = make_data(spec, master)
    stats = output_stats(model, data, req.stats_beta, req.stats_trials, derive_stream(master, "stats"))
    return TrainResponse(
        model_doc=model.to_document(),
        acc_train=accuracy(model, data),
        acc_holdout=accuracy(model, holdout),
        stats={
            "acc": stats.acc,
            "mean_ft": stats.mean_ft,
            "mean_dft": stats.mean_dft,
            "median_dft": stats.median_dft,
            "std_dft": stats.std_dft,
            "beta": stats.beta,
        },
    )


@app.post("/grid", response_model=GridResponse)
def grid(req: GridRequest) -> GridResponse:
    try:
        config = ExperimentConfig(
            model=ModelSpec(**req.model_spec.model_dump()),
            attacks=[
                (
                    a.name,
                    AttackConfig(
                        kind=a.kind,
                        targeted=a.targeted,
                        learning_rate=a.learning_rate,
                        qc_limit=a.qc_limit,
                        max_distortion=a.max_distortion,
                        estimator=EstimatorConfig(**a.estimator.model_dump()),
                        hard_proxy_r=a.hard_proxy_r,
                        hard_proxy_spread=a.hard_proxy_spread,
                        repeat_n=a.repeat_n,
                    ),
                )
                for a in req.attacks
            ],
            noises=[
                (n.name, NoiseSpec(**n.model_dump(exclude={"name"}))) for n in req.noises
            ],
            seeds=req.seeds,
            parallelism=req.parallelism,
        )
        result = run_grid(config, req.master_seed)
    except DomainError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return GridResponse(
        rows=[GridRow(**row) for row in result["rows"]],
        records=result["records"],
        errors=result["errors"],
    )


@app.post("/verify", response_model=VerifyResponse)
def run_verification(req: VerifyRequest) -> VerifyResponse:
    try:
        reports = verify.run_suite(req.seed, req.suites)
    except DomainError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return VerifyResponse(
        reports=[r.to_dict() for r in reports],
        all_passed=all(r.passed for r in reports),
    )

"""Request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class AnalyzeRequest(BaseModel):
    sigmas: list[float]
    beta: float = 1e-3
    mean_dft: float
    mean_ft: float
    eta: float = 0.01
    epsilon: float = 0.01
    a: float = 0.1
    lam: float = 2.0
    v0: float = 1.0
    repeat_a: float = 1.0
    repeat_epsilon: float = 0.3


class AnalyzeRow(BaseModel):
    sigma: float
    sigma_z_sq: float
    snr_exact: float
    snr_db: float
    qc_ratio: float
    repeat_n: int | str


class AnalyzeResponse(BaseModel):
    rows: list[AnalyzeRow]


class ModelSpecIn(BaseModel):
    path: str | None = None
    kind: str = "mlp"
    dim: int = 32
    n_classes: int = 10
    hidden: int = 64
    n_per_class: int = 40
    spread: float = 0.15
    train_lr: float = 0.5
    train_epochs: int = 300


class TrainRequest(BaseModel):
    model_spec: ModelSpecIn = Field(default_factory=ModelSpecIn)
    seed: int = 0
    stats_beta: float = 1e-3
    stats_trials: int = 2000


class TrainResponse(BaseModel):
    model_doc: dict
    acc_train: float
    acc_holdout: float
    stats: dict


class EstimatorIn(BaseModel):
    beta: float = 1e-3
    queries_per_iter: int = 50


class AttackIn(BaseModel):
    name: str
    kind: str = "nes"
    targeted: bool = True
    learning_rate: float = 0.01
    qc_limit: int = 20000
    max_distortion: float | None = None
    estimator: EstimatorIn = Field(default_factory=EstimatorIn)
    hard_proxy_r: int = 20
    hard_proxy_spread: float = 0.05
    repeat_n: int = 1


class NoiseIn(BaseModel):
    name: str
    kind: str = "none"
    sigma: float = 0.0
    q_bits: int = 8
    alpha: float = 0.0
    eps_sigma: float = 1e-8
    preserve_top1: bool = False
    label_mode: str = "soft"


class GridRequest(BaseModel):
    model_spec: ModelSpecIn = Field(default_factory=ModelSpecIn)
    attacks: list[AttackIn]
    noises: list[NoiseIn]
    seeds: list[int]
    parallelism: int = 1
    master_seed: int = 0


class GridRow(BaseModel):
    attack: str
    noise: str
    asr: float
    mean_qc_success: float
    mean_l2_success: float
    n_seeds: int


class GridResponse(BaseModel):
    rows: list[GridRow]
    records: list[dict]
    errors: list[dict]


class VerifyRequest(BaseModel):
    suites: list[str] = Field(default_factory=lambda: ["all"])
    seed: int = 0


class VerifyResponse(BaseModel):
    reports: list[dict]
    all_passed: bool

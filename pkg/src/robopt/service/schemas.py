"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import BaseModel, Field


class NoiseSpecModel(BaseModel):
    kind: Literal["none", "gaussian", "student-t", "truncated-gaussian"] = "none"
    sigma2: float = 1.0
    nu: float = 3.0
    bound: float = 1.0


class CovSpecModel(BaseModel):
    kind: Literal["identity", "diagonal", "rank-m", "uniform-box"] = "identity"
    values: Optional[List[float]] = None
    m: Optional[int] = None
    half_width: Optional[float] = None


class SynthRequest(BaseModel):
    model: Literal["linear", "glm-logistic", "separable"]
    n: int = Field(ge=1)
    p: int = Field(ge=1)
    seed: int = 0
    theta_star: Optional[List[float]] = None  # defaults to all-ones where needed
    cov: CovSpecModel = CovSpecModel()
    noise: NoiseSpecModel = NoiseSpecModel(kind="student-t", nu=3.0)
    a: Optional[float] = None  # covariate box half-width for the logistic model


class SynthResponse(BaseModel):
    csv: str
    sidecar: dict


class PrivacyRequest(BaseModel):
    variant: Literal["accelerated", "classic", "sgd", "chunked-gd"]
    L2: float = Field(gt=0)
    n: int = Field(ge=1)
    T: int = Field(ge=1)
    epsilon: float = Field(gt=0)
    delta: float = Field(gt=0, lt=1)


class PrivacyResponse(BaseModel):
    sigma2: float
    eps_step: Optional[float]
    delta_step: Optional[float]
    eps_small: bool
    adv_ok: bool
    sensitivity: float


class DatasetPayload(BaseModel):
    X: List[List[float]]
    y: List[float]
    theta_star: Optional[List[float]] = None
    model_tag: str = "unknown"
    seed: int = 0


class LossModelSpec(BaseModel):
    family: Literal["squared", "ridge", "glm-logistic", "pseudo-huber"]
    gamma: float = 0.0
    q: float = 0.0
    L_x: Optional[float] = None
    K_y: Optional[float] = None


class ConstraintModel(BaseModel):
    kind: Literal["l2-ball", "all-space"] = "all-space"
    radius: Optional[float] = None


class GradSourceModel(BaseModel):
    kind: Literal["exact-mean", "noised-mean", "gmom"] = "exact-mean"
    epsilon: Optional[float] = None
    delta: Optional[float] = None
    L2: Optional[float] = None
    sigma2: Optional[float] = None
    zeta: Optional[float] = None
    split_zeta: bool = True
    chunked: bool = True


class RunConfigModel(BaseModel):
    algorithm: str
    T: Optional[int] = None  # dp-sgd derives T = n^2
    theta0: Optional[List[float]] = None
    theta1: Optional[List[float]] = None
    eta: Optional[float] = None
    lam: Optional[float] = None
    r: float = 0.0
    tau_u: Optional[float] = None
    tau_l: Optional[float] = None
    seed: int = 0
    epsilon: Optional[float] = None  # dp-sgd budget
    delta: Optional[float] = None
    max_n: int = 400


class RunRequest(BaseModel):
    dataset: DatasetPayload
    model: LossModelSpec
    constraint: ConstraintModel = ConstraintModel()
    config: RunConfigModel
    source: GradSourceModel = GradSourceModel()
    reference_value: Optional[float] = None


class RunResponse(BaseModel):
    csv: str
    algorithm: str
    T: int
    final_loss: float
    final_excess_loss: Optional[float]
    final_l2_error: Optional[float]
    noise_sigma2: Optional[float]
    noise_draws: int


class ScenarioSummary(BaseModel):
    id: str
    description: str
    n_grid: List[int]
    p: int
    epsilons: List[float]
    delta: Optional[float]
    zeta: Optional[float]
    algorithms: List[str]
    seeds: List[int]
    default_scale: float


class ScenarioRunRequest(BaseModel):
    id: str
    scale: Optional[float] = None
    seeds: Optional[List[int]] = None
    parallel_width: int = Field(default=1, ge=1)


class ScenarioRunResponse(BaseModel):
    csv: str
    rows: int
    meta: dict = {}

"""Pydantic request/response models for the HTTP service."""

from pydantic import BaseModel, Field


class ModelSpec(BaseModel):
    """Wire form of a constrained model: {"k", "Q", "features", "alpha"}."""

    k: int
    Q: list[float]
    features: list[list[float]] = Field(default_factory=list)
    alpha: list[float] = Field(default_factory=list)


class ProjectRequest(BaseModel):
    model: ModelSpec
    tol: float = 1e-10
    max_iter: int = 200


class ProjectionResponse(BaseModel):
    lambda_star: list[float]
    p_star: list[float]
    log_Z: float
    dual_value: float
    iterations: int
    kkt_residual: float


class CurvatureRequest(BaseModel):
    model: ModelSpec
    plan_m: int | None = None
    plan_epsilon: float | None = None


class CurvatureResponse(BaseModel):
    """Non-finite reals (degenerate models) cross the wire as null."""

    tangent_dim: int
    degenerate: bool
    spectrum: list[float]
    lambda_min: float | None
    trace_H: float
    trace_Hinv: float
    det_H: float
    lower_bound_traceinv: float | None
    compression_low: float
    compression_high: float
    plan_n: int | None = None


class CollapseRequest(BaseModel):
    model: ModelSpec
    n: int
    m: int
    tau: float | None = None
    C_geo: float = 1.0
    C_geo_prime: float = 1.0


class CollapseResponse(BaseModel):
    """One sweep cell; columns match the sweep CSV. Non-finite reals are null."""

    n: int
    m: int
    tau: float
    lambda_min: float | None
    tv_exact: float
    tv_gaussian: float
    bound: float
    mass_out: float
    rho_ratio: float | None


class BetelRequest(BaseModel):
    model: ModelSpec
    theta_grid: list[float] | list[list[float]]
    alphas: list[list[float]] | None = None
    data: list[int]
    variant: str = "canonical"
    prior: list[float] | None = None


class BetelResponse(BaseModel):
    """Grid posterior; log entries with zero mass cross the wire as null."""

    theta_grid: list[list[float]]
    log_posterior: list[float | None]
    posterior: list[float]
    variant: str
    n: int
    map_index: int


class GmmRequest(BaseModel):
    model: ModelSpec
    data: list[int]
    tangent_kind: str = "simplex_tangent"


class GmmResponse(BaseModel):
    W_opt: list[list[float]]
    pushforward: list[list[float]]
    tangent_kind: str
    objective: float


class ClusterSpec(BaseModel):
    D: list[list[float]]
    W: list[list[float]]
    Sigma: list[list[float]]


class GeeRequest(BaseModel):
    clusters: list[ClusterSpec]
    n: int | None = None


class GeeResponse(BaseModel):
    J: list[list[float]]
    K: list[list[float]]
    sandwich: list[list[float]]
    lambda_min_J: float
    rate_proxy: float | None = None


class SweepRequest(BaseModel):
    model: ModelSpec
    n_grid: list[int]
    m_grid: list[int]
    tau_policy: str | float = "auto"
    constants: str | tuple[float, float] = "fit_at_smallest_n"
    seeds: list[int] = Field(default_factory=list)
    threads: int | None = None


class SweepResponse(BaseModel):
    csv: str
    summary: dict
    exit_code: int
    skipped: list[dict]

"""Request handlers shared by the HTTP routes and the in-process CLI backend."""

import math

import numpy as np

from ..betel import betel_posterior, build_family
from ..curvature import curvature_report, sample_size_plan
from ..harness import ExperimentConfig, cell_bound, collapse_cell, run_experiment
from ..model import model_from_dict
from ..moments import gee_curvature, gmm_objective, gmm_weight
from ..projection import project
from .schemas import (
    BetelRequest,
    BetelResponse,
    CollapseRequest,
    CollapseResponse,
    CurvatureRequest,
    CurvatureResponse,
    GeeRequest,
    GeeResponse,
    GmmRequest,
    GmmResponse,
    ModelSpec,
    ProjectRequest,
    ProjectionResponse,
    SweepRequest,
    SweepResponse,
)


def _finite_or_none(x) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def _build_model(spec: ModelSpec):
    return model_from_dict(spec.model_dump())


def handle_project(req: ProjectRequest) -> ProjectionResponse:
    proj = project(_build_model(req.model), tol=req.tol, max_iter=req.max_iter)
    return ProjectionResponse(
        lambda_star=proj.lambda_star.tolist(),
        p_star=proj.p_star.tolist(),
        log_Z=proj.log_Z,
        dual_value=proj.dual_value,
        iterations=proj.iterations,
        kkt_residual=proj.kkt_residual,
    )


def handle_curvature(req: CurvatureRequest) -> CurvatureResponse:
    model = _build_model(req.model)
    proj = project(model)
    curv = curvature_report(model, proj)
    plan_n = None
    if req.plan_m is not None:
        epsilon = 0.1 if req.plan_epsilon is None else req.plan_epsilon
        plan_n = sample_size_plan(req.plan_m, epsilon, curv.lambda_min)
    return CurvatureResponse(
        tangent_dim=curv.tangent_dim,
        degenerate=curv.degenerate,
        spectrum=curv.spectrum.tolist(),
        lambda_min=_finite_or_none(curv.lambda_min),
        trace_H=curv.trace_H,
        trace_Hinv=curv.trace_Hinv,
        det_H=curv.det_H,
        lower_bound_traceinv=_finite_or_none(curv.lower_bound_traceinv),
        compression_low=curv.compression_bounds[0],
        compression_high=curv.compression_bounds[1],
        plan_n=plan_n,
    )


def handle_collapse(req: CollapseRequest) -> CollapseResponse:
    model = _build_model(req.model)
    proj = project(model)
    curv = curvature_report(model, proj)
    row = collapse_cell(model, proj, curv, req.n, req.m, req.tau)
    bound = cell_bound(row, (req.C_geo, req.C_geo_prime), float(proj.p_star.min()))
    return CollapseResponse(
        n=row.n,
        m=row.m,
        tau=row.tau,
        lambda_min=_finite_or_none(row.lambda_min),
        tv_exact=row.tv_exact,
        tv_gaussian=row.tv_gaussian,
        bound=bound,
        mass_out=row.mass_out,
        rho_ratio=_finite_or_none(row.rho_ratio),
    )


def handle_betel(req: BetelRequest) -> BetelResponse:
    theta = np.asarray(req.theta_grid, dtype=float)
    alpha_map = None if req.alphas is None else np.asarray(req.alphas, dtype=float)
    spec = req.model.model_dump()
    if not spec["alpha"] and spec["features"]:
        # template alpha is replaced per grid point; seed it from the grid
        first = alpha_map[0] if alpha_map is not None else np.atleast_1d(theta[0])
        spec["alpha"] = np.asarray(first, dtype=float).ravel().tolist()
    family = build_family(model_from_dict(spec), theta, alpha_map)
    post = betel_posterior(family, req.data, prior=req.prior, variant=req.variant)
    return BetelResponse(
        theta_grid=[row.tolist() for row in family.theta_grid],
        log_posterior=[_finite_or_none(v) for v in post.log_posterior],
        posterior=post.posterior.tolist(),
        variant=post.variant,
        n=post.n,
        map_index=int(np.argmax(post.posterior)),
    )


def handle_gmm(req: GmmRequest) -> GmmResponse:
    model = _build_model(req.model)
    proj = project(model)
    weight = gmm_weight(proj.p_star, model.A, req.tangent_kind)
    objective = gmm_objective(req.data, model, weight.W_opt)
    return GmmResponse(
        W_opt=weight.W_opt.tolist(),
        pushforward=weight.pushforward.tolist(),
        tangent_kind=weight.tangent_kind,
        objective=objective,
    )


def handle_gee(req: GeeRequest) -> GeeResponse:
    result = gee_curvature([(c.D, c.W, c.Sigma) for c in req.clusters], n=req.n)
    return GeeResponse(
        J=result.J.tolist(),
        K=result.K.tolist(),
        sandwich=result.sandwich.tolist(),
        lambda_min_J=result.lambda_min_J,
        rate_proxy=result.rate_proxy,
    )


def handle_sweep(req: SweepRequest) -> SweepResponse:
    config = ExperimentConfig(
        model=_build_model(req.model),
        n_grid=tuple(req.n_grid),
        m_grid=tuple(req.m_grid),
        tau_policy=req.tau_policy,
        constants=req.constants,
        seeds=tuple(req.seeds),
    )
    result = run_experiment(config, threads=req.threads)
    return SweepResponse(
        csv=result.csv,
        summary=result.summary,
        exit_code=result.exit_code,
        skipped=list(result.summary["skipped"]),
    )

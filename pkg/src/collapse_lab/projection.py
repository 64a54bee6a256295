"""Information projection onto affine moment constraints.

The minimizer of D(p || base) over E = {p > 0 : A p = alpha, 1'p = 1} is an
exponential tilt base(x) exp(lambda' h(x)) / Z(lambda); lambda solves the
concave dual g(lambda) = lambda' alpha - log sum_x base(x) exp(lambda' h(x)).
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundaryAlphaError,
    InfeasibleAlphaError,
    MaxIterationsError,
    ModelValidationError,
    SingularHessianError,
)
from .model import ConstrainedModel, feasibility_check

_ARMIJO_C = 1e-4
_BACKTRACK = 0.5
_SLOPE_FLOOR = 1e-13


@dataclass(frozen=True, eq=False)
class Projection:
    lambda_star: np.ndarray
    p_star: np.ndarray
    log_Z: float
    dual_value: float
    iterations: int
    kkt_residual: float


def _check_base(model: ConstrainedModel, base) -> np.ndarray:
    if base is None:
        return model.Q
    base = np.asarray(base, dtype=float)
    if base.shape != (model.k,):
        raise ModelValidationError(f"base must have shape ({model.k},)")
    if np.any(base <= 0) or not np.all(np.isfinite(base)):
        raise ModelValidationError("base must be strictly positive and finite")
    return base


def tilted_distribution(model: ConstrainedModel, base, lam) -> np.ndarray:
    """base(x) exp(lambda' h(x)) normalized, computed in log space."""
    base = _check_base(model, base)
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.shape != (model.d,):
        raise ModelValidationError(f"lambda must have shape ({model.d},)")
    logits = np.log(base) + model.A.T @ lam
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def kl_divergence(p, q) -> float:
    """sum p log(p/q) with the 0 log 0 = 0 convention."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ModelValidationError("p and q must have the same shape")
    mask = p > 0
    if np.any(q[mask] <= 0):
        raise ModelValidationError("q has a zero where p is positive; divergence is infinite")
    ps = p[mask]
    return float(np.sum(ps * np.log(ps / q[mask])))


def dual_newton(
    model: ConstrainedModel,
    base=None,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> Projection:
    """Damped Newton ascent of the dual from lambda = 0.

    Stops when the moment residual ||alpha - E_p[h]||_inf falls to tol.
    A diverging multiplier (||lambda||_inf beyond 1e3 * log(1/tol)) means
    alpha sits on or outside the hull boundary, where no interior tilt
    exists.
    """
    base = _check_base(model, base)
    if tol <= 0:
        raise ModelValidationError("tol must be positive")
    A, alpha, d = model.A, model.alpha, model.d
    log_base = np.log(base)
    blowup = 1e3 * np.log(1.0 / tol)

    lam = np.zeros(d)
    for it in range(max_iter + 1):
        logits = log_base + A.T @ lam
        shift = logits.max()
        w = np.exp(logits - shift)
        total = w.sum()
        p = w / total
        log_Z = shift + np.log(total)
        dual = float(lam @ alpha - log_Z)

        moments = A @ p
        grad = alpha - moments
        residual = float(np.max(np.abs(grad))) if d else 0.0
        if residual <= tol:
            return Projection(
                lambda_star=lam.copy(),
                p_star=p,
                log_Z=float(log_Z),
                dual_value=dual,
                iterations=it,
                kkt_residual=residual,
            )
        if it == max_iter:
            break

        cov = (A * p) @ A.T - np.outer(moments, moments)
        try:
            np.linalg.cholesky(cov)
            step = np.linalg.solve(cov, grad)
            degenerate = not np.all(np.isfinite(step))
        except np.linalg.LinAlgError:
            degenerate = True
        if degenerate:
            # a large multiplier at degeneration means the iterates were
            # chasing a vertex, not that the features are collinear
            if np.max(np.abs(lam)) > np.log(1.0 / tol):
                raise BoundaryAlphaError(
                    "dual multiplier diverged; alpha lies on or outside the hull boundary"
                )
            raise SingularHessianError(
                "feature covariance is singular; features are collinear under the tilt"
            )

        t = 1.0
        slope = float(grad @ step)
        # near the optimum the predicted ascent underflows the dual's ulp and
        # backtracking can only stall; the pure Newton step is safe there
        if slope > _SLOPE_FLOOR * max(1.0, abs(dual)):
            while True:
                cand = lam + t * step
                cand_logits = log_base + A.T @ cand
                cand_shift = cand_logits.max()
                cand_log_Z = cand_shift + np.log(np.exp(cand_logits - cand_shift).sum())
                if float(cand @ alpha - cand_log_Z) >= dual + _ARMIJO_C * t * slope:
                    break
                t *= _BACKTRACK
                if t < 1e-16:
                    raise MaxIterationsError("line search failed to make ascent progress")
        lam = lam + t * step
        if np.max(np.abs(lam)) > blowup:
            raise BoundaryAlphaError(
                "dual multiplier diverged; alpha lies on or outside the hull boundary"
            )

    raise MaxIterationsError(f"no convergence in {max_iter} iterations")


def project(model: ConstrainedModel, tol: float = 1e-10, max_iter: int = 200) -> Projection:
    """Feasibility-gated projection onto E with base Q.

    Rejects alpha outside the hull (InfeasibleAlphaError) or exactly on its
    boundary (BoundaryAlphaError) before running the solver.
    """
    report = feasibility_check(model)
    if not report.alpha_in_hull:
        raise InfeasibleAlphaError("alpha lies outside the feature hull")
    if not report.alpha_interior:
        raise BoundaryAlphaError(
            "alpha lies on the hull boundary; the projection would need zero entries"
        )
    return dual_newton(model, tol=tol, max_iter=max_iter)

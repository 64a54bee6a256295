"""Quadratic-form estimation diagnostics: GMM weighting and GEE curvature."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from .errors import (
    ModelValidationError,
    SingularMatrixError,
    SingularPushforwardError,
)
from .model import ConstrainedModel, _readonly, empirical_measure

_SYM_TOL = 1e-8
_PSD_TOL = -1e-10


@dataclass(frozen=True, eq=False)
class GmmWeight:
    W_opt: np.ndarray
    pushforward: np.ndarray
    tangent_kind: str


@dataclass(frozen=True, eq=False)
class GeeCurvature:
    J: np.ndarray
    K: np.ndarray
    sandwich: np.ndarray
    lambda_min_J: float
    rate_proxy: float | None


@dataclass(frozen=True, eq=False)
class ComparabilityReport:
    lower_holds: bool
    upper_holds: bool
    lower_margin: float
    upper_margin: float


def gmm_weight(p_star, A, tangent_kind: str = "simplex_tangent") -> GmmWeight:
    """Optimal weight as the inverse pushforward metric A V H^-1 V' A'.

    With V spanning the simplex tangent {1'v = 0} this equals the inverse
    feature covariance under p*. The constraint_tangent reading keeps V
    inside null(A) as well, which kills the pushforward (A V = 0) and
    raises the singularity it produces.
    """
    p_star = np.asarray(p_star, dtype=float)
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[1] != p_star.shape[0]:
        raise ModelValidationError("A must have one column per alphabet symbol")
    if np.any(p_star <= 0) or abs(p_star.sum() - 1.0) > 1e-9:
        raise ModelValidationError("p_star must be a strictly positive probability vector")
    if tangent_kind not in ("simplex_tangent", "constraint_tangent"):
        raise ModelValidationError(f"unknown tangent_kind {tangent_kind!r}")

    k = p_star.shape[0]
    d = A.shape[0]
    if tangent_kind == "simplex_tangent":
        V = null_space(np.ones((1, k)))
    else:
        V = null_space(np.vstack([np.ones((1, k)), A]))

    if V.shape[1] == 0:
        pushforward = np.zeros((d, d))
    else:
        H = V.T @ (V / p_star[:, None])
        H = (H + H.T) / 2.0
        AV = A @ V
        pushforward = AV @ np.linalg.solve(H, AV.T)
        pushforward = (pushforward + pushforward.T) / 2.0

    eigvals, eigvecs = np.linalg.eigh(pushforward)
    scale = max(1.0, float(eigvals[-1])) if eigvals.size else 1.0
    if eigvals.size == 0 or eigvals[0] <= 1e-12 * scale:
        direction = eigvecs[:, 0] if eigvals.size else None
        raise SingularPushforwardError(
            f"pushforward metric is singular under tangent_kind={tangent_kind!r}",
            null_direction=direction,
        )
    W = np.linalg.inv(pushforward)
    W = (W + W.T) / 2.0
    return GmmWeight(W_opt=_readonly(W), pushforward=_readonly(pushforward), tangent_kind=tangent_kind)


def gmm_objective(data, model_theta: ConstrainedModel, W) -> float:
    """(n/2) g' W g with g the empirical moment gap A p_hat - alpha(theta)."""
    W = np.asarray(W, dtype=float)
    d = model_theta.d
    if W.shape != (d, d):
        raise ModelValidationError(f"W must have shape ({d}, {d})")
    if np.max(np.abs(W - W.T)) > _SYM_TOL:
        raise ModelValidationError("W must be symmetric")
    if d and np.linalg.eigvalsh(W)[0] < _PSD_TOL:
        raise ModelValidationError("W must be positive semidefinite")
    measure = empirical_measure(data, model_theta.k)
    if measure.n == 0:
        raise ModelValidationError("need at least one observation")
    gap = model_theta.A @ measure.probability - model_theta.alpha
    return float(0.5 * measure.n * gap @ W @ gap)


def _as_cluster(entry, idx: int):
    if isinstance(entry, dict):
        try:
            D, W, Sigma = entry["D"], entry["W"], entry["Sigma"]
        except KeyError as exc:
            raise ModelValidationError(f"cluster {idx} missing key {exc}") from None
    else:
        if len(entry) != 3:
            raise ModelValidationError(f"cluster {idx} must be a (D, W, Sigma) triple")
        D, W, Sigma = entry
    D = np.atleast_2d(np.asarray(D, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    t = D.shape[0]
    if W.shape != (t, t) or Sigma.shape != (t, t):
        raise ModelValidationError(
            f"cluster {idx}: W and Sigma must be ({t}, {t}) to match D with {t} rows"
        )
    for name, M in (("W", W), ("Sigma", Sigma)):
        if np.max(np.abs(M - M.T)) > _SYM_TOL:
            raise ModelValidationError(f"cluster {idx}: {name} must be symmetric")
    return D, W, Sigma


def gee_curvature(clusters, n: int | None = None) -> GeeCurvature:
    """J = avg D'WD, K = avg D'W Sigma W D, sandwich = J^-1 K J^-1.

    When every W_i = Sigma_i^-1 the sandwich collapses to J^-1. The rate
    proxy sqrt(log n / (n lambda_min(J))) is emitted when n is supplied.
    """
    clusters = list(clusters)
    if not clusters:
        raise ModelValidationError("need at least one cluster")
    parsed = [_as_cluster(c, i) for i, c in enumerate(clusters)]
    p = parsed[0][0].shape[1]
    J = np.zeros((p, p))
    K = np.zeros((p, p))
    for i, (D, W, Sigma) in enumerate(parsed):
        if D.shape[1] != p:
            raise ModelValidationError(f"cluster {i}: D must have {p} columns")
        J += D.T @ W @ D
        K += D.T @ W @ Sigma @ W @ D
    J /= len(parsed)
    K /= len(parsed)
    J = (J + J.T) / 2.0
    K = (K + K.T) / 2.0

    eigvals = np.linalg.eigvalsh(J)
    if eigvals[0] <= 1e-12 * max(1.0, float(eigvals[-1])):
        raise SingularMatrixError("J is numerically singular")
    J_inv = np.linalg.inv(J)
    sandwich = J_inv @ K @ J_inv
    sandwich = (sandwich + sandwich.T) / 2.0

    rate = None
    if n is not None:
        if n < 2:
            raise ModelValidationError("rate proxy needs n >= 2")
        rate = float(math.sqrt(math.log(n) / (n * eigvals[0])))
    return GeeCurvature(
        J=_readonly(J),
        K=_readonly(K),
        sandwich=_readonly(sandwich),
        lambda_min_J=float(eigvals[0]),
        rate_proxy=rate,
    )


def curvature_comparability(J, H, a: float, b: float, chart=None) -> ComparabilityReport:
    """Check a H <= J <= b H in the semidefinite order, with margins.

    chart, when given, maps J coordinates into H coordinates; H is pulled
    back as chart' H chart before comparing.
    """
    J = np.asarray(J, dtype=float)
    H = np.asarray(H, dtype=float)
    if chart is not None:
        chart = np.asarray(chart, dtype=float)
        if chart.ndim != 2 or chart.shape[0] != H.shape[0] or chart.shape[1] != J.shape[0]:
            raise ModelValidationError("chart must map J coordinates into H coordinates")
        H = chart.T @ H @ chart
    if J.shape != H.shape or J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ModelValidationError("J and (mapped) H must be square with matching shapes")
    if not a <= b:
        raise ModelValidationError("need a <= b")
    lower = float(np.linalg.eigvalsh(J - a * H)[0])
    upper = float(np.linalg.eigvalsh(b * H - J)[0])
    return ComparabilityReport(
        lower_holds=bool(lower >= _PSD_TOL),
        upper_holds=bool(upper >= _PSD_TOL),
        lower_margin=lower,
        upper_margin=upper,
    )

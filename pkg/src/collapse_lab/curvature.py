"""Curvature diagnostics on the constraint manifold at the projection.

The tangent space is T = {v : 1'v = 0, A v = 0}. With V an orthonormal
basis of T, the projected Hessian of the divergence is
H = V' diag(1/p*) V; its smallest eigenvalue controls both the
localization radius and the collapse rate.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import null_space

from .errors import (
    CollapseLabError,
    InfeasibleAlphaError,
    ModelValidationError,
)
from .model import ConstrainedModel, TypeVector, _readonly
from .projection import Projection, dual_newton

_PD_TOL = -1e-10
_ISO_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CurvatureReport:
    V: np.ndarray
    H_star: np.ndarray
    spectrum: np.ndarray
    lambda_min: float
    trace_H: float
    trace_Hinv: float
    det_H: float
    lower_bound_traceinv: float
    compression_bounds: tuple
    degenerate: bool = False

    @property
    def tangent_dim(self) -> int:
        return self.V.shape[1]


@dataclass(frozen=True, eq=False)
class SpectralBounds:
    """Both sides of the tracial comparison, never asserted as an order.

    r / tr(H^-1) is the harmonic mean of the spectrum, so it can only sit
    at or above lambda_min; equality characterizes an isotropic spectrum.
    """

    lambda_min: float
    lower_bound_traceinv: float
    trace: float
    det: float
    printed_lower_bound_holds: bool
    isotropic_equality: bool


@dataclass(frozen=True)
class LanfordWindow:
    rho_n: float
    radius_euclidean: float
    n: int


@dataclass(frozen=True)
class TemperResult:
    T: float
    effective_lambda_min: float


@dataclass(frozen=True, eq=False)
class PerturbationEntry:
    kind: str
    index: int
    sign: float
    lambda_min: float
    delta_lambda: float
    hessian_shift_norm: float


@dataclass(frozen=True, eq=False)
class SensitivityReport:
    delta: float
    base_lambda_min: float
    max_abs_delta_lambda: float
    entries: tuple
    weyl_ok: bool
    lipschitz_constant: float
    lipschitz_ok: bool


def tangent_basis(model: ConstrainedModel) -> np.ndarray:
    """Orthonormal basis of {v : 1'v = 0, A v = 0} as columns, r = k - 1 - d.

    r = 0 (zero-dimensional feasible set) yields a (k, 0) matrix.
    """
    stacked = np.vstack([np.ones((1, model.k)), model.A])
    V = null_space(stacked)
    if V.shape[1] != model.tangent_dim:
        raise ModelValidationError(
            f"tangent dimension {V.shape[1]} != k - 1 - d = {model.tangent_dim}; "
            "constraint rows are numerically degenerate"
        )
    return _readonly(V)


def projected_hessian(p_star, V) -> np.ndarray:
    """H = V' diag(1/p*) V, symmetrized."""
    p_star = np.asarray(p_star, dtype=float)
    if np.any(p_star <= 0):
        raise ModelValidationError("p_star must be strictly positive")
    H = V.T @ (V / p_star[:, None])
    return _readonly((H + H.T) / 2.0)


def min_eigenvalue(H: np.ndarray):
    """Return (lambda_min, spectrum sorted descending)."""
    H = np.asarray(H, dtype=float)
    if H.size == 0:
        return math.inf, np.zeros(0)
    w = np.linalg.eigvalsh(H)
    if w[0] < _PD_TOL:
        raise CollapseLabError(f"matrix is not positive definite (eigenvalue {w[0]!r})")
    return float(w[0]), _readonly(w[::-1].copy())


def spectral_bounds(H: np.ndarray, r: int) -> SpectralBounds:
    lam_min, spectrum = min_eigenvalue(H)
    trace = float(np.sum(spectrum))
    det = float(np.prod(spectrum))
    trace_inv = float(np.sum(1.0 / spectrum))
    lower = r / trace_inv if trace_inv > 0 else math.inf
    spread = float(spectrum[0] - spectrum[-1]) if r else 0.0
    return SpectralBounds(
        lambda_min=lam_min,
        lower_bound_traceinv=lower,
        trace=trace,
        det=det,
        printed_lower_bound_holds=bool(lower <= lam_min + _ISO_TOL),
        isotropic_equality=bool(spread <= _ISO_TOL),
    )


def curvature_report(
    model: ConstrainedModel, projection: Projection, V: np.ndarray | None = None
) -> CurvatureReport:
    if V is None:
        V = tangent_basis(model)
    p = projection.p_star
    compression = (float(1.0 / p.max()), float(1.0 / p.min()))
    r = V.shape[1]
    if r == 0:
        return CurvatureReport(
            V=V,
            H_star=_readonly(np.zeros((0, 0))),
            spectrum=_readonly(np.zeros(0)),
            lambda_min=math.inf,
            trace_H=0.0,
            trace_Hinv=0.0,
            det_H=1.0,
            lower_bound_traceinv=math.inf,
            compression_bounds=compression,
            degenerate=True,
        )
    H = projected_hessian(p, V)
    lam_min, spectrum = min_eigenvalue(H)
    trace_inv = float(np.sum(1.0 / spectrum))
    return CurvatureReport(
        V=V,
        H_star=H,
        spectrum=spectrum,
        lambda_min=lam_min,
        trace_H=float(np.sum(spectrum)),
        trace_Hinv=trace_inv,
        det_H=float(np.prod(spectrum)),
        lower_bound_traceinv=r / trace_inv,
        compression_bounds=compression,
    )


def lanford_radius(lambda_min: float, n: int) -> LanfordWindow:
    """rho_n = sqrt(2 log n / lambda_min); Euclidean radius rho_n / sqrt(n)."""
    if n < 2:
        raise ModelValidationError("localization radius needs n >= 2")
    if not lambda_min > 0:
        raise ModelValidationError("lambda_min must be positive")
    rho = math.sqrt(2.0 * math.log(n) / lambda_min)
    return LanfordWindow(rho_n=rho, radius_euclidean=rho / math.sqrt(n), n=int(n))


def window_member(type_vector: TypeVector, p_star, window: LanfordWindow) -> bool:
    """Inclusive membership ||counts/n - p*||_2 <= radius."""
    if type_vector.n != window.n:
        raise ModelValidationError("type vector and window disagree on n")
    dist = float(np.linalg.norm(type_vector.probability - np.asarray(p_star, dtype=float)))
    return dist <= window.radius_euclidean


def sample_size_plan(m: int, epsilon: float, lambda_min: float) -> int:
    """Smallest n with m^2 log(1/eps) / (eps^2 lambda_min) <= n."""
    if m < 1:
        raise ModelValidationError("m must be a positive integer")
    if not 0 < epsilon < 1:
        raise ModelValidationError("epsilon must lie in (0, 1)")
    if not lambda_min > 0:
        raise ModelValidationError("lambda_min must be positive")
    return int(math.ceil(m * m * math.log(1.0 / epsilon) / (epsilon * epsilon * lambda_min)))


def temper(lambda_hat: float, beta: float = 1.0, lambda0: float = 1.0) -> TemperResult:
    """T = 1 + beta log(1 + lambda_hat / lambda0); effective curvature lambda_hat / T."""
    if lambda_hat < 0:
        raise ModelValidationError("lambda_hat must be nonnegative")
    if beta <= 0 or lambda0 <= 0:
        raise ModelValidationError("beta and lambda0 must be positive")
    T = 1.0 + beta * math.log1p(lambda_hat / lambda0)
    return TemperResult(T=T, effective_lambda_min=lambda_hat / T)


def perturbation_stability(model: ConstrainedModel, delta: float = 1e-6) -> SensitivityReport:
    """Eigenvalue drift under coordinate perturbations of alpha and Q.

    alpha moves by +/- delta per coordinate; Q mixes toward each vertex,
    (1 - delta) Q + delta e_i. All reports use the unperturbed tangent
    basis so Weyl's inequality |d lambda_min| <= ||dH||_2 applies as
    stated. The Lipschitz constant is fitted at probe scale delta/2 and
    checked at delta with 1.5x slack.
    """
    if delta < 0:
        raise ModelValidationError("delta must be nonnegative")
    V = tangent_basis(model)
    base_proj = dual_newton(model)
    H0 = projected_hessian(base_proj.p_star, V)
    lam0, _ = min_eigenvalue(H0)

    def _solve(scale: float):
        entries = []
        for j in range(model.d):
            for sign in (1.0, -1.0):
                alpha_new = model.alpha.copy()
                alpha_new[j] += sign * scale
                probe = replace(model, alpha=_readonly(alpha_new))
                try:
                    proj = dual_newton(probe)
                except CollapseLabError as exc:
                    raise InfeasibleAlphaError(
                        f"perturbing alpha[{j}] by {sign * scale!r} leaves the hull"
                    ) from exc
                H = projected_hessian(proj.p_star, V)
                lam, _ = min_eigenvalue(H)
                shift = float(np.max(np.abs(np.linalg.eigvalsh(H - H0)))) if H.size else 0.0
                entries.append(
                    PerturbationEntry("alpha", j, sign, lam, lam - lam0, shift)
                )
        for i in range(model.k):
            Q_new = (1.0 - scale) * model.Q
            Q_new = Q_new.copy()
            Q_new[i] += scale
            probe = replace(model, Q=_readonly(Q_new))
            proj = dual_newton(probe)
            H = projected_hessian(proj.p_star, V)
            lam, _ = min_eigenvalue(H)
            shift = float(np.max(np.abs(np.linalg.eigvalsh(H - H0)))) if H.size else 0.0
            entries.append(PerturbationEntry("Q", i, 1.0, lam, lam - lam0, shift))
        return entries

    if delta == 0.0:
        return SensitivityReport(
            delta=0.0,
            base_lambda_min=lam0,
            max_abs_delta_lambda=0.0,
            entries=(),
            weyl_ok=True,
            lipschitz_constant=0.0,
            lipschitz_ok=True,
        )

    entries = _solve(delta)
    max_abs = max(abs(e.delta_lambda) for e in entries)
    weyl_ok = all(abs(e.delta_lambda) <= e.hessian_shift_norm + 1e-10 for e in entries)

    probe_entries = _solve(delta / 2.0)
    lipschitz = max(abs(e.delta_lambda) for e in probe_entries) / (delta / 2.0)
    lipschitz_ok = max_abs <= 1.5 * lipschitz * delta + 1e-12

    return SensitivityReport(
        delta=float(delta),
        base_lambda_min=lam0,
        max_abs_delta_lambda=float(max_abs),
        entries=tuple(entries),
        weyl_ok=bool(weyl_ok),
        lipschitz_constant=float(lipschitz),
        lipschitz_ok=bool(lipschitz_ok),
    )

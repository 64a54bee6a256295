"""Grid posteriors over exponentially tilted families.

Each grid point theta maps to target moments alpha(theta); its tilted law
P*_theta is the information projection of Q onto the corresponding
constraint set. The posterior over the grid uses the tilted likelihood,
which depends on the data only through the empirical type.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from .curvature import curvature_report, tangent_basis
from .errors import BoundaryAlphaError, GuardError, ModelValidationError
from .model import ConstrainedModel, _readonly, empirical_measure
from .oracle import _TABLE_GUARD, PredictiveLaw
from .projection import kl_divergence, project

_TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TiltedFamily:
    model: ConstrainedModel
    theta_grid: np.ndarray
    alphas: np.ndarray
    projections: tuple
    curvatures: tuple

    @property
    def size(self) -> int:
        return self.theta_grid.shape[0]


@dataclass(frozen=True, eq=False)
class GridPosterior:
    prior: np.ndarray
    log_posterior: np.ndarray
    posterior: np.ndarray
    variant: str
    n: int


@dataclass(frozen=True, eq=False)
class ConcentrationProfile:
    radii: np.ndarray
    tail_mass: np.ndarray
    corollary_radius: float | None
    center_index: int


@dataclass(frozen=True, eq=False)
class PseudoTrue:
    index: int
    theta: np.ndarray
    divergence: float
    tie: bool
    direction: str


def build_family(model_template: ConstrainedModel, theta_grid, alpha_map=None) -> TiltedFamily:
    """Project Q onto the constraint set of every grid point.

    alpha_map may be a callable theta -> alpha, an explicit (G, d) array,
    or None for the identity (requires theta dimension == d). A boundary
    failure names the offending grid point.
    """
    theta = np.asarray(theta_grid, dtype=float)
    if theta.ndim == 1:
        theta = theta[:, None]
    if theta.ndim != 2 or theta.shape[0] == 0:
        raise ModelValidationError("theta grid must be a nonempty 1-d or 2-d array")

    if alpha_map is None:
        if theta.shape[1] != model_template.d:
            raise ModelValidationError(
                "identity alpha map needs theta dimension equal to the number of constraints"
            )
        alphas = theta.copy()
    elif callable(alpha_map):
        alphas = np.array([np.atleast_1d(np.asarray(alpha_map(t), dtype=float)) for t in theta])
    else:
        alphas = np.asarray(alpha_map, dtype=float)
        if alphas.ndim == 1:
            alphas = alphas[:, None]
    if alphas.shape != (theta.shape[0], model_template.d):
        raise ModelValidationError(
            f"alpha targets must have shape ({theta.shape[0]}, {model_template.d})"
        )

    V = tangent_basis(model_template)
    projections, curvatures = [], []
    for g in range(theta.shape[0]):
        probe = replace(model_template, alpha=_readonly(alphas[g]))
        try:
            # the posterior scales per-draw log-likelihood error by n, so the
            # grid laws are solved near the float floor, not at the generic tol
            proj = project(probe, tol=1e-14)
        except BoundaryAlphaError as exc:
            raise BoundaryAlphaError(
                f"grid point theta={theta[g].tolist()} has boundary target moments: {exc}"
            ) from exc
        projections.append(proj)
        curvatures.append(curvature_report(probe, proj, V=V))
    return TiltedFamily(
        model=model_template,
        theta_grid=_readonly(theta),
        alphas=_readonly(alphas),
        projections=tuple(projections),
        curvatures=tuple(curvatures),
    )


def betel_posterior(family: TiltedFamily, data, prior=None, variant: str = "canonical") -> GridPosterior:
    """Posterior over the grid from the tilted likelihood.

    canonical: likelihood prod_i P*_theta(X_i). as_printed: additionally
    multiplies exp(lambda_theta' sum_i h(X_i)), the literal display some
    treatments use, which applies the tilt a second time. Both reduce to
    the prior when the sample is empty, and both are functions of the
    empirical type only.
    """
    if variant not in ("canonical", "as_printed"):
        raise ModelValidationError(f"unknown variant {variant!r}")
    G = family.size
    if prior is None:
        prior = np.full(G, 1.0 / G)
    else:
        prior = np.asarray(prior, dtype=float)
        if prior.shape != (G,):
            raise ModelValidationError(f"prior must have shape ({G},)")
        if np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-12:
            raise ModelValidationError("prior must be a probability vector over the grid")

    counts = empirical_measure(data, family.model.k).counts
    n = int(counts.sum())

    log_lik = np.zeros(G)
    for g, proj in enumerate(family.projections):
        ll = float(counts @ np.log(proj.p_star))
        if variant == "as_printed":
            ll += float(proj.lambda_star @ (family.model.A @ counts))
        log_lik[g] = ll

    with np.errstate(divide="ignore"):
        log_post = np.log(prior) + log_lik
    log_post -= logsumexp(log_post)
    posterior = np.exp(log_post)
    posterior /= posterior.sum()
    return GridPosterior(
        prior=_readonly(prior),
        log_posterior=_readonly(log_post),
        posterior=_readonly(posterior),
        variant=variant,
        n=n,
    )


def concentration_profile(
    posterior: GridPosterior,
    family: TiltedFamily,
    theta0,
    radii,
    C: float = 1.0,
) -> ConcentrationProfile:
    """Posterior mass strictly outside each ball around theta0.

    Also reports the curvature radius C sqrt(log n / (n lambda_min)) at
    the grid point nearest theta0 (None when n < 2).
    """
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    if theta0.shape != (family.theta_grid.shape[1],):
        raise ModelValidationError("theta0 dimension mismatch with the grid")
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or np.any(radii < 0):
        raise ModelValidationError("radii must be a vector of nonnegative values")

    dist = np.linalg.norm(family.theta_grid - theta0[None, :], axis=1)
    tail = np.array([posterior.posterior[dist > rho].sum() for rho in radii])

    center = int(np.argmin(dist))
    corollary = None
    if posterior.n >= 2:
        lam = family.curvatures[center].lambda_min
        if np.isfinite(lam) and lam > 0:
            corollary = float(C * np.sqrt(np.log(posterior.n) / (posterior.n * lam)))
    return ConcentrationProfile(
        radii=_readonly(radii),
        tail_mass=_readonly(tail),
        corollary_radius=corollary,
        center_index=center,
    )


def betel_predictive(posterior: GridPosterior, family: TiltedFamily, m: int) -> PredictiveLaw:
    """Posterior-weighted mixture of m-fold products of the tilted laws."""
    if m < 1:
        raise ModelValidationError("need m >= 1")
    k = family.model.k
    if k**m > _TABLE_GUARD:
        raise GuardError(f"refusing dense table of size {k**m} (guard {_TABLE_GUARD})")
    table = np.zeros(k**m)
    for w, proj in zip(posterior.posterior, family.projections):
        if w == 0.0:
            continue
        tab = proj.p_star.copy()
        for _ in range(m - 1):
            tab = np.multiply.outer(tab, proj.p_star).ravel()
        table += w * tab
    return PredictiveLaw(m=m, k=k, table=table, kind="posterior_mixture")


def pseudo_true(family: TiltedFamily, p0, direction: str = "forward") -> PseudoTrue:
    """Grid point whose tilted law is divergence-closest to p0.

    forward minimizes D(p0 || P*_theta); reverse minimizes D(P*_theta || p0).
    Ties break to the smallest grid index and are flagged.
    """
    if direction not in ("forward", "reverse"):
        raise ModelValidationError(f"unknown direction {direction!r}")
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (family.model.k,):
        raise ModelValidationError(f"p0 must have shape ({family.model.k},)")
    if np.any(p0 < 0) or abs(p0.sum() - 1.0) > 1e-9:
        raise ModelValidationError("p0 must be a probability vector")

    if direction == "forward":
        divs = np.array([kl_divergence(p0, proj.p_star) for proj in family.projections])
    else:
        divs = np.array([kl_divergence(proj.p_star, p0) for proj in family.projections])
    idx = int(np.argmin(divs))
    tie = bool(np.sum(np.abs(divs - divs[idx]) <= _TIE_TOL) > 1)
    return PseudoTrue(
        index=idx,
        theta=family.theta_grid[idx].copy(),
        divergence=float(divs[idx]),
        tie=tie,
        direction=direction,
    )

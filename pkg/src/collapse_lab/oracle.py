"""Exact finite-n predictive laws by type enumeration, plus their
Gaussian-mixture surrogate and the collapse bound they are checked
against.

Everything here is deterministic: enumeration order is fixed, weights are
handled in log space, and dense sequence tables are laid out in
lexicographic order of (x_1, ..., x_m) over the alphabet {1, ..., k}.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

from .curvature import CurvatureReport, LanfordWindow, lanford_radius
from .errors import (
    EmptyFeasibleSetError,
    EmptyWindowError,
    GuardError,
    ModelValidationError,
)
from .model import ConstrainedModel, TypeVector, _readonly
from .projection import Projection

_TYPE_COUNT_GUARD = 10**8
_TABLE_GUARD = 10**7
_QUADRATURE_MAX_DIM = 3
_QUADRATURE_NODES_PER_RADIUS = 21


@dataclass(frozen=True, eq=False)
class TypeEnsemble:
    """Feasible types of size n with conditional multinomial weights.

    counts has one type per row; log_weights are unnormalized log
    multinomial masses under Q and weights are the normalized conditional
    probabilities.
    """

    n: int
    counts: np.ndarray
    log_weights: np.ndarray
    weights: np.ndarray
    tau: float

    @property
    def k(self) -> int:
        return self.counts.shape[1]

    @property
    def types(self) -> tuple:
        return tuple(TypeVector(counts=row, n=self.n) for row in self.counts)


@dataclass(frozen=True, eq=False)
class PredictiveLaw:
    """Dense law over length-m sequences; table index is lexicographic."""

    m: int
    k: int
    table: np.ndarray
    kind: str
    degenerate: bool = False

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        if table.shape != (self.k**self.m,):
            raise ModelValidationError("table length must be k**m")
        if abs(table.sum() - 1.0) > 1e-10:
            raise ModelValidationError(f"table must sum to 1, got {table.sum()!r}")
        object.__setattr__(self, "table", _readonly(table))

    def sequence_probability(self, seq) -> float:
        idx = 0
        for x in seq:
            if not 1 <= x <= self.k:
                raise ModelValidationError(f"symbol {x} outside alphabet")
            idx = idx * self.k + (x - 1)
        return float(self.table[idx])


@dataclass(frozen=True)
class HypergeometricCheck:
    tv: float
    bound: float
    holds: bool


@dataclass(frozen=True, eq=False)
class CollapseBoundInputs:
    C_geo: float
    C_geo_prime: float
    p_star_min: float
    lambda_min: float
    n: int
    m: int

    def __post_init__(self):
        if self.C_geo < 0 or self.C_geo_prime < 0:
            raise ModelValidationError("bound constants must be nonnegative")
        if not self.p_star_min > 0 or not self.lambda_min > 0:
            raise ModelValidationError("p_star_min and lambda_min must be positive")
        if self.n < 1 or self.m < 0:
            raise ModelValidationError("need n >= 1 and m >= 0")


@dataclass(frozen=True)
class WindowMass:
    mass_in: float
    mass_out: float


@dataclass(frozen=True, eq=False)
class ResidualReport:
    max_residual: float
    mean_residual: float
    n_in_window: int
    nearest_index: int
    window: LanfordWindow


@dataclass(frozen=True)
class LanfordFixedPoint:
    rho_empirical: float
    rho_formula: float
    ratio: float


def type_count(n: int, k: int) -> int:
    return math.comb(n + k - 1, k - 1)


def enumerate_types(n: int, k: int):
    """Yield every composition of n into k parts, ascending lexicographic."""
    if n < 0 or k < 1:
        raise ModelValidationError("need n >= 0 and k >= 1")
    if type_count(n, k) > _TYPE_COUNT_GUARD:
        raise GuardError(
            f"refusing to enumerate {type_count(n, k)} types (guard {_TYPE_COUNT_GUARD})"
        )
    for counts in _compositions(n, k):
        yield TypeVector(counts=np.array(counts, dtype=np.int64), n=n)


def _compositions(n: int, k: int):
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def _counts_matrix(n: int, k: int) -> np.ndarray:
    return np.array(list(_compositions(n, k)), dtype=np.int64)


def feasible_types(model: ConstrainedModel, n: int, tau: float | None = None) -> TypeEnsemble:
    """Types with ||A p - alpha||_inf <= tau; tau defaults to B / (2n)."""
    if n < 1:
        raise ModelValidationError("need n >= 1")
    if tau is None:
        tau = model.B / (2.0 * n)
    if tau < 0:
        raise ModelValidationError("tau must be nonnegative")
    if type_count(n, model.k) > _TYPE_COUNT_GUARD:
        raise GuardError(
            f"refusing to enumerate {type_count(n, model.k)} types (guard {_TYPE_COUNT_GUARD})"
        )
    counts = _counts_matrix(n, model.k)
    if model.d:
        viol = np.max(np.abs(counts @ model.A.T / n - model.alpha), axis=1)
    else:
        viol = np.zeros(len(counts))
    mask = viol <= tau
    if not mask.any():
        min_tau = float(viol.min())
        raise EmptyFeasibleSetError(
            f"no feasible type at n={n}, tau={tau!r}; smallest workable tau is {min_tau!r}",
            min_tau=min_tau,
        )
    kept = counts[mask]
    log_w = (
        gammaln(n + 1)
        - gammaln(kept + 1).sum(axis=1)
        + kept @ np.log(model.Q)
    )
    weights = np.exp(log_w - logsumexp(log_w))
    weights /= weights.sum()
    return TypeEnsemble(
        n=int(n),
        counts=_readonly(kept),
        log_weights=_readonly(log_w),
        weights=_readonly(weights),
        tau=float(tau),
    )


@lru_cache(maxsize=32)
def _sequence_tables(k: int, m: int):
    """All k^m sequences (lexicographic) and per-position prior-occurrence counts."""
    if k**m > _TABLE_GUARD:
        raise GuardError(f"refusing dense table of size {k**m} (guard {_TABLE_GUARD})")
    grids = np.meshgrid(*[np.arange(1, k + 1)] * m, indexing="ij")
    seq = np.stack([g.ravel() for g in grids], axis=1)
    occ = np.zeros_like(seq)
    for i in range(1, m):
        occ[:, i] = np.sum(seq[:, :i] == seq[:, i : i + 1], axis=1)
    return _readonly(seq), _readonly(occ)


def _falling(n: int, m: int) -> float:
    out = 1.0
    for i in range(m):
        out *= n - i
    return out


def without_replacement_law(type_vector: TypeVector, m: int) -> PredictiveLaw:
    """Ordered sampling without replacement from an urn with the given counts."""
    n = type_vector.n
    if m < 1:
        raise ModelValidationError("need m >= 1")
    if m > n:
        raise ModelValidationError(f"cannot draw m={m} without replacement from n={n}")
    k = type_vector.counts.shape[0]
    seq, occ = _sequence_tables(k, m)
    factors = type_vector.counts[seq - 1] - occ
    table = np.clip(factors, 0, None).prod(axis=1) / _falling(n, m)
    return PredictiveLaw(m=m, k=k, table=table, kind="exact")


def product_law(p, m: int) -> PredictiveLaw:
    """m-fold product of a single distribution."""
    p = np.asarray(p, dtype=float)
    if m < 1:
        raise ModelValidationError("need m >= 1")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ModelValidationError("p must be a probability vector")
    k = p.shape[0]
    if k**m > _TABLE_GUARD:
        raise GuardError(f"refusing dense table of size {k**m} (guard {_TABLE_GUARD})")
    table = p.copy()
    for _ in range(m - 1):
        table = np.multiply.outer(table, p).ravel()
    return PredictiveLaw(m=m, k=k, table=table / table.sum(), kind="product_benchmark")


def predictive_exact(ensemble: TypeEnsemble, m: int) -> PredictiveLaw:
    """Mixture over feasible types of without-replacement sampling laws.

    This is the predictive law of the next m symbols given that the first
    n landed in the conditioning event.
    """
    n, k = ensemble.n, ensemble.k
    if m < 1:
        raise ModelValidationError("need m >= 1")
    if m > n:
        raise ModelValidationError(f"cannot draw m={m} without replacement from n={n}")
    seq, occ = _sequence_tables(k, m)
    factors = ensemble.counts[:, seq - 1] - occ[None, :, :]
    tables = np.clip(factors, 0, None).prod(axis=2) / _falling(n, m)
    return PredictiveLaw(m=m, k=k, table=ensemble.weights @ tables, kind="exact")


def tv_distance(law_p: PredictiveLaw, law_q: PredictiveLaw) -> float:
    """Total variation distance (1/2) sum |p - q| between dense laws."""
    if law_p.m != law_q.m or law_p.k != law_q.k:
        raise ModelValidationError(
            f"law shapes differ: (k={law_p.k}, m={law_p.m}) vs (k={law_q.k}, m={law_q.m})"
        )
    return float(0.5 * np.abs(law_p.table - law_q.table).sum())


def hypergeometric_bound_check(type_vector: TypeVector, m: int) -> HypergeometricCheck:
    """TV between urn sampling and the iid benchmark against m(m-1)/(2 n p_min)."""
    if np.any(type_vector.counts == 0):
        raise ModelValidationError("bound needs every count positive")
    n = type_vector.n
    p = type_vector.probability
    tv = tv_distance(without_replacement_law(type_vector, m), product_law(p, m))
    bound = m * (m - 1) / (2.0 * n * float(p.min()))
    return HypergeometricCheck(tv=tv, bound=bound, holds=bool(tv <= bound + 1e-12))


def gaussian_mixture_approx(
    model: ConstrainedModel,
    projection: Projection,
    curvature: CurvatureReport,
    n: int,
    m: int,
) -> PredictiveLaw:
    """Tangent-grid quadrature of the Gaussian limit as a mixture of products.

    Nodes live on a regular grid in tangent coordinates with spacing
    2 rho_n / 21, truncated to the ball of radius rho_n + 2 spacings.
    Each node v charts to p* + V v / sqrt(n); nodes leaving the positive
    orthant are discarded and the Gaussian weights renormalized.
    """
    V = curvature.V
    r = V.shape[1]
    p_star = projection.p_star
    if r == 0:
        base = product_law(p_star, m)
        return PredictiveLaw(m=m, k=model.k, table=base.table, kind="gaussian_mixture", degenerate=True)
    if r > _QUADRATURE_MAX_DIM:
        raise GuardError(f"quadrature supports tangent dimension <= {_QUADRATURE_MAX_DIM}, got {r}")

    window = lanford_radius(curvature.lambda_min, n)
    rho = window.rho_n
    spacing = 2.0 * rho / _QUADRATURE_NODES_PER_RADIUS
    reach = rho + 2.0 * spacing
    half = int(math.ceil(reach / spacing))
    axis = spacing * np.arange(-half, half + 1)
    mesh = np.meshgrid(*[axis] * r, indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=1)
    nodes = nodes[np.linalg.norm(nodes, axis=1) <= reach]

    H = curvature.H_star
    quad = 0.5 * np.einsum("ni,ij,nj->n", nodes, H, nodes)
    log_phi = 0.5 * float(np.linalg.slogdet(H)[1]) - 0.5 * r * math.log(2 * math.pi) - quad
    charts = p_star[None, :] + (nodes @ V.T) / math.sqrt(n)
    keep = charts.min(axis=1) > 0
    nodes, charts, log_phi = nodes[keep], charts[keep], log_phi[keep]
    weights = np.exp(log_phi - logsumexp(log_phi))
    weights /= weights.sum()

    if model.k**m > _TABLE_GUARD:
        raise GuardError(f"refusing dense table of size {model.k**m} (guard {_TABLE_GUARD})")
    table = np.zeros(model.k**m)
    for w, chart in zip(weights, charts):
        block = chart / chart.sum()
        tab = block.copy()
        for _ in range(m - 1):
            tab = np.multiply.outer(tab, block).ravel()
        table += w * tab
    return PredictiveLaw(m=m, k=model.k, table=table, kind="gaussian_mixture")


def collapse_bound(inputs: CollapseBoundInputs) -> float:
    """C m sqrt(log n / (n lambda_min)) + C' m^2 / (n p*_min)."""
    rate = inputs.C_geo * inputs.m * math.sqrt(
        math.log(inputs.n) / (inputs.n * inputs.lambda_min)
    )
    burn_in = inputs.C_geo_prime * inputs.m**2 / (inputs.n * inputs.p_star_min)
    return rate + burn_in


def window_partition(ensemble: TypeEnsemble, window: LanfordWindow, p_star) -> WindowMass:
    """Split the conditional mass at the window boundary (inclusive inside)."""
    if ensemble.n != window.n:
        raise ModelValidationError("ensemble and window disagree on n")
    p_hat = ensemble.counts / ensemble.n
    dist = np.linalg.norm(p_hat - np.asarray(p_star, dtype=float)[None, :], axis=1)
    inside = dist <= window.radius_euclidean
    return WindowMass(
        mass_in=float(ensemble.weights[inside].sum()),
        mass_out=float(ensemble.weights[~inside].sum()),
    )


def quadratic_residual(
    ensemble: TypeEnsemble, projection: Projection, curvature: CurvatureReport
) -> ResidualReport:
    """Gap between relative log weights and the quadratic energy model.

    For each in-window type P the reference is -(n/2) w' H* w with
    w = V'(P - P*), compared against the type nearest to P* so the
    lattice offset cancels.
    """
    n = ensemble.n
    window = lanford_radius(curvature.lambda_min, n)
    p_hat = ensemble.counts / n
    diff = p_hat - projection.p_star[None, :]
    dist = np.linalg.norm(diff, axis=1)
    inside = dist <= window.radius_euclidean
    if not inside.any():
        raise EmptyWindowError(f"no feasible type within radius {window.radius_euclidean!r}")
    near = int(np.argmin(dist))
    w = diff @ curvature.V
    quad = 0.5 * n * np.einsum("ni,ij,nj->n", w, curvature.H_star, w)
    rel_log_w = ensemble.log_weights - ensemble.log_weights[near]
    rel_quad = -(quad - quad[near])
    residuals = np.abs(rel_log_w[inside] - rel_quad[inside])
    return ResidualReport(
        max_residual=float(residuals.max()),
        mean_residual=float(residuals.mean()),
        n_in_window=int(inside.sum()),
        nearest_index=near,
        window=window,
    )


def lanford_fixed_point(
    ensemble: TypeEnsemble, projection: Projection, curvature: CurvatureReport
) -> LanfordFixedPoint:
    """Fixed-point check of the localization radius.

    rho_empirical^2 is the Gaussian-weighted average of n ||P - P*||^2
    over the feasible types, with Gaussian weights built from the
    quadratic energy; it is compared against rho_n^2 = 2 log n / lambda_min.
    """
    n = ensemble.n
    diff = ensemble.counts / n - projection.p_star[None, :]
    w = diff @ curvature.V
    quad = 0.5 * n * np.einsum("ni,ij,nj->n", w, curvature.H_star, w)
    log_gauss = -quad
    gauss = np.exp(log_gauss - logsumexp(log_gauss))
    gauss /= gauss.sum()
    rho_emp_sq = float(np.sum(gauss * n * np.sum(diff * diff, axis=1)))
    window = lanford_radius(curvature.lambda_min, n)
    if rho_emp_sq == 0.0:
        # a fully localized ensemble; avoids 0 * inf when the tangent is trivial
        ratio = 0.0
    else:
        ratio = rho_emp_sq * curvature.lambda_min / (2.0 * math.log(n))
    return LanfordFixedPoint(
        rho_empirical=math.sqrt(rho_emp_sq),
        rho_formula=window.rho_n,
        ratio=ratio,
    )

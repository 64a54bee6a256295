"""Finite-alphabet models with affine moment constraints.

A model is an alphabet {1, ..., k}, a strictly positive reference law Q,
and a feature matrix A whose column x holds the feature vector of symbol
x. The constraint set is E = {p in the open simplex : A p = alpha}.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import ModelValidationError, OutOfRangeSymbolError

_Q_SUM_TOL = 1e-12
_ROW_DROP_TOL = 1e-10
_ROW_CONSISTENCY_TOL = 1e-8
_INTERIOR_TOL = 1e-9


class DependentRowWarning(UserWarning):
    """A constraint row was dropped because the other rows already imply it."""


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ConstrainedModel:
    """Validated model. Construct through :func:`validate_model`.

    B is the largest absolute feature value; downstream tolerance defaults
    scale with it.
    """

    k: int
    Q: np.ndarray
    A: np.ndarray
    alpha: np.ndarray
    B: float
    dropped_rows: tuple = ()

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def tangent_dim(self) -> int:
        return self.k - 1 - self.d

    @property
    def zero_dimensional(self) -> bool:
        return self.tangent_dim == 0


@dataclass(frozen=True, eq=False)
class FeasibilityReport:
    alpha_in_hull: bool
    alpha_interior: bool
    interior_margin: float
    rank_A: int
    reduced_rows: tuple
    tangent_dim: int
    zero_dimensional: bool


@dataclass(frozen=True, eq=False)
class TypeVector:
    """Vector of symbol counts with total n."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size == 0:
            raise ModelValidationError("counts must be a nonempty vector")
        if np.any(counts < 0):
            raise ModelValidationError("counts must be nonnegative")
        if int(counts.sum()) != int(self.n):
            raise ModelValidationError("counts must sum to n")
        object.__setattr__(self, "counts", _readonly(counts))
        object.__setattr__(self, "n", int(self.n))

    @property
    def probability(self) -> np.ndarray:
        if self.n == 0:
            raise ModelValidationError("empirical probabilities need n >= 1")
        return self.counts / self.n


def _reduce_rows(A: np.ndarray, alpha: np.ndarray, k: int):
    """Drop rows implied by the normalization row and earlier rows.

    Keeps rank([1; A_kept]) = d_kept + 1, which the tangent dimension
    r = k - 1 - d relies on. A dropped row whose target moment contradicts
    the retained system is an inconsistency, not a redundancy.
    """
    basis = [np.ones(k) / np.sqrt(k)]
    kept, dropped = [], []
    for i, row in enumerate(A):
        res = row.astype(float).copy()
        for b in basis:
            res -= (res @ b) * b
        norm = np.linalg.norm(res)
        if norm > _ROW_DROP_TOL * max(1.0, np.linalg.norm(row)):
            basis.append(res / norm)
            kept.append(i)
        else:
            dropped.append(i)
    if dropped:
        stacked = np.vstack([np.ones((1, k)), A[kept]]) if kept else np.ones((1, k))
        rhs = np.concatenate([[1.0], alpha[kept]]) if kept else np.ones(1)
        for i in dropped:
            coef, *_ = np.linalg.lstsq(stacked.T, A[i].astype(float), rcond=None)
            implied = float(coef @ rhs)
            scale = max(1.0, abs(alpha[i]))
            if abs(alpha[i] - implied) > _ROW_CONSISTENCY_TOL * scale:
                raise ModelValidationError(
                    f"constraint row {i} is dependent but its target moment "
                    f"{alpha[i]!r} contradicts the implied value {implied!r}"
                )
        warnings.warn(
            f"dropped dependent constraint rows {tuple(dropped)}",
            DependentRowWarning,
            stacklevel=3,
        )
    return A[kept], alpha[kept], tuple(dropped)


def validate_model(k: int, Q, A, alpha) -> ConstrainedModel:
    """Check shapes, positivity, and normalization; reduce dependent rows."""
    if not isinstance(k, (int, np.integer)) or k < 2:
        raise ModelValidationError("alphabet size k must be an integer >= 2")
    k = int(k)

    Q = np.asarray(Q, dtype=float)
    if Q.shape != (k,):
        raise ModelValidationError(f"Q must have shape ({k},), got {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise ModelValidationError("Q must be finite")
    if np.any(Q <= 0):
        raise ModelValidationError("Q must be strictly positive")
    if abs(Q.sum() - 1.0) > _Q_SUM_TOL:
        raise ModelValidationError(f"Q must sum to 1 within {_Q_SUM_TOL}, got {Q.sum()!r}")
    Q = Q / Q.sum()

    A = np.asarray(A, dtype=float)
    if A.size == 0:
        A = A.reshape(0, k)
    if A.ndim != 2 or A.shape[1] != k:
        raise ModelValidationError(f"A must have shape (d, {k}), got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ModelValidationError("A must be finite")

    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha.shape != (A.shape[0],):
        raise ModelValidationError(
            f"alpha must have shape ({A.shape[0]},), got {alpha.shape}"
        )
    if not np.all(np.isfinite(alpha)):
        raise ModelValidationError("alpha must be finite")

    if A.shape[0] > 0:
        A, alpha, dropped = _reduce_rows(A, alpha, k)
    else:
        dropped = ()

    B = float(np.max(np.abs(A))) if A.size else 0.0
    return ConstrainedModel(
        k=k,
        Q=_readonly(Q),
        A=_readonly(A),
        alpha=_readonly(alpha),
        B=B,
        dropped_rows=dropped,
    )


def feasibility_check(model: ConstrainedModel) -> FeasibilityReport:
    """LP membership test for alpha in the feature hull {A p : p in simplex}.

    Hull membership is the feasibility of {p >= 0, 1'p = 1, A p = alpha};
    interior membership additionally requires a feasible p with all entries
    strictly positive, tested by maximizing the smallest entry.
    """
    k, d = model.k, model.d
    A_eq = np.vstack([np.ones((1, k)), model.A])
    b_eq = np.concatenate([[1.0], model.alpha])

    res = linprog(np.zeros(k), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * k, method="highs")
    in_hull = res.status == 0

    interior = False
    margin = -np.inf
    if in_hull:
        # variables (p, t); maximize t subject to p_i >= t
        c = np.zeros(k + 1)
        c[-1] = -1.0
        A_eq_t = np.hstack([A_eq, np.zeros((d + 1, 1))])
        A_ub = np.hstack([-np.eye(k), np.ones((k, 1))])
        bounds = [(0, 1)] * k + [(-1, 1)]
        res_t = linprog(
            c, A_ub=A_ub, b_ub=np.zeros(k), A_eq=A_eq_t, b_eq=b_eq, bounds=bounds, method="highs"
        )
        if res_t.status == 0:
            margin = float(res_t.x[-1])
            interior = margin > _INTERIOR_TOL

    return FeasibilityReport(
        alpha_in_hull=bool(in_hull),
        alpha_interior=bool(interior),
        interior_margin=margin,
        rank_A=d,
        reduced_rows=model.dropped_rows,
        tangent_dim=model.tangent_dim,
        zero_dimensional=model.zero_dimensional,
    )


def empirical_measure(sample, k: int) -> TypeVector:
    """Tally a sequence of symbols from {1, ..., k} into a TypeVector."""
    arr = np.asarray(list(sample), dtype=np.int64)
    if arr.size == 0:
        return TypeVector(counts=np.zeros(k, dtype=np.int64), n=0)
    if np.any(arr < 1) or np.any(arr > k):
        bad = arr[(arr < 1) | (arr > k)][0]
        raise OutOfRangeSymbolError(f"symbol {bad} outside alphabet {{1, ..., {k}}}")
    counts = np.bincount(arr - 1, minlength=k)
    return TypeVector(counts=counts, n=int(arr.size))


def model_to_dict(model: ConstrainedModel) -> dict:
    return {
        "k": model.k,
        "Q": model.Q.tolist(),
        "features": model.A.tolist(),
        "alpha": model.alpha.tolist(),
    }


def model_from_dict(payload: dict) -> ConstrainedModel:
    """Build a model from the interchange mapping {k, Q, features, alpha}."""
    if not isinstance(payload, dict):
        raise ModelValidationError("model document must be a JSON object")
    missing = {"k", "Q", "features", "alpha"} - set(payload)
    if missing:
        raise ModelValidationError(f"model document missing keys: {sorted(missing)}")
    return validate_model(payload["k"], payload["Q"], payload["features"], payload["alpha"])

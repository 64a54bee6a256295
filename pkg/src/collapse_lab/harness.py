"""Experiment harness: (n, m) grid sweeps comparing exact and Gaussian predictive laws."""

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .curvature import curvature_report, lanford_radius
from .errors import EmptyFeasibleSetError, GuardError, ModelValidationError
from .model import ConstrainedModel
from .oracle import (
    CollapseBoundInputs,
    collapse_bound,
    feasible_types,
    gaussian_mixture_approx,
    lanford_fixed_point,
    predictive_exact,
    product_law,
    tv_distance,
    window_partition,
)
from .projection import project

SCHEMA_VERSION = 1
_CSV_COLUMNS = (
    "n",
    "m",
    "tau",
    "lambda_min",
    "tv_exact",
    "tv_gaussian",
    "bound",
    "mass_out",
    "rho_ratio",
)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Sweep definition: model, grids, tolerance policy, bound constants, outputs."""

    model: ConstrainedModel
    n_grid: tuple
    m_grid: tuple
    tau_policy: object = "auto"
    constants: object = "fit_at_smallest_n"
    seeds: tuple = ()
    outputs: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.n_grid or not self.m_grid:
            raise ModelValidationError("n_grid and m_grid must be nonempty")
        if min(self.n_grid) < 2:
            raise ModelValidationError("n values must be >= 2")
        if min(self.m_grid) < 1:
            raise ModelValidationError("m values must be >= 1")
        if min(self.n_grid) < max(self.m_grid):
            raise ModelValidationError("every n must be >= max m")
        if isinstance(self.tau_policy, str):
            if self.tau_policy != "auto":
                raise ModelValidationError("tau_policy must be 'auto' or a number")
        else:
            tau = float(self.tau_policy)
            if tau < 0:
                raise ModelValidationError("fixed tau must be nonnegative")
            object.__setattr__(self, "tau_policy", tau)
        if isinstance(self.constants, str):
            if self.constants != "fit_at_smallest_n":
                raise ModelValidationError("constants must be 'fit_at_smallest_n' or a pair")
        else:
            pair = tuple(float(c) for c in self.constants)
            if len(pair) != 2 or pair[0] < 0 or pair[1] < 0:
                raise ModelValidationError("constants pair must be two nonnegative reals")
            object.__setattr__(self, "constants", pair)


@dataclass(frozen=True, eq=False)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    pairs: tuple


@dataclass(frozen=True)
class CellResult:
    n: int
    m: int
    tau: float
    lambda_min: float
    tv_exact: float
    tv_gaussian: float
    bound: float
    mass_out: float
    rho_ratio: float


@dataclass(frozen=True)
class SkippedCell:
    n: int
    m: int
    reason: str


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    rows: tuple
    skipped: tuple
    constants: tuple | None
    rate: RateFit | None
    csv: str
    summary: dict
    exit_code: int


def rate_fit(xs, ys) -> RateFit:
    """Ordinary least squares on (log xs, log ys)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ModelValidationError("xs and ys must be 1-d with matching length")
    if xs.size < 3:
        raise ModelValidationError("need at least 3 pairs")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ModelValidationError("rate fit needs positive values")
    lx = np.log(xs)
    ly = np.log(ys)
    vx = float(np.var(lx))
    if vx == 0.0:
        raise ModelValidationError("x values are all identical")
    slope = float(np.cov(lx, ly, bias=True)[0, 1] / vx)
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return RateFit(
        slope=slope,
        intercept=intercept,
        r_squared=r_squared,
        pairs=tuple(zip(lx.tolist(), ly.tolist())),
    )


def _bound_terms(n: int, m: int, lambda_min: float, p_star_min: float):
    rate = m * math.sqrt(math.log(n) / (n * lambda_min))
    burn_in = m**2 / (n * p_star_min)
    return rate, burn_in


def _thread_count(n_cells: int, threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("COLLAPSE_LAB_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise ModelValidationError("thread count must be >= 1")
    return max(1, min(threads, n_cells))


def _format_value(value) -> str:
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def collapse_cell(model, proj, curv, n: int, m: int, tau: float | None = None) -> CellResult:
    """Evaluate one (n, m) cell of the collapse diagnostic.

    tau defaults to B / (2n). The bound column is left as nan; callers
    fill it in once constants are known.
    """
    if tau is None:
        tau = model.B / (2.0 * n)
    ensemble = feasible_types(model, n, tau)
    exact = predictive_exact(ensemble, m)
    gauss = gaussian_mixture_approx(model, proj, curv, n, m)
    tv_exact = tv_distance(exact, product_law(proj.p_star, m))
    tv_gaussian = tv_distance(gauss, exact)
    window = lanford_radius(curv.lambda_min, n)
    mass = window_partition(ensemble, window, proj.p_star)
    fixed_point = lanford_fixed_point(ensemble, proj, curv)
    return CellResult(
        n=n,
        m=m,
        tau=float(tau),
        lambda_min=float(curv.lambda_min),
        tv_exact=tv_exact,
        tv_gaussian=tv_gaussian,
        bound=math.nan,
        mass_out=mass.mass_out,
        rho_ratio=fixed_point.ratio,
    )


def cell_bound(row: CellResult, constants, p_star_min: float) -> float:
    """Bound column for a finished cell given (C_geo, C_geo_prime)."""
    return collapse_bound(
        CollapseBoundInputs(
            C_geo=constants[0],
            C_geo_prime=constants[1],
            p_star_min=p_star_min,
            lambda_min=row.lambda_min,
            n=row.n,
            m=row.m,
        )
    )


def run_experiment(config: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    """Run every (n, m) cell, fit bound constants, emit CSV plus JSON summary.

    Guard refusals and empty feasible sets skip the cell and force exit
    code 2; anything else is a hard error. Results are collected in grid
    order regardless of thread count, so output bytes are reproducible.
    """
    model = config.model
    proj = project(model)
    curv = curvature_report(model, proj)
    p_star_min = float(proj.p_star.min())
    cells = [(n, m) for n in config.n_grid for m in config.m_grid]

    def worker(cell):
        n, m = cell
        tau = None if config.tau_policy == "auto" else config.tau_policy
        try:
            return collapse_cell(model, proj, curv, n, m, tau)
        except (GuardError, EmptyFeasibleSetError) as exc:
            return SkippedCell(n=n, m=m, reason=f"{type(exc).__name__}: {exc}")

    with ThreadPoolExecutor(max_workers=_thread_count(len(cells), threads)) as pool:
        outcomes = list(pool.map(worker, cells))

    rows = [r for r in outcomes if isinstance(r, CellResult)]
    skipped = [r for r in outcomes if isinstance(r, SkippedCell)]

    constants = None
    if config.constants == "fit_at_smallest_n":
        anchor = next(
            (r for r in rows if r.n == min(config.n_grid) and r.m == min(config.m_grid)),
            None,
        )
        if anchor is not None:
            t1, t2 = _bound_terms(anchor.n, anchor.m, anchor.lambda_min, p_star_min)
            c = anchor.tv_exact / (t1 + t2)
            constants = (c, c)
    else:
        constants = config.constants

    finished = []
    for row in rows:
        bound = math.nan if constants is None else cell_bound(row, constants, p_star_min)
        finished.append(replace(row, bound=float(bound)))
    rows = finished

    rate = None
    m_low = min(config.m_grid)
    ladder = [r for r in rows if r.m == m_low and r.tv_exact > 0]
    if len(ladder) >= 3:
        xs = [math.sqrt(math.log(r.n) / r.n) for r in ladder]
        ys = [r.tv_exact for r in ladder]
        rate = rate_fit(xs, ys)

    lines = [f"# schema_version={SCHEMA_VERSION}", ",".join(_CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_format_value(getattr(row, col)) for col in _CSV_COLUMNS))
    csv_text = "\n".join(lines) + "\n"

    exit_code = 2 if skipped else 0
    summary = {
        "cells": len(cells),
        "completed": len(rows),
        "constants": None if constants is None else {
            "C_geo": constants[0],
            "C_geo_prime": constants[1],
        },
        "exit_code": exit_code,
        "rate_fit": None if rate is None else {
            "slope": rate.slope,
            "intercept": rate.intercept,
            "r_squared": rate.r_squared,
            "n_pairs": len(rate.pairs),
        },
        "schema_version": SCHEMA_VERSION,
        "seeds": list(config.seeds),
        "skipped": [{"n": s.n, "m": s.m, "reason": s.reason} for s in skipped],
        "tau_policy": config.tau_policy,
    }

    if config.outputs is not None:
        out_dir = Path(config.outputs)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "sweep.csv").write_text(csv_text)
        (out_dir / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n"
        )

    return ExperimentResult(
        rows=tuple(rows),
        skipped=tuple(skipped),
        constants=constants,
        rate=rate,
        csv=csv_text,
        summary=summary,
        exit_code=exit_code,
    )

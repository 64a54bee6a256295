import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from collapse_lab import ConstrainedModel, dual_newton, kl_divergence, project, tilted_distribution
from collapse_lab.errors import (
    BoundaryAlphaError,
    InfeasibleAlphaError,
    MaxIterationsError,
    ModelValidationError,
    SingularHessianError,
)
from collapse_lab.model import _readonly, validate_model


def two_point(alpha, q=(0.5, 0.5)):
    return validate_model(2, q, [[1.0, 2.0]], [alpha])


def test_two_point_closed_form():
    # argmin of D(p||Q) subject to mean alpha is (2-alpha, alpha-1)
    for alpha in np.arange(1.1, 1.95, 0.1):
        proj = dual_newton(two_point(alpha))
        assert_allclose(proj.p_star, [2.0 - alpha, alpha - 1.0], atol=1e-9)
        assert proj.kkt_residual <= 1e-10


def test_two_point_mesh_argmin():
    q = np.array([0.3, 0.7])
    proj = dual_newton(two_point(1.5, q=q))
    t = np.arange(1e-4, 1.0, 1e-4)
    kl = t * np.log(t / q[0]) + (1 - t) * np.log((1 - t) / q[1])
    feasible = np.abs(t * 1.0 + (1 - t) * 2.0 - 1.5) <= 5e-4
    best = t[feasible][np.argmin(kl[feasible])]
    assert abs(proj.p_star[0] - best) <= 1e-3


def test_f1_mesh_argmin(f1_model):
    # feasible set is the closed-form line p = (t, 1-2t, t)
    proj = project(f1_model)
    t = np.arange(1e-5, 0.5, 1e-5)
    p = np.stack([t, 1 - 2 * t, t], axis=1)
    kl = np.sum(p * np.log(p / f1_model.Q[None, :]), axis=1)
    assert abs(proj.p_star[0] - t[np.argmin(kl)]) <= 1e-3
    assert_allclose(proj.p_star[0], proj.p_star[2], atol=1e-12)


def test_kl_frozen_values():
    assert_allclose(kl_divergence([1.0, 0.0], [0.5, 0.5]), 0.6931471805599453, rtol=0, atol=1e-15)
    assert kl_divergence([0.25, 0.75], [0.25, 0.75]) == 0.0
    with pytest.raises(ModelValidationError):
        kl_divergence([0.5, 0.5], [1.0, 0.0])
    with pytest.raises(ModelValidationError):
        kl_divergence([0.5, 0.5], [0.5])


def test_pythagorean_identity(f1_model):
    # D(P||Q) = D(P||P*) + D(P*||Q) for every feasible P
    proj = project(f1_model)
    q = f1_model.Q
    for t in (0.05, 0.1, 0.25, 0.4, 0.45):
        p = np.array([t, 1 - 2 * t, t])
        gap = kl_divergence(p, q) - kl_divergence(p, proj.p_star) - kl_divergence(proj.p_star, q)
        assert abs(gap) <= 1e-8


def test_dual_value_equals_divergence(f1_model):
    proj = project(f1_model)
    assert_allclose(proj.dual_value, kl_divergence(proj.p_star, f1_model.Q), atol=1e-12)


def test_permutation_invariance(f1_model):
    perm = np.array([2, 0, 1])
    permuted = validate_model(
        3, f1_model.Q[perm], [f1_model.A[0, perm]], f1_model.alpha
    )
    assert_allclose(project(permuted).p_star, project(f1_model).p_star[perm], atol=1e-12)


def test_singleton_feasible_set_ignores_base():
    # alpha pins both coordinates of the two-point family
    a = dual_newton(two_point(1.5, q=(0.9, 0.1)))
    b = dual_newton(two_point(1.5, q=(0.1, 0.9)))
    assert_allclose(a.p_star, [0.5, 0.5], atol=1e-10)
    assert_allclose(a.p_star, b.p_star, atol=1e-10)


def test_base_rescaling_invariance(f1_model):
    base = 3.7 * f1_model.Q
    scaled = dual_newton(f1_model, base=base)
    plain = dual_newton(f1_model)
    assert_allclose(scaled.p_star, plain.p_star, atol=1e-12)
    assert_allclose(scaled.log_Z - plain.log_Z, math.log(3.7), atol=1e-12)


def test_tilt_normalization_random_multipliers(f1_model):
    rng = np.random.default_rng(11)
    for _ in range(25):
        lam = rng.uniform(-40, 40, size=1)
        p = tilted_distribution(f1_model, None, lam)
        assert np.all(p > 0)
        assert_allclose(p.sum(), 1.0, atol=1e-12)


def test_infeasible_and_boundary_gates(f1_model):
    with pytest.raises(InfeasibleAlphaError):
        project(validate_model(3, f1_model.Q, f1_model.A, [3.5]))
    with pytest.raises(BoundaryAlphaError):
        project(validate_model(3, f1_model.Q, f1_model.A, [3.0]))


def test_boundary_blowup_without_gate():
    # dual_newton has no LP gate; the diverging multiplier must be caught
    with pytest.raises(BoundaryAlphaError):
        dual_newton(two_point(2.5))


def test_ungated_solver_converges_at_exact_boundary():
    # at a hull vertex the residual hits tol before the multiplier diverges;
    # the ungated solver returns the limiting vertex tilt
    proj = dual_newton(two_point(1.0))
    assert proj.p_star[0] > 1.0 - 1e-9
    assert proj.p_star[1] < 1e-9
    assert proj.kkt_residual <= 1e-10


def test_max_iterations(f1_model):
    with pytest.raises(MaxIterationsError):
        dual_newton(f1_model, max_iter=0)


def test_singular_hessian_on_unreduced_model():
    # bypass validate_model to feed collinear features straight to the solver
    model = ConstrainedModel(
        k=3,
        Q=_readonly(np.array([0.2, 0.5, 0.3])),
        A=_readonly(np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])),
        alpha=_readonly(np.array([2.0, 4.0])),
        B=6.0,
    )
    with pytest.raises(SingularHessianError):
        dual_newton(model)


def test_bad_base_and_tol(f1_model):
    with pytest.raises(ModelValidationError):
        dual_newton(f1_model, base=[0.5, 0.5])
    with pytest.raises(ModelValidationError):
        dual_newton(f1_model, base=[0.2, -0.5, 0.3])
    with pytest.raises(ModelValidationError):
        dual_newton(f1_model, tol=0.0)

"""Finite-difference verification machinery."""

import numpy as np
import pytest

from pintoc import (
    BarrierAugmentation,
    BoxConstraint,
    DerivativeCheckError,
    FiniteDiffCost,
    FiniteDiffDynamics,
    LinearDynamics,
    PendulumDynamics,
    QuadraticCost,
    check_derivatives,
)


def test_linear_dynamics_exact():
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(3, 3)), rng.normal(size=(3, 2))
    dyn = LinearDynamics(A, B, horizon=4)
    report = check_derivatives(dyn, (0, rng.normal(size=3), rng.normal(size=2)))
    assert report.ok
    # the Jacobians of an affine map are recovered by central differences
    # to machine-level accuracy
    assert report["fx"].max_abs_err < 1e-9
    assert report["fu"].max_abs_err < 1e-9
    assert report["fxx"].max_abs_err < 1e-9


def test_pendulum_jacobian_close_to_fd():
    dyn = PendulumDynamics(horizon=1)
    report = check_derivatives(dyn, (0, np.array([1.0, 0.5]), np.array([1.0])),
                               tolerance=1e-5, step=1e-6)
    assert report.ok
    assert report["fx"].max_abs_err < 1e-5


def test_barrier_symmetric_point_zero_gradient():
    box = BoxConstraint(1, 1, control_lower=-5.0, control_upper=5.0)
    aug = BarrierAugmentation(box, mu=0.1)
    grad = aug.cu(0, np.zeros(1), np.zeros(1))
    assert np.allclose(grad, 0.0)
    report = check_derivatives(aug, (0, np.zeros(1), np.zeros(1)))
    assert report.ok


def test_mismatch_names_derivative():
    class Broken(PendulumDynamics):
        def fu(self, t, x, u):
            return super().fu(t, x, u) + 0.5

    with pytest.raises(DerivativeCheckError, match="fu"):
        check_derivatives(Broken(horizon=1), (0, np.array([0.2, 0.1]), np.array([0.3])))


def test_quadratic_cost_check():
    rng = np.random.default_rng(2)
    cost = QuadraticCost(np.diag([2.0, 1.0]), np.eye(1), np.diag([3.0, 3.0]),
                         x_goal=np.array([0.5, -0.5]))
    report = check_derivatives(cost, (0, rng.normal(size=2), rng.normal(size=1)))
    assert report.ok


def test_constraint_model_check():
    box = BoxConstraint(2, 1, control_lower=-2.0, control_upper=2.0,
                        state_upper=(1.0, np.inf))
    report = check_derivatives(box, (0, np.array([0.2, 0.0]), np.array([0.1])))
    assert report.ok


def test_fd_fallback_models_agree_with_analytic(rng):
    analytic = PendulumDynamics(horizon=3)
    fd = FiniteDiffDynamics(lambda t, x, u: analytic.f(t, x, u),
                            horizon=3, d_x=2, d_u=1)
    x, u = rng.normal(size=2), rng.normal(size=1)
    assert np.allclose(fd.fx(0, x, u), analytic.fx(0, x, u), atol=1e-6)
    assert np.allclose(fd.fu(0, x, u), analytic.fu(0, x, u), atol=1e-6)
    assert np.allclose(fd.fxx(0, x, u), analytic.fxx(0, x, u), atol=1e-5)
    assert np.allclose(fd.fxu(0, x, u), analytic.fxu(0, x, u), atol=1e-5)

    cost = QuadraticCost(np.eye(2), np.eye(1), 2 * np.eye(2))
    fd_cost = FiniteDiffCost(lambda t, x, u: cost.l(t, x, u),
                             lambda x: cost.terminal(x))
    assert np.allclose(fd_cost.lx(0, x, u), cost.lx(0, x, u), atol=1e-6)
    assert np.allclose(fd_cost.lxx(0, x, u), cost.lxx(0, x, u), atol=1e-5)
    assert np.allclose(fd_cost.lxu(0, x, u), cost.lxu(0, x, u), atol=1e-5)
    assert np.allclose(fd_cost.terminal_xx(x), cost.terminal_xx(x), atol=1e-5)

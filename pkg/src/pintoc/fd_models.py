"""Finite-difference implementations of the model interfaces.

These wrap plain callables so arbitrary user functions can be plugged into
the solvers without hand-deriving Jacobians and Hessians.  They trade
accuracy and speed for convenience and are intended for prototyping and
tests; the shipped benchmark systems provide analytic derivatives.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .derivcheck import fd_hessian, fd_jacobian
from .problem import CostModel, DynamicsModel


class FiniteDiffDynamics(DynamicsModel):
    """Dynamics model with derivatives from central differences of ``fn``."""

    def __init__(self, fn: Callable[[int, np.ndarray, np.ndarray], np.ndarray],
                 horizon: int, d_x: int, d_u: int,
                 step: float = 1e-6, hess_step: float = 1e-4):
        super().__init__(horizon, d_x, d_u)
        self._fn = fn
        self._step = step
        self._hess_step = hess_step

    def f(self, t, x, u):
        return np.asarray(self._fn(t, x, u), dtype=float)

    def fx(self, t, x, u):
        return fd_jacobian(lambda xx: self._fn(t, xx, u), x, self._step)

    def fu(self, t, x, u):
        return fd_jacobian(lambda uu: self._fn(t, x, uu), u, self._step)

    def fxx(self, t, x, u):
        return fd_hessian(lambda xx: self._fn(t, xx, u), x, self._hess_step)

    def fuu(self, t, x, u):
        return fd_hessian(lambda uu: self._fn(t, x, uu), u, self._hess_step)

    def fxu(self, t, x, u):
        h = self._hess_step
        jac_u = lambda xx: fd_jacobian(lambda uu: self._fn(t, xx, uu), u, h)
        return np.swapaxes(fd_jacobian(jac_u, x, h), 1, 2)


class FiniteDiffCost(CostModel):
    """Cost model differentiating ``stage(t, x, u)`` and ``term(x)`` numerically."""

    def __init__(self, stage: Callable[[int, np.ndarray, np.ndarray], float],
                 term: Callable[[np.ndarray], float],
                 step: float = 1e-6, hess_step: float = 1e-4):
        self._stage = stage
        self._term = term
        self._step = step
        self._hess_step = hess_step

    def l(self, t, x, u):
        return float(self._stage(t, x, u))

    def lx(self, t, x, u):
        return fd_jacobian(lambda xx: self._stage(t, xx, u), x, self._step)

    def lu(self, t, x, u):
        return fd_jacobian(lambda uu: self._stage(t, x, uu), u, self._step)

    def lxx(self, t, x, u):
        return fd_hessian(lambda xx: self._stage(t, xx, u), x, self._hess_step)

    def luu(self, t, x, u):
        return fd_hessian(lambda uu: self._stage(t, x, uu), u, self._hess_step)

    def lxu(self, t, x, u):
        h = self._hess_step
        grad_x = lambda uu: fd_jacobian(lambda xx: self._stage(t, xx, uu), x, h)
        return fd_jacobian(grad_x, u, h)

    def terminal(self, x):
        return float(self._term(x))

    def terminal_x(self, x):
        return fd_jacobian(self._term, x, self._step)

    def terminal_xx(self, x):
        return fd_hessian(self._term, x, self._hess_step)

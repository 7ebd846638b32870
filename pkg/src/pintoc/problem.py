"""Problem data model: trajectories, model interfaces, and cost evaluation.

A discrete-time control problem is described by three model objects
(dynamics, cost, constraints) plus an optional cost augmentation (log-barrier
or consensus penalty) supplied by an outer solver.  All evaluators take the
stage index ``t`` first so time-varying problems are expressible; every
object is immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, DivergenceError, InfeasibleError


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Trajectory:
    """A state sequence of length N+1 paired with N controls."""

    states: np.ndarray    # (N+1, d_x)
    controls: np.ndarray  # (N, d_u)

    def __post_init__(self):
        object.__setattr__(self, "states", _frozen(np.atleast_2d(self.states)))
        object.__setattr__(self, "controls", _frozen(np.atleast_2d(self.controls)))
        if self.states.shape[0] != self.controls.shape[0] + 1:
            raise DimensionError(
                f"need len(states) == len(controls) + 1, got "
                f"{self.states.shape[0]} states and {self.controls.shape[0]} controls"
            )
        if not np.all(np.isfinite(self.states)):
            raise DimensionError("trajectory states contain non-finite values")
        if not np.all(np.isfinite(self.controls)):
            raise DimensionError("trajectory controls contain non-finite values")

    @property
    def horizon(self) -> int:
        return self.controls.shape[0]

    @property
    def d_x(self) -> int:
        return self.states.shape[1]

    @property
    def d_u(self) -> int:
        return self.controls.shape[1]


class DynamicsModel(abc.ABC):
    """Discrete map ``x_{t+1} = f_t(x_t, u_t)`` with analytic derivatives.

    Hessians use the output-component-first layout: ``fxx(t, x, u)[k]`` is
    the symmetric matrix of second derivatives of output component ``k``.
    """

    horizon: int
    d_x: int
    d_u: int

    def __init__(self, horizon: int, d_x: int, d_u: int):
        if horizon < 1 or d_x < 1 or d_u < 1:
            raise DimensionError("horizon, d_x and d_u must all be positive")
        self.horizon = horizon
        self.d_x = d_x
        self.d_u = d_u

    @abc.abstractmethod
    def f(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def fx(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def fu(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def fxx(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def fuu(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def fxu(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    # Batch evaluation over all stages at once (row index == stage index).
    # The defaults loop over the per-stage evaluators; concrete models may
    # override them with vectorized versions, which the passes exploit.

    def fx_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.stack([self.fx(t, xs[t], us[t]) for t in range(len(us))])

    def fu_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.stack([self.fu(t, xs[t], us[t]) for t in range(len(us))])

    def fxx_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.stack([self.fxx(t, xs[t], us[t]) for t in range(len(us))])

    def fuu_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.stack([self.fuu(t, xs[t], us[t]) for t in range(len(us))])

    def fxu_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.stack([self.fxu(t, xs[t], us[t]) for t in range(len(us))])


class CostModel(abc.ABC):
    """Stage cost ``l_t(x, u)`` and terminal cost with analytic derivatives."""

    @abc.abstractmethod
    def l(self, t: int, x: np.ndarray, u: np.ndarray) -> float: ...

    @abc.abstractmethod
    def lx(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def lu(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def lxx(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def luu(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def lxu(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Cross second derivative, shape (d_x, d_u)."""

    @abc.abstractmethod
    def terminal(self, x: np.ndarray) -> float: ...

    @abc.abstractmethod
    def terminal_x(self, x: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def terminal_xx(self, x: np.ndarray) -> np.ndarray: ...

    # batch counterparts, overridable with vectorized implementations

    def l_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.array([self.l(t, xs[t], us[t]) for t in range(len(us))])

    def lx_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.stack([self.lx(t, xs[t], us[t]) for t in range(len(us))])

    def lu_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.stack([self.lu(t, xs[t], us[t]) for t in range(len(us))])

    def lxx_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.stack([self.lxx(t, xs[t], us[t]) for t in range(len(us))])

    def luu_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.stack([self.luu(t, xs[t], us[t]) for t in range(len(us))])

    def lxu_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.stack([self.lxu(t, xs[t], us[t]) for t in range(len(us))])


class ConstraintModel(abc.ABC):
    """Stage inequality constraints, satisfied when every component is <= 0.

    State constraints ``g_t(x)`` and control constraints ``h_t(u)`` are kept
    separate; ``w(t, x, u)`` stacks them as ``[g; h]``.  Per-component
    Hessians use the component-first layout like :class:`DynamicsModel`.
    """

    n_state: int    # number of g components (m_g)
    n_control: int  # number of h components (m_h)

    @abc.abstractmethod
    def g(self, t: int, x: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def gx(self, t: int, x: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def gxx(self, t: int, x: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def h(self, t: int, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def hu(self, t: int, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def huu(self, t: int, u: np.ndarray) -> np.ndarray: ...

    # batch counterparts, overridable with vectorized implementations

    def g_batch(self, xs: np.ndarray) -> np.ndarray:
        return np.stack([self.g(t, xs[t]) for t in range(len(xs))])

    def gx_batch(self, xs: np.ndarray) -> np.ndarray:
        return np.stack([self.gx(t, xs[t]) for t in range(len(xs))])

    def gxx_batch(self, xs: np.ndarray) -> np.ndarray:
        return np.stack([self.gxx(t, xs[t]) for t in range(len(xs))])

    def h_batch(self, us: np.ndarray) -> np.ndarray:
        return np.stack([self.h(t, us[t]) for t in range(len(us))])

    def hu_batch(self, us: np.ndarray) -> np.ndarray:
        return np.stack([self.hu(t, us[t]) for t in range(len(us))])

    def huu_batch(self, us: np.ndarray) -> np.ndarray:
        return np.stack([self.huu(t, us[t]) for t in range(len(us))])

    def w_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.concatenate([self.g_batch(xs[:len(us)]), self.h_batch(us)], axis=1)

    @property
    def n_total(self) -> int:
        return self.n_state + self.n_control

    def w(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.concatenate([self.g(t, x), self.h(t, u)])

    def max_violation(self, traj: Trajectory) -> float:
        """Largest constraint value over all stages (<= 0 means feasible)."""
        if self.n_total == 0:
            return -np.inf
        return float(self.w_batch(traj.states[:-1], traj.controls).max())


class BoxConstraint(ConstraintModel):
    """Componentwise bounds encoded as one-sided constraints.

    Bounds ``lb <= u <= ub`` become ``h(u) = [u - ub; lb - u]`` (and likewise
    for states), so the feasible set is ``{h <= 0}`` and the Euclidean
    projection used by ADMM is a componentwise clamp.  Infinite bounds are
    dropped from the stacking.
    """

    def __init__(self, d_x: int, d_u: int,
                 control_lower=None, control_upper=None,
                 state_lower=None, state_upper=None):
        self.d_x = d_x
        self.d_u = d_u
        self.control_lower = self._bound(control_lower, d_u, -np.inf)
        self.control_upper = self._bound(control_upper, d_u, np.inf)
        self.state_lower = self._bound(state_lower, d_x, -np.inf)
        self.state_upper = self._bound(state_upper, d_x, np.inf)
        if np.any(self.control_lower >= self.control_upper) or np.any(
                self.state_lower >= self.state_upper):
            raise DimensionError("box bounds must satisfy lower < upper")
        # index lists of finite one-sided rows, fixed at construction
        self._gu = np.flatnonzero(np.isfinite(self.state_upper))
        self._gl = np.flatnonzero(np.isfinite(self.state_lower))
        self._hu = np.flatnonzero(np.isfinite(self.control_upper))
        self._hl = np.flatnonzero(np.isfinite(self.control_lower))
        self.n_state = len(self._gu) + len(self._gl)
        self.n_control = len(self._hu) + len(self._hl)
        gx = np.zeros((self.n_state, d_x))
        for r, i in enumerate(self._gu):
            gx[r, i] = 1.0
        for r, i in enumerate(self._gl):
            gx[len(self._gu) + r, i] = -1.0
        hu = np.zeros((self.n_control, d_u))
        for r, i in enumerate(self._hu):
            hu[r, i] = 1.0
        for r, i in enumerate(self._hl):
            hu[len(self._hu) + r, i] = -1.0
        self._gx = _frozen(gx)
        self._hu_jac = _frozen(hu)

    @staticmethod
    def _bound(value, dim: int, default: float) -> np.ndarray:
        if value is None:
            return _frozen(np.full(dim, default))
        arr = np.broadcast_to(np.asarray(value, dtype=float), (dim,))
        return _frozen(arr)

    def g(self, t, x):
        x = np.asarray(x, dtype=float)
        return np.concatenate([
            x[self._gu] - self.state_upper[self._gu],
            self.state_lower[self._gl] - x[self._gl],
        ])

    def gx(self, t, x):
        return self._gx

    def gxx(self, t, x):
        return np.zeros((self.n_state, self.d_x, self.d_x))

    def h(self, t, u):
        u = np.asarray(u, dtype=float)
        return np.concatenate([
            u[self._hu] - self.control_upper[self._hu],
            self.control_lower[self._hl] - u[self._hl],
        ])

    def hu(self, t, u):
        return self._hu_jac

    def huu(self, t, u):
        return np.zeros((self.n_control, self.d_u, self.d_u))

    def g_batch(self, xs):
        xs = np.asarray(xs, dtype=float)
        return np.concatenate([
            xs[:, self._gu] - self.state_upper[self._gu],
            self.state_lower[self._gl] - xs[:, self._gl],
        ], axis=1)

    def gx_batch(self, xs):
        return np.broadcast_to(self._gx, (len(xs),) + self._gx.shape)

    def gxx_batch(self, xs):
        return np.zeros((len(xs), self.n_state, self.d_x, self.d_x))

    def h_batch(self, us):
        us = np.asarray(us, dtype=float)
        return np.concatenate([
            us[:, self._hu] - self.control_upper[self._hu],
            self.control_lower[self._hl] - us[:, self._hl],
        ], axis=1)

    def hu_batch(self, us):
        return np.broadcast_to(self._hu_jac, (len(us),) + self._hu_jac.shape)

    def huu_batch(self, us):
        return np.zeros((len(us), self.n_control, self.d_u, self.d_u))

    def clamp_controls(self, controls: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Clip controls into the box, optionally shrunk by a relative margin."""
        lo, hi = self.control_lower, self.control_upper
        if margin:
            center = np.where(np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi), 0.0)
            lo = np.where(np.isfinite(lo), center + (1 - margin) * (lo - center), lo)
            hi = np.where(np.isfinite(hi), center + (1 - margin) * (hi - center), hi)
        return np.clip(controls, lo, hi)


class AugmentedCost(abc.ABC):
    """Extra per-stage cost ``c_t(x, u)`` added by an outer solver.

    ``variant`` identifies the flavor: ``"zero"``, ``"barrier"`` (log-barrier
    with parameter mu, defined only on the strict interior) or ``"admm"``
    (quadratic consensus penalty with parameters rho, z, v).
    """

    variant: str = "zero"

    @abc.abstractmethod
    def c(self, t: int, x: np.ndarray, u: np.ndarray) -> float: ...

    @abc.abstractmethod
    def cx(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def cu(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def cxx(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def cuu(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def cxu(self, t: int, x: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    # batch counterparts, overridable with vectorized implementations

    def c_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.array([self.c(t, xs[t], us[t]) for t in range(len(us))])

    def cx_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.stack([self.cx(t, xs[t], us[t]) for t in range(len(us))])

    def cu_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.stack([self.cu(t, xs[t], us[t]) for t in range(len(us))])

    def cxx_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.stack([self.cxx(t, xs[t], us[t]) for t in range(len(us))])

    def cuu_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.stack([self.cuu(t, xs[t], us[t]) for t in range(len(us))])

    def cxu_batch(self, xs: np.ndarray, us: np.ndarray) -> np.ndarray:
        return np.stack([self.cxu(t, xs[t], us[t]) for t in range(len(us))])


class ZeroAugmentation(AugmentedCost):
    """No augmentation; reduces the augmented objective to the plain cost."""

    variant = "zero"

    def c(self, t, x, u):
        return 0.0

    def cx(self, t, x, u):
        return np.zeros(len(x))

    def cu(self, t, x, u):
        return np.zeros(len(u))

    def cxx(self, t, x, u):
        return np.zeros((len(x), len(x)))

    def cuu(self, t, x, u):
        return np.zeros((len(u), len(u)))

    def cxu(self, t, x, u):
        return np.zeros((len(x), len(u)))

    def c_batch(self, xs, us):
        return np.zeros(len(us))

    def cx_batch(self, xs, us):
        return np.zeros(xs[:len(us)].shape)

    def cu_batch(self, xs, us):
        return np.zeros(us.shape)

    def cxx_batch(self, xs, us):
        n, d_x = len(us), xs.shape[1]
        return np.zeros((n, d_x, d_x))

    def cuu_batch(self, xs, us):
        n, d_u = us.shape
        return np.zeros((n, d_u, d_u))

    def cxu_batch(self, xs, us):
        return np.zeros((len(us), xs.shape[1], us.shape[1]))


@dataclass(frozen=True)
class ControlProblem:
    """Bundle of the models describing one constrained control problem."""

    dynamics: DynamicsModel
    cost: CostModel
    constraints: ConstraintModel | None = None

    @property
    def horizon(self) -> int:
        return self.dynamics.horizon


def rollout(model: DynamicsModel, x1: np.ndarray, controls: np.ndarray) -> Trajectory:
    """Propagate ``controls`` through the dynamics starting from ``x1``.

    Raises:
        DivergenceError: if any produced state is non-finite, reporting the
            first offending step.
        DimensionError: on shape mismatch with the model.
    """
    x1 = np.asarray(x1, dtype=float).reshape(-1)
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    if x1.shape[0] != model.d_x:
        raise DimensionError(f"x1 has dimension {x1.shape[0]}, model wants {model.d_x}")
    if controls.shape != (model.horizon, model.d_u):
        raise DimensionError(
            f"controls shape {controls.shape} does not match "
            f"(N, d_u) = ({model.horizon}, {model.d_u})"
        )
    states = np.empty((model.horizon + 1, model.d_x))
    states[0] = x1
    for t in range(model.horizon):
        nxt = np.asarray(model.f(t, states[t], controls[t]), dtype=float)
        if not np.all(np.isfinite(nxt)):
            raise DivergenceError(t + 1)
        states[t + 1] = nxt
    return Trajectory(states, controls)


def total_cost(cost: CostModel, aug: AugmentedCost, traj: Trajectory) -> float:
    """Augmented objective: terminal cost plus sum of ``l_t + c_t``.

    Raises:
        InfeasibleError: if a barrier augmentation is evaluated outside the
            strict interior.
    """
    xs, us = traj.states[:-1], traj.controls
    total = cost.terminal(traj.states[-1])
    total += float(np.sum(cost.l_batch(xs, us))) + float(np.sum(aug.c_batch(xs, us)))
    return float(total)

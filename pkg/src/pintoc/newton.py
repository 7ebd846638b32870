"""Iterative Newton method built from the three scan passes.

Each iteration computes adjoints, expands the augmented Lagrangian to second
order, solves the regularized quadratic subproblem through the value and
propagation scans, and applies the control step.  States are re-rolled
through the nonlinear dynamics after every accepted step so iterates stay
dynamically feasible; the additive state deviations are used only inside the
quadratic model.  Step acceptance and the regularization weight follow the
Levenberg-Marquardt trust-region rule driven by the gain ratio between the
actual and model-predicted cost reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    ConditioningError,
    DefinitenessError,
    DivergenceError,
    InfeasibleError,
    SolverStalledError,
)
from .passes import costate_pass, hamiltonian_expansion, propagation_pass, value_pass
from .problem import (
    AugmentedCost,
    CostModel,
    DynamicsModel,
    Trajectory,
    ZeroAugmentation,
    rollout,
    total_cost,
)
from .scan import EXECUTORS, SEQUENTIAL

ALPHA_MAX = 1e12

TERM_COST = "converged_cost"
TERM_STEP = "converged_step"
TERM_MAX_ITERS = "max_iters"
TERM_STALLED = "stalled"


@dataclass(frozen=True)
class NewtonOptions:
    alpha0: float = 1.0       # initial regularization weight
    nu0: float = 2.0          # growth factor seed for rejected steps
    inner_tol: float = 1e-8   # relative cost-change / step-norm tolerance
    max_iters: int = 100
    executor: str = SEQUENTIAL

    def __post_init__(self):
        if self.alpha0 < 0:
            raise ValueError("alpha0 must be >= 0")
        if self.nu0 <= 1:
            raise ValueError("nu0 must be > 1")
        if self.inner_tol <= 0:
            raise ValueError("inner_tol must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.executor not in EXECUTORS:
            raise ValueError(f"executor must be one of {EXECUTORS}")


@dataclass(frozen=True)
class IterationRecord:
    cost: float        # augmented cost after the iteration
    alpha: float       # regularization used for this step
    gain_ratio: float  # actual/predicted reduction (-inf marks a hard reject)
    step_norm: float   # max-abs control step
    accepted: bool


@dataclass(frozen=True)
class NewtonReport:
    iterations: int
    final_cost: float
    history: tuple[IterationRecord, ...]
    termination: str

    @property
    def converged(self) -> bool:
        return self.termination in (TERM_COST, TERM_STEP)

    @property
    def accepted_steps(self) -> int:
        return sum(1 for rec in self.history if rec.accepted)


def gain_ratio(actual_reduction: float, predicted_reduction: float) -> float:
    """Trust-region gain ratio; -inf when the model predicts no decrease."""
    if predicted_reduction <= 0:
        return -math.inf
    return actual_reduction / predicted_reduction


def regularization_update(alpha: float, nu: float, ratio: float
                          ) -> tuple[float, float, bool]:
    """Levenberg-Marquardt weight update from the gain ratio.

    A positive ratio accepts the step and shrinks ``alpha`` by up to a factor
    of three; otherwise the step is rejected and ``alpha`` grows by ``nu``,
    which itself doubles to escape persistent rejection.
    """
    if ratio > 0:
        return alpha * max(1.0 / 3.0, 1.0 - (2.0 * ratio - 1.0) ** 3), 2.0, True
    return alpha * nu, 2.0 * nu, False


def predicted_reduction(dus: np.ndarray, d: np.ndarray, alpha: float) -> float:
    """Model decrease of the regularized step: 0.5 * sum du^T (alpha*du - d)."""
    return 0.5 * float(alpha * np.sum(dus * dus) - np.sum(dus * d))


def _check_consistent(dyn: DynamicsModel, traj: Trajectory) -> None:
    for t in range(traj.horizon):
        predicted = dyn.f(t, traj.states[t], traj.controls[t])
        gap = np.max(np.abs(predicted - traj.states[t + 1]))
        if gap > 1e-8 * (1.0 + np.max(np.abs(predicted))):
            raise ValueError(
                f"initial trajectory is not dynamically consistent at step {t} "
                f"(gap {gap:.3e}); build it with rollout()"
            )


def newton_solve(dyn: DynamicsModel, cost: CostModel, aug: AugmentedCost | None,
                 initial: Trajectory, opts: NewtonOptions | None = None
                 ) -> tuple[Trajectory, NewtonReport]:
    """Minimize the augmented objective over controls from ``initial``.

    Accepted iterates have non-increasing augmented cost.  Terminates when
    the relative cost change of an accepted step, or the proposed step norm,
    drops below ``opts.inner_tol``, or after ``opts.max_iters`` iterations.
    Steps leaving the barrier domain, diverging under the dynamics, or
    increasing the cost are rejected and retried with a larger
    regularization weight.

    Raises:
        SolverStalledError: if the subproblem stays unsolvable (indefinite)
            with the regularization weight already past its ceiling.
        InfeasibleError: if ``initial`` itself violates a barrier domain.
    """
    aug = aug if aug is not None else ZeroAugmentation()
    opts = opts if opts is not None else NewtonOptions()
    _check_consistent(dyn, initial)

    traj = initial
    cur_cost = total_cost(cost, aug, traj)
    alpha, nu = opts.alpha0, opts.nu0
    expansion = None
    history: list[IterationRecord] = []
    termination = TERM_MAX_ITERS

    while len(history) < opts.max_iters:
        if expansion is None:
            costates = costate_pass(traj, cost, aug, dyn, opts.executor)
            expansion = hamiltonian_expansion(traj, costates, cost, aug, dyn, alpha)
        elif expansion.alpha != alpha:
            expansion = expansion.with_alpha(alpha)

        try:
            _, _, law = value_pass(expansion, opts.executor)
            _, dus = propagation_pass(law, expansion, opts.executor)
        except (DefinitenessError, ConditioningError) as err:
            if alpha > ALPHA_MAX:
                raise SolverStalledError(
                    f"subproblem unsolvable with alpha={alpha:.3e}: {err}"
                ) from err
            history.append(IterationRecord(cur_cost, alpha, -math.inf, math.nan, False))
            # alpha == 0 cannot grow multiplicatively; bump it off zero
            alpha = alpha * nu if alpha > 0 else 1e-6
            nu = 2.0 * nu
            continue

        step_norm = float(np.max(np.abs(dus)))
        if step_norm <= opts.inner_tol:
            history.append(IterationRecord(cur_cost, alpha, math.nan, step_norm, False))
            termination = TERM_STEP
            break

        predicted = predicted_reduction(dus, expansion.d, alpha)
        alpha_used = alpha
        candidate = None
        new_cost = math.inf
        try:
            candidate = rollout(dyn, traj.states[0], traj.controls + dus)
            new_cost = total_cost(cost, aug, candidate)
            ratio = gain_ratio(cur_cost - new_cost, predicted)
        except (InfeasibleError, DivergenceError):
            ratio = -math.inf
        alpha, nu, accepted = regularization_update(alpha, nu, ratio)

        if accepted:
            rel_change = abs(cur_cost - new_cost) / max(1.0, abs(cur_cost))
            history.append(IterationRecord(new_cost, alpha_used, ratio, step_norm, True))
            traj, cur_cost = candidate, new_cost
            expansion = None
            if rel_change <= opts.inner_tol:
                termination = TERM_COST
                break
        else:
            history.append(IterationRecord(cur_cost, alpha_used, ratio, step_norm, False))
            if alpha > ALPHA_MAX:
                termination = TERM_STALLED
                break

    return traj, NewtonReport(
        iterations=len(history),
        final_cost=cur_cost,
        history=tuple(history),
        termination=termination,
    )

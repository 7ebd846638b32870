"""The three associative-scan passes of one Newton iteration.

Each pass follows the same recipe: build one small element per stage,
combine them with an associative operator via :func:`pintoc.scan.scan`, and
read the result off the combined elements.

* co-state pass (suffix scan): adjoint vectors of the augmented Lagrangian,
* value pass (suffix scan over dual-form conditional value functions):
  quadratic cost-to-go parameters and an affine control law,
* propagation pass (prefix scan): closed-loop state deviations.

Element construction is independent across stages; combines are scheduled by
the scan engine, so both backward recursions and the forward propagation run
in logarithmic span under the parallel executor.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .exceptions import ConditioningError, DefinitenessError
from .problem import AugmentedCost, CostModel, DynamicsModel, Trajectory
from .scan import DEFAULT_PARALLEL_THRESHOLD, SEQUENTIAL, ScanDirection, scan


class CostateElement(NamedTuple):
    """Composable piece of the adjoint recursion: (dl/dx, dc/dx, df/dx)."""

    dl: np.ndarray  # (d_x,)
    dc: np.ndarray  # (d_x,)
    df: np.ndarray  # (d_x, d_x)


class ValueElement(NamedTuple):
    """Dual parameterization (A, Y, C, eta, b) of a conditional value function."""

    A: np.ndarray    # (d_x, d_x)
    Y: np.ndarray    # (d_x, d_x), symmetric
    C: np.ndarray    # (d_x, d_x), symmetric
    eta: np.ndarray  # (d_x,)
    b: np.ndarray    # (d_x,)


class RolloutElement(NamedTuple):
    """Affine state-propagation map ``dx -> F dx + e``."""

    F: np.ndarray  # (d_x, d_x)
    e: np.ndarray  # (d_x,)


class FeedbackLaw(NamedTuple):
    """Affine control law ``du_t = Gamma_t dx_t + gamma_t``."""

    Gamma: np.ndarray  # (N, d_u, d_x)
    gamma: np.ndarray  # (N, d_u)


@dataclass(frozen=True)
class StageExpansion:
    """Second-order expansion of the augmented Lagrangian along a nominal.

    Per-stage arrays are stacked along axis 0.  ``R_reg`` stores
    ``R + alpha*I``; use :meth:`with_alpha` to retune the regularization
    without re-evaluating any model derivative.
    """

    P: np.ndarray           # (N, d_x, d_x) Hessian in x
    R: np.ndarray           # (N, d_u, d_u) Hessian in u, unregularized
    M: np.ndarray           # (N, d_x, d_u) cross Hessian
    d: np.ndarray           # (N, d_u) gradient in u
    Fx: np.ndarray          # (N, d_x, d_x) dynamics Jacobian in x
    Fu: np.ndarray          # (N, d_x, d_u) dynamics Jacobian in u
    P_terminal: np.ndarray  # (d_x, d_x)
    alpha: float
    R_reg: np.ndarray       # (N, d_u, d_u) R + alpha*I

    @property
    def horizon(self) -> int:
        return self.P.shape[0]

    @property
    def d_x(self) -> int:
        return self.P.shape[1]

    @property
    def d_u(self) -> int:
        return self.R.shape[1]

    def with_alpha(self, alpha: float) -> "StageExpansion":
        if alpha < 0:
            raise ValueError("alpha must be nonnegative")
        eye = np.eye(self.d_u)
        return replace(self, alpha=alpha, R_reg=self.R + alpha * eye)


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


# ---------------------------------------------------------------------------
# co-state pass
# ---------------------------------------------------------------------------

def costate_boundary(cost: CostModel, x_final: np.ndarray) -> np.ndarray:
    """Terminal adjoint: gradient of the terminal cost."""
    return np.asarray(cost.terminal_x(x_final), dtype=float)


def costate_combine(left: CostateElement, right: CostateElement) -> CostateElement:
    """Compose two adjoint segments, ``left`` covering the earlier stages."""
    return CostateElement(
        dl=left.dl + left.df.T @ right.dl,
        dc=left.dc + left.df.T @ right.dc,
        df=right.df @ left.df,
    )


def costate_pass(traj: Trajectory, cost: CostModel, aug: AugmentedCost,
                 dyn: DynamicsModel, executor: str = SEQUENTIAL,
                 parallel_threshold: int = DEFAULT_PARALLEL_THRESHOLD) -> np.ndarray:
    """Adjoint vectors lambda_{1:N+1} of the augmented Lagrangian.

    The result satisfies the backward recursion
    ``lambda_t = lx_t + cx_t + fx_t^T lambda_{t+1}`` with the terminal
    gradient as boundary, computed here as a suffix scan.
    """
    n = traj.horizon
    xs, us = traj.states[:-1], traj.controls
    lam_final = costate_boundary(cost, traj.states[n])
    dls = cost.lx_batch(xs, us)
    dcs = aug.cx_batch(xs, us)
    dfs = dyn.fx_batch(xs, us)
    elements = [CostateElement(dls[t], dcs[t], dfs[t]) for t in range(n - 1)]
    # fold the boundary into the last element; its zero Jacobian absorbs
    # everything to its right during the scan
    elements.append(CostateElement(dls[n - 1] + dfs[n - 1].T @ lam_final,
                                   dcs[n - 1], np.zeros((dyn.d_x, dyn.d_x))))
    suffix = scan(elements, costate_combine, ScanDirection.REVERSE, executor,
                  parallel_threshold=parallel_threshold)
    costates = np.empty((n + 1, dyn.d_x))
    for t in range(n):
        costates[t] = suffix[t].dl + suffix[t].dc
    costates[n] = lam_final
    return costates


# ---------------------------------------------------------------------------
# quadratic expansion
# ---------------------------------------------------------------------------

def hamiltonian_expansion(traj: Trajectory, costates: np.ndarray, cost: CostModel,
                          aug: AugmentedCost, dyn: DynamicsModel,
                          alpha: float = 0.0) -> StageExpansion:
    """Second-order stage data (P, R, M, d) of the augmented Lagrangian.

    Second derivatives of the dynamics enter through contraction with the
    next adjoint vector, which is what distinguishes the Newton expansion
    from a Gauss-Newton (iLQR) one.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    n, d_u = traj.horizon, traj.d_u
    xs, us = traj.states[:-1], traj.controls
    lam = np.asarray(costates[1:], dtype=float)  # (N, d_x)
    P = cost.lxx_batch(xs, us) + aug.cxx_batch(xs, us) \
        + np.einsum("tk,tkij->tij", lam, dyn.fxx_batch(xs, us))
    R = cost.luu_batch(xs, us) + aug.cuu_batch(xs, us) \
        + np.einsum("tk,tkij->tij", lam, dyn.fuu_batch(xs, us))
    M = cost.lxu_batch(xs, us) + aug.cxu_batch(xs, us) \
        + np.einsum("tk,tkij->tij", lam, dyn.fxu_batch(xs, us))
    Fu = dyn.fu_batch(xs, us)
    d = cost.lu_batch(xs, us) + aug.cu_batch(xs, us) \
        + np.einsum("tkj,tk->tj", Fu, lam)
    P = _sym(P)
    R = _sym(R)
    return StageExpansion(
        P=P, R=R, M=M, d=d, Fx=dyn.fx_batch(xs, us), Fu=Fu,
        P_terminal=_sym(np.asarray(cost.terminal_xx(traj.states[n]), dtype=float)),
        alpha=float(alpha),
        R_reg=R + alpha * np.eye(d_u),
    )


# ---------------------------------------------------------------------------
# value pass
# ---------------------------------------------------------------------------

def value_element_init(exp: StageExpansion, t: int) -> ValueElement:
    """Dual-form value element for stage ``t`` (``t == N`` gives the boundary).

    The single-stage dual parameters reduce to

        A = Fx - Fu Rr^-1 M^T,   Y = P - M Rr^-1 M^T,
        C = Fu Rr^-1 Fu^T,       eta = M Rr^-1 d,     b = -Fu Rr^-1 d,

    with ``Rr = R + alpha*I``.  This is the feedforward form written without
    any inverse of P, which need not exist at a poor nominal.

    Raises:
        DefinitenessError: if ``Rr`` fails its Cholesky factorization, which
            signals that the regularization is too small.
    """
    n = exp.horizon
    if t == n:
        z = np.zeros((exp.d_x, exp.d_x))
        return ValueElement(A=z, Y=exp.P_terminal.copy(), C=z.copy(),
                            eta=np.zeros(exp.d_x), b=np.zeros(exp.d_x))
    if not 0 <= t < n:
        raise IndexError(f"stage {t} outside 0..{n}")
    try:
        chol = cho_factor(exp.R_reg[t], lower=True)
    except np.linalg.LinAlgError as err:
        raise DefinitenessError(t, "R + alpha*I") from err
    Fx, Fu, M, P, d = exp.Fx[t], exp.Fu[t], exp.M[t], exp.P[t], exp.d[t]
    Ri_Mt = cho_solve(chol, M.T)      # Rr^-1 M^T
    Ri_Fut = cho_solve(chol, Fu.T)    # Rr^-1 Fu^T
    Ri_d = cho_solve(chol, d)         # Rr^-1 d
    return ValueElement(
        A=Fx - Fu @ Ri_Mt,
        Y=_sym(P - M @ Ri_Mt),
        C=_sym(Fu @ Ri_Fut),
        eta=M @ Ri_d,
        b=-Fu @ Ri_d,
    )


def _assert_spd_batch(mats: np.ndarray, what: str) -> None:
    """Batched positive-definiteness gate; names the failing stage."""
    try:
        np.linalg.cholesky(mats)
    except np.linalg.LinAlgError:
        for t in range(len(mats)):
            try:
                np.linalg.cholesky(mats[t])
            except np.linalg.LinAlgError as err:
                raise DefinitenessError(t, what) from err
        raise


def _value_elements(exp: StageExpansion) -> list[ValueElement]:
    """All N+1 dual elements at once (vectorized value_element_init)."""
    n, d_x = exp.horizon, exp.d_x
    _assert_spd_batch(exp.R_reg, "R + alpha*I")
    Mt = np.swapaxes(exp.M, 1, 2)
    Ri_Mt = np.linalg.solve(exp.R_reg, Mt)
    Ri_Fut = np.linalg.solve(exp.R_reg, np.swapaxes(exp.Fu, 1, 2))
    Ri_d = np.linalg.solve(exp.R_reg, exp.d[..., None])[..., 0]
    A = exp.Fx - exp.Fu @ Ri_Mt
    Y = _sym(exp.P - exp.M @ Ri_Mt)
    C = _sym(exp.Fu @ Ri_Fut)
    eta = np.einsum("tij,tj->ti", exp.M, Ri_d)
    b = -np.einsum("tij,tj->ti", exp.Fu, Ri_d)
    elements = [ValueElement(A[t], Y[t], C[t], eta[t], b[t]) for t in range(n)]
    z = np.zeros((d_x, d_x))
    elements.append(ValueElement(z, exp.P_terminal.copy(), z.copy(),
                                 np.zeros(d_x), np.zeros(d_x)))
    return elements


def value_combine(left: ValueElement, right: ValueElement) -> ValueElement:
    """Merge adjacent conditional value functions, ``left`` covering the
    earlier stages.

    Raises:
        ConditioningError: if ``I + C_left Y_right`` is singular.
    """
    d_x = left.A.shape[0]
    gram = np.eye(d_x) + left.C @ right.Y
    # since C and Y are symmetric, (I + Y_right C_left) is gram transposed;
    # batch the right-hand sides so each orientation costs one solve
    rhs = np.concatenate([left.A, left.C, (left.b + left.C @ right.eta)[:, None]], axis=1)
    rhs_t = np.concatenate([right.Y @ left.A, (right.eta - right.Y @ left.b)[:, None]], axis=1)
    try:
        sol = np.linalg.solve(gram, rhs)
        sol_t = np.linalg.solve(gram.T, rhs_t)
    except np.linalg.LinAlgError as err:
        raise ConditioningError("singular I + C*Y while combining value elements") from err
    return ValueElement(
        A=right.A @ sol[:, :d_x],
        Y=_sym(left.A.T @ sol_t[:, :d_x] + left.Y),
        C=_sym(right.A @ sol[:, d_x:2 * d_x] @ right.A.T + right.C),
        eta=left.A.T @ sol_t[:, d_x] + left.eta,
        b=right.A @ sol[:, 2 * d_x] + right.b,
    )


def value_pass(exp: StageExpansion, executor: str = SEQUENTIAL,
               parallel_threshold: int = DEFAULT_PARALLEL_THRESHOLD
               ) -> tuple[np.ndarray, np.ndarray, FeedbackLaw]:
    """Cost-to-go parameters (S, s) and the affine control law.

    A suffix scan over the dual elements yields the value function at every
    stage: ``S_t = Y``, ``s_t = -eta`` of the combined suffix element.  Gains
    follow from the one-step minimization against ``S_{t+1}, s_{t+1}``:

        Q_t = Rr_t + Fu^T S_{t+1} Fu,
        gamma_t = -Q_t^-1 (d_t + Fu^T s_{t+1}),
        Gamma_t = -Q_t^-1 (M_t^T + Fu^T S_{t+1} Fx).

    Raises:
        DefinitenessError: if some ``Q_t`` is not positive definite.
    """
    n, d_x = exp.horizon, exp.d_x
    elements = _value_elements(exp)
    suffix = scan(elements, value_combine, ScanDirection.REVERSE, executor,
                  parallel_threshold=parallel_threshold)
    S = np.empty((n + 1, d_x, d_x))
    s = np.empty((n + 1, d_x))
    for t in range(n + 1):
        S[t] = suffix[t].Y
        s[t] = -suffix[t].eta
    FuT = np.swapaxes(exp.Fu, 1, 2)
    FuT_S = FuT @ S[1:]
    Q = _sym(exp.R_reg + FuT_S @ exp.Fu)
    _assert_spd_batch(Q, "Q")
    Gamma = -np.linalg.solve(Q, np.swapaxes(exp.M, 1, 2) + FuT_S @ exp.Fx)
    gamma = -np.linalg.solve(
        Q, (exp.d + np.einsum("tkj,tk->tj", exp.Fu, s[1:]))[..., None])[..., 0]
    return S, s, FeedbackLaw(Gamma, gamma)


# ---------------------------------------------------------------------------
# propagation pass
# ---------------------------------------------------------------------------

def rollout_combine(first: RolloutElement, second: RolloutElement) -> RolloutElement:
    """Compose affine maps, applying ``first`` then ``second``."""
    return RolloutElement(
        F=second.F @ first.F,
        e=second.F @ first.e + second.e,
    )


def propagation_pass(law: FeedbackLaw, exp: StageExpansion,
                     executor: str = SEQUENTIAL,
                     parallel_threshold: int = DEFAULT_PARALLEL_THRESHOLD
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Closed-loop deviations (dx, du) under the feedback law, from dx_1 = 0.

    The closed-loop maps ``F_t = Fx + Fu Gamma_t``, ``e_t = Fu gamma_t`` are
    chained by a prefix scan; deviation states are the offsets of the
    combined maps and controls follow from the law.
    """
    n, d_x = exp.horizon, exp.d_x
    F = exp.Fx + exp.Fu @ law.Gamma
    e = np.einsum("tij,tj->ti", exp.Fu, law.gamma)
    # dx_1 = 0, so the head element is a pure offset
    elements = [RolloutElement(np.zeros((d_x, d_x)), e[0])]
    elements += [RolloutElement(F[t], e[t]) for t in range(1, n)]
    prefix = scan(elements, rollout_combine, ScanDirection.FORWARD, executor,
                  parallel_threshold=parallel_threshold)
    dxs = np.empty((n + 1, d_x))
    dxs[0] = 0.0
    for t in range(n):
        dxs[t + 1] = prefix[t].e
    dus = np.einsum("tij,tj->ti", law.Gamma, dxs[:-1]) + law.gamma
    return dxs, dus

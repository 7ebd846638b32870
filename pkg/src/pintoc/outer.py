"""Constrained outer loops: primal log-barrier and ADMM.

Both methods repeatedly hand an augmented unconstrained-in-controls
subproblem to :func:`pintoc.newton.newton_solve` and recycle its solution as
the next warm start.  The barrier loop shrinks the barrier weight towards
zero; ADMM alternates the trajectory update with a clamp of the consensus
variable and a dual ascent step, tracking primal and dual residuals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InfeasibleError
from .newton import NewtonOptions, NewtonReport, newton_solve
from .problem import (
    AugmentedCost,
    ConstraintModel,
    ControlProblem,
    Trajectory,
)


# ---------------------------------------------------------------------------
# log-barrier interior point
# ---------------------------------------------------------------------------

class BarrierAugmentation(AugmentedCost):
    """Log-barrier penalty ``-mu * sum(log(-g) + log(-h))``.

    Defined only on the strict interior; evaluation at a point with any
    constraint component >= 0 raises :class:`InfeasibleError` carrying the
    stage and the offending component index within the stacked constraint
    vector.
    """

    variant = "barrier"

    def __init__(self, constraints: ConstraintModel, mu: float):
        if mu <= 0:
            raise ValueError("barrier parameter mu must be > 0")
        self.constraints = constraints
        self.mu = float(mu)

    def _checked(self, t: int, values: np.ndarray, offset: int) -> np.ndarray:
        bad = np.flatnonzero(values >= 0)
        if bad.size:
            comp = int(bad[0])
            raise InfeasibleError(t, comp + offset, float(values[comp]))
        return values

    def c(self, t, x, u):
        con = self.constraints
        g = self._checked(t, con.g(t, x), 0)
        h = self._checked(t, con.h(t, u), con.n_state)
        total = 0.0
        if g.size:
            total += float(np.sum(np.log(-g)))
        if h.size:
            total += float(np.sum(np.log(-h)))
        return -self.mu * total

    def cx(self, t, x, u):
        con = self.constraints
        g = self._checked(t, con.g(t, x), 0)
        if not g.size:
            return np.zeros(len(x))
        return -self.mu * (con.gx(t, x).T @ (1.0 / g))

    def cu(self, t, x, u):
        con = self.constraints
        h = self._checked(t, con.h(t, u), con.n_state)
        if not h.size:
            return np.zeros(len(u))
        return -self.mu * (con.hu(t, u).T @ (1.0 / h))

    def cxx(self, t, x, u):
        con = self.constraints
        g = self._checked(t, con.g(t, x), 0)
        if not g.size:
            return np.zeros((len(x), len(x)))
        jac = con.gx(t, x)
        scaled = jac / g[:, None]
        return self.mu * (scaled.T @ scaled - np.tensordot(1.0 / g, con.gxx(t, x), axes=1))

    def cuu(self, t, x, u):
        con = self.constraints
        h = self._checked(t, con.h(t, u), con.n_state)
        if not h.size:
            return np.zeros((len(u), len(u)))
        jac = con.hu(t, u)
        scaled = jac / h[:, None]
        return self.mu * (scaled.T @ scaled - np.tensordot(1.0 / h, con.huu(t, u), axes=1))

    def cxu(self, t, x, u):
        # g depends on x only and h on u only, so the cross term vanishes
        return np.zeros((len(x), len(u)))

    # vectorized batch path used by the passes

    def _checked_batch(self, values: np.ndarray, offset: int) -> np.ndarray:
        if values.size and values.max() >= 0:
            stages, comps = np.nonzero(values >= 0)
            t, comp = int(stages[0]), int(comps[0])
            raise InfeasibleError(t, comp + offset, float(values[t, comp]))
        return values

    def c_batch(self, xs, us):
        con = self.constraints
        g = self._checked_batch(con.g_batch(xs), 0)
        h = self._checked_batch(con.h_batch(us), con.n_state)
        total = np.zeros(len(us))
        if g.size:
            total += np.sum(np.log(-g), axis=1)
        if h.size:
            total += np.sum(np.log(-h), axis=1)
        return -self.mu * total

    def cx_batch(self, xs, us):
        con = self.constraints
        g = self._checked_batch(con.g_batch(xs), 0)
        if not g.size:
            return np.zeros(xs.shape)
        return -self.mu * np.einsum("tmi,tm->ti", con.gx_batch(xs), 1.0 / g)

    def cu_batch(self, xs, us):
        con = self.constraints
        h = self._checked_batch(con.h_batch(us), con.n_state)
        if not h.size:
            return np.zeros(us.shape)
        return -self.mu * np.einsum("tmi,tm->ti", con.hu_batch(us), 1.0 / h)

    def cxx_batch(self, xs, us):
        con = self.constraints
        g = self._checked_batch(con.g_batch(xs), 0)
        d_x = xs.shape[1]
        if not g.size:
            return np.zeros((len(us), d_x, d_x))
        scaled = con.gx_batch(xs) / g[:, :, None]
        return self.mu * (np.einsum("tmi,tmj->tij", scaled, scaled)
                          - np.einsum("tm,tmij->tij", 1.0 / g, con.gxx_batch(xs)))

    def cuu_batch(self, xs, us):
        con = self.constraints
        h = self._checked_batch(con.h_batch(us), con.n_state)
        d_u = us.shape[1]
        if not h.size:
            return np.zeros((len(us), d_u, d_u))
        scaled = con.hu_batch(us) / h[:, :, None]
        return self.mu * (np.einsum("tmi,tmj->tij", scaled, scaled)
                          - np.einsum("tm,tmij->tij", 1.0 / h, con.huu_batch(us)))

    def cxu_batch(self, xs, us):
        return np.zeros((len(us), xs.shape[1], us.shape[1]))


def barrier_augmentation(constraints: ConstraintModel, mu: float) -> BarrierAugmentation:
    return BarrierAugmentation(constraints, mu)


def assert_strictly_feasible(constraints: ConstraintModel, traj: Trajectory) -> None:
    """Raise with a list of violated components unless all w(x, u) < 0."""
    violations = []
    for t in range(traj.horizon):
        wt = constraints.w(t, traj.states[t], traj.controls[t])
        for comp in np.flatnonzero(wt >= 0):
            violations.append((t, int(comp), float(wt[comp])))
    if violations:
        listing = "; ".join(
            f"stage {t} component {c}: {v:.6g}" for t, c, v in violations[:10]
        )
        if len(violations) > 10:
            listing += f"; ... ({len(violations)} total)"
        t0, c0, v0 = violations[0]
        raise InfeasibleError(t0, c0, v0, f"trajectory is not strictly feasible: {listing}")


@dataclass(frozen=True)
class BarrierOptions:
    mu0: float = 0.1
    zeta: float = 0.2
    mu_tol: float = 1e-4
    newton: NewtonOptions = field(default_factory=NewtonOptions)

    def __post_init__(self):
        if self.mu0 <= 0:
            raise ValueError("mu0 must be > 0")
        if not 0 < self.zeta < 1:
            raise ValueError("zeta must lie in (0, 1)")
        if self.mu_tol <= 0:
            raise ValueError("mu_tol must be > 0")


@dataclass(frozen=True)
class BarrierRound:
    mu: float
    cost: float               # augmented cost at the round's solution
    controls: np.ndarray      # solution controls of this round
    newton: NewtonReport


@dataclass(frozen=True)
class BarrierReport:
    rounds: tuple[BarrierRound, ...]

    @property
    def outer_iterations(self) -> int:
        return len(self.rounds)

    @property
    def inner_iterations(self) -> int:
        return sum(r.newton.iterations for r in self.rounds)

    @property
    def converged(self) -> bool:
        return all(r.newton.converged for r in self.rounds)


def barrier_solve(problem: ControlProblem, initial: Trajectory,
                  opts: BarrierOptions | None = None
                  ) -> tuple[Trajectory, BarrierReport]:
    """Primal log-barrier method: solve, shrink mu, repeat until mu <= tol.

    Every subproblem is warm-started from the previous solution, so all
    iterates remain strictly feasible.

    Raises:
        InfeasibleError: if ``initial`` is not strictly feasible.
    """
    if problem.constraints is None:
        raise ValueError("barrier_solve needs a ConstraintModel on the problem")
    opts = opts if opts is not None else BarrierOptions()
    assert_strictly_feasible(problem.constraints, initial)

    traj = initial
    mu = opts.mu0
    rounds: list[BarrierRound] = []
    while mu > opts.mu_tol:
        aug = BarrierAugmentation(problem.constraints, mu)
        traj, report = newton_solve(problem.dynamics, problem.cost, aug, traj, opts.newton)
        rounds.append(BarrierRound(mu, report.final_cost, traj.controls.copy(), report))
        mu *= opts.zeta
    return traj, BarrierReport(tuple(rounds))


# ---------------------------------------------------------------------------
# ADMM
# ---------------------------------------------------------------------------

class AdmmAugmentation(AugmentedCost):
    """Consensus penalty ``(rho/2) * ||w(x,u) - z_t + v_t/rho||^2``."""

    variant = "admm"

    def __init__(self, constraints: ConstraintModel, rho: float,
                 z: np.ndarray, v: np.ndarray):
        if rho <= 0:
            raise ValueError("penalty parameter rho must be > 0")
        self.constraints = constraints
        self.rho = float(rho)
        self.z = np.asarray(z, dtype=float)
        self.v = np.asarray(v, dtype=float)
        if self.z.shape != self.v.shape:
            raise ValueError("z and v must have matching shapes")

    def _residual(self, t, x, u):
        return self.constraints.w(t, x, u) - self.z[t] + self.v[t] / self.rho

    def c(self, t, x, u):
        res = self._residual(t, x, u)
        return 0.5 * self.rho * float(res @ res)

    def cx(self, t, x, u):
        res = self._residual(t, x, u)[: self.constraints.n_state]
        return self.rho * (self.constraints.gx(t, x).T @ res)

    def cu(self, t, x, u):
        res = self._residual(t, x, u)[self.constraints.n_state:]
        return self.rho * (self.constraints.hu(t, u).T @ res)

    def cxx(self, t, x, u):
        con = self.constraints
        res = self._residual(t, x, u)[: con.n_state]
        jac = con.gx(t, x)
        return self.rho * (jac.T @ jac + np.tensordot(res, con.gxx(t, x), axes=1))

    def cuu(self, t, x, u):
        con = self.constraints
        res = self._residual(t, x, u)[con.n_state:]
        jac = con.hu(t, u)
        return self.rho * (jac.T @ jac + np.tensordot(res, con.huu(t, u), axes=1))

    def cxu(self, t, x, u):
        # w components depend on x or on u, never both
        return np.zeros((len(x), len(u)))

    # vectorized batch path used by the passes

    def _residual_batch(self, xs, us):
        return self.constraints.w_batch(xs, us) - self.z + self.v / self.rho

    def c_batch(self, xs, us):
        res = self._residual_batch(xs, us)
        return 0.5 * self.rho * np.sum(res * res, axis=1)

    def cx_batch(self, xs, us):
        con = self.constraints
        res = self._residual_batch(xs, us)[:, : con.n_state]
        return self.rho * np.einsum("tmi,tm->ti", con.gx_batch(xs), res)

    def cu_batch(self, xs, us):
        con = self.constraints
        res = self._residual_batch(xs, us)[:, con.n_state:]
        return self.rho * np.einsum("tmi,tm->ti", con.hu_batch(us), res)

    def cxx_batch(self, xs, us):
        con = self.constraints
        res = self._residual_batch(xs, us)[:, : con.n_state]
        jac = con.gx_batch(xs)
        return self.rho * (np.einsum("tmi,tmj->tij", jac, jac)
                           + np.einsum("tm,tmij->tij", res, con.gxx_batch(xs)))

    def cuu_batch(self, xs, us):
        con = self.constraints
        res = self._residual_batch(xs, us)[:, con.n_state:]
        jac = con.hu_batch(us)
        return self.rho * (np.einsum("tmi,tmj->tij", jac, jac)
                           + np.einsum("tm,tmij->tij", res, con.huu_batch(us)))

    def cxu_batch(self, xs, us):
        return np.zeros((len(us), xs.shape[1], us.shape[1]))


def admm_augmentation(constraints: ConstraintModel, rho: float,
                      z: np.ndarray, v: np.ndarray) -> AdmmAugmentation:
    return AdmmAugmentation(constraints, rho, z, v)


def project_box(point: np.ndarray, constraints: ConstraintModel | None = None
                ) -> np.ndarray:
    """Euclidean projection onto ``{y <= 0}``: a componentwise clamp.

    The one-sided stacking of box constraints makes the consensus set the
    nonpositive orthant, so the projection is closed-form.
    """
    return np.minimum(np.asarray(point, dtype=float), 0.0)


@dataclass(frozen=True)
class AdmmOptions:
    rho: float = 1.0
    residual_tol: float = 1e-2
    max_outer: int = 200
    newton: NewtonOptions = field(default_factory=NewtonOptions)

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be > 0")
        if self.residual_tol <= 0:
            raise ValueError("residual_tol must be > 0")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")


@dataclass(frozen=True)
class AdmmState:
    z: np.ndarray  # (N, d_w) consensus variable, <= 0 after projection
    v: np.ndarray  # (N, d_w) scaled multipliers
    primal_residual: float
    dual_residual: float


@dataclass(frozen=True)
class AdmmReport:
    outer_iterations: int
    converged: bool
    state: AdmmState
    residual_history: tuple[tuple[float, float], ...]  # (primal, dual) per outer step
    newton_reports: tuple[NewtonReport, ...]

    @property
    def inner_iterations(self) -> int:
        return sum(r.iterations for r in self.newton_reports)


def _stack_w(constraints: ConstraintModel, traj: Trajectory) -> np.ndarray:
    return constraints.w_batch(traj.states[:-1], traj.controls)


def admm_solve(problem: ControlProblem, initial: Trajectory,
               opts: AdmmOptions | None = None) -> tuple[Trajectory, AdmmReport]:
    """Operator splitting between the trajectory and a clamped consensus.

    Each outer step minimizes the penalty-augmented objective over controls
    (states re-rolled inside the Newton solver), projects the shifted
    constraint values onto the feasible orthant, and updates the
    multipliers.  Terminates when both the primal residual ``w - z`` and the
    dual residual ``z - z_prev`` are within tolerance in infinity norm;
    exceeding the outer budget is reported, not raised.
    """
    if problem.constraints is None:
        raise ValueError("admm_solve needs a ConstraintModel on the problem")
    opts = opts if opts is not None else AdmmOptions()
    con = problem.constraints

    traj = initial
    z = project_box(_stack_w(con, traj), con)
    v = np.zeros_like(z)
    residuals: list[tuple[float, float]] = []
    reports: list[NewtonReport] = []
    converged = False
    for _ in range(opts.max_outer):
        aug = AdmmAugmentation(con, opts.rho, z, v)
        traj, nrep = newton_solve(problem.dynamics, problem.cost, aug, traj, opts.newton)
        reports.append(nrep)
        w_val = _stack_w(con, traj)
        z_prev = z
        z = project_box(w_val + v / opts.rho, con)
        v = v + opts.rho * (w_val - z)
        r_p = float(np.max(np.abs(w_val - z))) if z.size else 0.0
        r_d = float(np.max(np.abs(z - z_prev))) if z.size else 0.0
        residuals.append((r_p, r_d))
        if r_p <= opts.residual_tol and r_d <= opts.residual_tol:
            converged = True
            break
    state = AdmmState(z, v, residuals[-1][0], residuals[-1][1])
    return traj, AdmmReport(
        outer_iterations=len(residuals),
        converged=converged,
        state=state,
        residual_history=tuple(residuals),
        newton_reports=tuple(reports),
    )

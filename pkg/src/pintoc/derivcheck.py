"""Central-difference verification of analytic model derivatives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import DerivativeCheckError
from .problem import AugmentedCost, ConstraintModel, CostModel, DynamicsModel

DEFAULT_STEP = 1e-6
DEFAULT_TOL = 1e-5


def fd_jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                step: float = DEFAULT_STEP) -> np.ndarray:
    """Central-difference derivative of ``fn`` with respect to ``x``.

    Works for scalar, vector, and matrix valued ``fn``; the differentiation
    axis is appended last.
    """
    x = np.asarray(x, dtype=float)
    base = np.asarray(fn(x), dtype=float)
    out = np.empty(base.shape + (x.size,))
    for i in range(x.size):
        dx = np.zeros_like(x)
        dx[i] = step
        hi = np.asarray(fn(x + dx), dtype=float)
        lo = np.asarray(fn(x - dx), dtype=float)
        out[..., i] = (hi - lo) / (2.0 * step)
    return out


def fd_hessian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
               step: float = 1e-4) -> np.ndarray:
    """Second-order central differences of ``fn``; last two axes index x."""
    x = np.asarray(x, dtype=float)
    base = np.asarray(fn(x), dtype=float)
    n = x.size
    out = np.empty(base.shape + (n, n))
    for i in range(n):
        for j in range(i + 1):
            ei = np.zeros_like(x)
            ej = np.zeros_like(x)
            ei[i] = step
            ej[j] = step
            val = (
                np.asarray(fn(x + ei + ej), dtype=float)
                - np.asarray(fn(x + ei - ej), dtype=float)
                - np.asarray(fn(x - ei + ej), dtype=float)
                + np.asarray(fn(x - ei - ej), dtype=float)
            ) / (4.0 * step * step)
            out[..., i, j] = val
            out[..., j, i] = val
    return out


@dataclass(frozen=True)
class DerivativeCheck:
    name: str
    max_abs_err: float
    max_rel_err: float
    ok: bool


@dataclass(frozen=True)
class DerivativeReport:
    checks: tuple[DerivativeCheck, ...]
    tolerance: float

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def __getitem__(self, name: str) -> DerivativeCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _compare(name: str, analytic, fd, tol: float) -> DerivativeCheck:
    analytic = np.asarray(analytic, dtype=float)
    fd = np.asarray(fd, dtype=float)
    abs_err = float(np.max(np.abs(analytic - fd))) if analytic.size else 0.0
    scale = float(np.max(np.abs(fd))) if fd.size else 0.0
    rel_err = abs_err / max(scale, 1e-12)
    # pass if close in a scale-aware sense: small derivatives are judged
    # absolutely, large ones relatively
    ok = abs_err <= tol * (1.0 + scale)
    return DerivativeCheck(name, abs_err, rel_err, ok)


def check_derivatives(target, point, tolerance: float = DEFAULT_TOL,
                      step: float = DEFAULT_STEP) -> DerivativeReport:
    """Validate every analytic derivative of ``target`` at ``point``.

    ``point`` is a ``(t, x, u)`` triple.  First derivatives are compared
    against central differences of the underlying evaluator; second
    derivatives against central differences of the analytic first
    derivatives, so one bad level cannot mask another.

    Returns the full report, or raises :class:`DerivativeCheckError` naming
    the offending derivatives if any comparison exceeds ``tolerance``.
    """
    t, x, u = point
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    checks: list[DerivativeCheck] = []

    if isinstance(target, DynamicsModel):
        m = target
        checks += [
            _compare("fx", m.fx(t, x, u), fd_jacobian(lambda xx: m.f(t, xx, u), x, step), tolerance),
            _compare("fu", m.fu(t, x, u), fd_jacobian(lambda uu: m.f(t, x, uu), u, step), tolerance),
            _compare("fxx", m.fxx(t, x, u), fd_jacobian(lambda xx: m.fx(t, xx, u), x, step), tolerance),
            _compare("fuu", m.fuu(t, x, u), fd_jacobian(lambda uu: m.fu(t, x, uu), u, step), tolerance),
            _compare("fxu", m.fxu(t, x, u),
                     np.swapaxes(fd_jacobian(lambda xx: m.fu(t, xx, u), x, step), 1, 2), tolerance),
        ]
    elif isinstance(target, CostModel):
        m = target
        checks += [
            _compare("lx", m.lx(t, x, u), fd_jacobian(lambda xx: m.l(t, xx, u), x, step), tolerance),
            _compare("lu", m.lu(t, x, u), fd_jacobian(lambda uu: m.l(t, x, uu), u, step), tolerance),
            _compare("lxx", m.lxx(t, x, u), fd_jacobian(lambda xx: m.lx(t, xx, u), x, step), tolerance),
            _compare("luu", m.luu(t, x, u), fd_jacobian(lambda uu: m.lu(t, x, uu), u, step), tolerance),
            _compare("lxu", m.lxu(t, x, u), fd_jacobian(lambda uu: m.lx(t, x, uu), u, step), tolerance),
            _compare("terminal_x", m.terminal_x(x), fd_jacobian(m.terminal, x, step), tolerance),
            _compare("terminal_xx", m.terminal_xx(x), fd_jacobian(m.terminal_x, x, step), tolerance),
        ]
    elif isinstance(target, AugmentedCost):
        m = target
        checks += [
            _compare("cx", m.cx(t, x, u), fd_jacobian(lambda xx: m.c(t, xx, u), x, step), tolerance),
            _compare("cu", m.cu(t, x, u), fd_jacobian(lambda uu: m.c(t, x, uu), u, step), tolerance),
            _compare("cxx", m.cxx(t, x, u), fd_jacobian(lambda xx: m.cx(t, xx, u), x, step), tolerance),
            _compare("cuu", m.cuu(t, x, u), fd_jacobian(lambda uu: m.cu(t, x, uu), u, step), tolerance),
            _compare("cxu", m.cxu(t, x, u), fd_jacobian(lambda uu: m.cx(t, x, uu), u, step), tolerance),
        ]
    elif isinstance(target, ConstraintModel):
        m = target
        if m.n_state:
            checks += [
                _compare("gx", m.gx(t, x), fd_jacobian(lambda xx: m.g(t, xx), x, step), tolerance),
                _compare("gxx", m.gxx(t, x), fd_jacobian(lambda xx: m.gx(t, xx), x, step), tolerance),
            ]
        if m.n_control:
            checks += [
                _compare("hu", m.hu(t, u), fd_jacobian(lambda uu: m.h(t, uu), u, step), tolerance),
                _compare("huu", m.huu(t, u), fd_jacobian(lambda uu: m.hu(t, uu), u, step), tolerance),
            ]
    else:
        raise TypeError(f"cannot check derivatives of {type(target).__name__}")

    report = DerivativeReport(tuple(checks), tolerance)
    if not report.ok:
        bad = ", ".join(
            f"{c.name} (abs {c.max_abs_err:.3e}, rel {c.max_rel_err:.3e})"
            for c in report.checks if not c.ok
        )
        raise DerivativeCheckError(f"derivative check failed for: {bad}")
    return report

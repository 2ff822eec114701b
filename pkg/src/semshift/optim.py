"""Limited-memory BFGS minimizer with a strong-Wolfe line search.

Standard two-loop recursion over the last ``memory`` curvature pairs, with
the gamma = s.y / y.y initial Hessian scaling. Written against smooth
convex objectives (the logistic loss here); non-convex inputs work but get
no guarantees beyond descent.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]

_C1 = 1e-4
_C2 = 0.9
_MAX_LINE_STEPS = 25


@dataclass(frozen=True)
class MinimizeResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    converged: bool
    message: str


def _zoom(fun: Objective, x, d, a_lo, a_hi, f_lo, f0, g0_d):
    """Bisection zoom between a bracketing pair; returns (alpha, f, g) or None."""
    a_best, found = a_lo, a_lo > 0.0 and f_lo < f0
    for _ in range(_MAX_LINE_STEPS):
        a = 0.5 * (a_lo + a_hi)
        f, g = fun(x + a * d)
        gd = float(g @ d)
        if f > f0 + _C1 * a * g0_d or f >= f_lo:
            a_hi = a
        else:
            if abs(gd) <= -_C2 * g0_d:
                return a, f, g
            if gd * (a_hi - a_lo) >= 0:
                a_hi = a_lo
            a_lo, f_lo = a, f
            a_best, found = a, True
        if abs(a_hi - a_lo) < 1e-16:
            break
    if not found:
        return None
    # no point satisfied strong Wolfe; fall back to the best Armijo point
    f, g = fun(x + a_best * d)
    return a_best, f, g


def _backtrack(fun: Objective, x, d, f0, g0_d):
    """Armijo backtracking fallback; accepts any strict decrease as last resort."""
    a = 1.0
    weakest = None
    for _ in range(40):
        f, g = fun(x + a * d)
        if f <= f0 + _C1 * a * g0_d:
            return a, f, g
        if f < f0 and weakest is None:
            weakest = (a, f, g)
        a *= 0.5
    return weakest


def _line_search(fun: Objective, x, d, f0, g0):
    """Strong-Wolfe search along d from x; returns (alpha, f, g) or None."""
    g0_d = float(g0 @ d)
    if g0_d >= 0:
        return None  # not a descent direction
    a_prev, f_prev = 0.0, f0
    a = 1.0
    result = None
    for it in range(_MAX_LINE_STEPS):
        f, g = fun(x + a * d)
        gd = float(g @ d)
        if f > f0 + _C1 * a * g0_d or (it > 0 and f >= f_prev):
            result = _zoom(fun, x, d, a_prev, a, f_prev, f0, g0_d)
            break
        if abs(gd) <= -_C2 * g0_d:
            return a, f, g
        if gd >= 0:
            result = _zoom(fun, x, d, a, a_prev, f, f0, g0_d)
            break
        a_prev, f_prev = a, f
        a *= 2.0
    if result is None:
        result = _backtrack(fun, x, d, f0, g0_d)
    return result


def minimize_lbfgs(
    fun: Objective,
    x0: np.ndarray,
    memory: int = 10,
    gtol: float = 1e-6,
    max_iter: int = 1000,
) -> MinimizeResult:
    """Minimize ``fun`` (returning value and gradient) from ``x0``.

    Terminates when the gradient sup-norm drops to ``gtol`` or after
    ``max_iter`` iterations; a failed line search also stops the run.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = fun(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise ValueError("objective not finite at the starting point")
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []

    for iteration in range(max_iter):
        if np.max(np.abs(g)) <= gtol:
            return MinimizeResult(x, f, g, iteration, True, "gradient tolerance reached")

        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * float(s @ q)
            alphas.append(a)
            q -= a * y
        if y_hist:
            gamma = float(s_hist[-1] @ y_hist[-1]) / float(y_hist[-1] @ y_hist[-1])
        else:
            gamma = 1.0
        r = gamma * q
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            beta = rho * float(y @ r)
            r += s * (a - beta)
        d = -r

        step = _line_search(fun, x, d, f, g)
        if step is None:
            return MinimizeResult(x, f, g, iteration, False, "line search failed")
        alpha, f_new, g_new = step
        x_new = x + alpha * d

        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            if len(s_hist) == memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
        x, f, g = x_new, f_new, g_new
        if not np.isfinite(f):
            raise ValueError("objective became non-finite during optimization")

    converged = bool(np.max(np.abs(g)) <= gtol)
    return MinimizeResult(x, f, g, max_iter, converged, "iteration limit reached")

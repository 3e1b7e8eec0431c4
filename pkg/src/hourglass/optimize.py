"""Nonlinear conjugate gradient (Polak-Ribiere+) with a bracketing line search.

The line search works on the directional derivative as much as on function values,
so it keeps making progress once function differences are below rounding level,
which is where a gradient tolerance of 1e-8 on lengths of order 10^3 lives.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = np.finfo(float).eps


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    iterations: int
    converged: bool
    message: str
    evaluations: int = 0


def _line_search(fg, x, f0, g0, d, alpha0, c1=1e-4, c2=0.1, max_trials=40):
    """Find a step along d meeting sufficient decrease and a strong curvature condition.

    Returns (alpha, f, g) or None when no acceptable step was found.
    """
    dphi0 = float(g0 @ d)
    slack = 8.0 * EPS * max(1.0, abs(f0))
    lo, f_lo, dphi_lo = 0.0, f0, dphi0
    hi, dphi_hi = None, None
    alpha = alpha0
    best = None
    evals = 0
    for _ in range(max_trials):
        xa = x + alpha * d
        f, g = fg(xa)
        evals += 1
        dphi = float(g @ d)
        armijo = f <= f0 + c1 * alpha * dphi0 + slack
        if armijo and (best is None or f < best[1]):
            best = (alpha, f, g, evals)
        if not armijo or (f > f_lo + slack and alpha > lo):
            hi, dphi_hi = alpha, dphi
        elif abs(dphi) <= c2 * abs(dphi0):
            return alpha, f, g, evals
        elif dphi > 0.0:
            hi, dphi_hi = alpha, dphi
        else:
            lo, f_lo, dphi_lo = alpha, f, dphi
        if hi is None:
            # still descending: secant extrapolation on the derivative, capped
            step = alpha * dphi0 / (dphi0 - dphi) if dphi > dphi0 else 4.0 * alpha
            alpha = min(max(step, 1.5 * alpha), 8.0 * alpha)
            continue
        width = hi - lo
        if width <= 4.0 * EPS * max(1.0, hi):
            break
        trial = None
        if dphi_hi is not None and dphi_hi > dphi_lo:
            trial = lo - dphi_lo * width / (dphi_hi - dphi_lo)
        if trial is None or not (lo + 0.05 * width <= trial <= hi - 0.05 * width):
            trial = lo + 0.5 * width
        alpha = trial
    if best is not None:
        return best[0], best[1], best[2], evals
    return None


def ncg_minimize(fg, x0, tol=1e-8, max_iter=100_000, restart=None, precond=None) -> OptimizeResult:
    """Minimise f given ``fg(x) -> (f, grad)`` until ||grad||_2 < tol.

    Polak-Ribiere+ directions, restarted to steepest descent every ``restart``
    iterations (default: problem size) or whenever the direction is not a descent
    direction.  When a line search along the CG direction fails, one plain
    (preconditioned) gradient step is tried before giving up.  ``precond(g)``
    should apply a symmetric positive definite approximation of the inverse Hessian.
    """
    apply = precond if precond is not None else (lambda v: v)
    x = np.array(x0, dtype=float)
    f, g = fg(x)
    evals = 1
    gnorm = float(np.linalg.norm(g))
    if restart is None:
        restart = max(50, x.size)
    z = apply(g)
    d = -z
    alpha_prev, gd_prev = None, None
    failures = 0
    it = 0
    while it < max_iter:
        if gnorm < tol:
            return OptimizeResult(x, f, gnorm, it, True, "gradient tolerance reached", evals)
        gd = float(g @ d)
        if gd >= 0.0:
            d = -z
            gd = float(g @ d)
        if alpha_prev is None:
            if precond is not None:
                alpha0 = 1.0
            else:
                alpha0 = 1.0 / max(gnorm, 1e-300) * min(1.0, max(abs(f), 1e-3))
        else:
            alpha0 = alpha_prev * gd_prev / gd
        ls = _line_search(fg, x, f, g, d, alpha0)
        if ls is None:
            evals += 40
            if failures == 0 and not np.array_equal(d, -z):
                failures += 1
                d = -z
                alpha_prev = None
                continue
            return OptimizeResult(x, f, gnorm, it, gnorm < tol, "line search failed", evals)
        alpha, f_new, g_new, n_ev = ls
        evals += n_ev
        failures = 0
        x = x + alpha * d
        it += 1
        z_new = apply(g_new)
        beta = max(0.0, float(z_new @ (g_new - g)) / max(float(g @ z), 1e-300))
        if it % restart == 0:
            beta = 0.0
        alpha_prev, gd_prev = alpha, gd
        f, g, z = f_new, g_new, z_new
        gnorm = float(np.linalg.norm(g))
        d = -z + beta * d
    return OptimizeResult(x, f, gnorm, it, gnorm < tol, "maximum iterations reached", evals)

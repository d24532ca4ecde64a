"""First-order drivers: fixed-step descent, steepest descent, momentum."""

from __future__ import annotations

import math

import numpy as np

from .common import (
    CONVERGED,
    LINESEARCH_FAILURE,
    NO_RELAXATION,
    DivergenceError,
    LineSearcher,
    OptimizeResult,
    Run,
    StopCriteria,
    check_finite,
)

# fixed-step runs abort once f exceeds this multiple of max(1, |f(x0)|)
DIVERGENCE_FACTOR = 1e3


def _start(oracle, x0, stop, meta):
    x = np.array(x0, dtype=np.float64).reshape(-1).copy()
    if x.size != oracle.n:
        raise ValueError(f"x0 has {x.size} entries, oracle expects {oracle.n}")
    run = Run(oracle, stop or StopCriteria(), meta)
    f, g = oracle.value_and_gradient(x)
    check_finite(f, g, "the start point")
    gn = float(np.linalg.norm(g))
    run.init_threshold(gn)
    run.update_best(x, f)
    run.record(0, f, gn, 0.0)
    return run, x, f, g, gn


def _diverged(f, f0):
    return not math.isfinite(f) or f > DIVERGENCE_FACTOR * max(1.0, abs(f0))


def gradient_descent_fixed(oracle, x0, L, stop=None) -> OptimizeResult:
    """x_{k+1} = x_k - (1/L) grad f(x_k)."""
    if not L > 0:
        raise ValueError("L must be positive")
    run, x, f, g, gn = _start(oracle, x0, stop, {"method": "gd", "L": L})
    status = CONVERGED if gn <= run.threshold else None
    k = 0
    while status is None:
        status = run.budget_status(k)
        if status:
            break
        x = x - (1.0 / L) * g
        f, g = oracle.value_and_gradient(x)
        check_finite(f, g, f"iteration {k + 1}")
        gn = float(np.linalg.norm(g))
        k += 1
        run.update_best(x, f)
        run.record(k, f, gn, 1.0 / L)
        if gn <= run.threshold:
            status = CONVERGED
    return run.finish(status, x, f, gn)


def steepest_descent(oracle, x0, linesearch: LineSearcher, stop=None) -> OptimizeResult:
    """Line search along the normalized antigradient each iteration."""
    run, x, f, g, gn = _start(
        oracle, x0, stop, {"method": "sd", "linesearch": linesearch.describe()}
    )
    status = CONVERGED if gn <= run.threshold else None
    k = 0
    while status is None:
        status = run.budget_status(k)
        if status:
            break
        r = -g / gn
        res = linesearch.search(oracle, x, r, f, g)
        if res.status == NO_RELAXATION:
            if run.stop.stop_on_linesearch_failure:
                status = LINESEARCH_FAILURE
                break
            k += 1
            run.record(k, f, gn, 0.0)
            continue
        x = x + res.h * r
        f = res.f_at_step
        g = oracle.gradient(x)
        check_finite(f, g, f"iteration {k + 1}")
        gn = float(np.linalg.norm(g))
        k += 1
        run.update_best(x, f)
        run.record(k, f, gn, res.h)
        if gn <= run.threshold:
            status = CONVERGED
    return run.finish_best(status, x, f, gn)


def heavy_ball(oracle, x0, alpha, beta, stop=None) -> OptimizeResult:
    """Polyak momentum: x_{k+1} = x_k - alpha g_k + beta (x_k - x_{k-1})."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must lie in [0, 1)")
    run, x, f, g, gn = _start(
        oracle, x0, stop, {"method": "hb", "alpha": alpha, "beta": beta}
    )
    f0 = f
    x_prev = x.copy()
    status = CONVERGED if gn <= run.threshold else None
    k = 0
    while status is None:
        status = run.budget_status(k)
        if status:
            break
        x_new = x - alpha * g + beta * (x - x_prev)
        x_prev, x = x, x_new
        f, g = oracle.value_and_gradient(x)
        if _diverged(f, f0) or not np.all(np.isfinite(g)):
            raise DivergenceError(
                f"heavy ball diverged at iteration {k + 1}: f={f!r} "
                f"(start f={f0!r}); reduce alpha or beta"
            )
        gn = float(np.linalg.norm(g))
        k += 1
        run.update_best(x, f)
        run.record(k, f, gn, alpha)
        if gn <= run.threshold:
            status = CONVERGED
    return run.finish(status, x, f, gn)


def nesterov_momentum(oracle, x0, L, stop=None) -> OptimizeResult:
    """Accelerated descent for convex f with the (k-1)/(k+2) schedule.

    The gradient is taken at the extrapolated point w_k, and the trace's
    grad_norm column reports |grad f(w_k)| since that is what the method
    evaluates.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    run, x, f, g, gn = _start(oracle, x0, stop, {"method": "nag", "L": L})
    f0 = f
    x_prev = x.copy()
    status = CONVERGED if gn <= run.threshold else None
    k = 0
    while status is None:
        status = run.budget_status(k)
        if status:
            break
        m = (k - 1.0) / (k + 2.0)
        w = x + m * (x - x_prev)
        gw = g if k == 0 else oracle.gradient(w)
        x_prev = x
        x = w - (1.0 / L) * gw
        f = oracle.value(x)
        if _diverged(f, f0) or not np.all(np.isfinite(gw)):
            raise DivergenceError(
                f"nesterov momentum diverged at iteration {k + 1}: f={f!r}"
            )
        gn = float(np.linalg.norm(gw))
        k += 1
        run.update_best(x, f)
        run.record(k, f, gn, 1.0 / L)
        if gn <= run.threshold:
            status = CONVERGED
    return run.finish(status, x, f, gn)


def nesterov_strongly_convex(oracle, x0, L, mu, stop=None) -> OptimizeResult:
    """Constant-momentum variant for mu-strongly convex objectives."""
    if not L > 0 or not mu > 0:
        raise ValueError("L and mu must be positive")
    if mu > L:
        raise ValueError("mu must not exceed L")
    m = (math.sqrt(L) - math.sqrt(mu)) / (math.sqrt(L) + math.sqrt(mu))
    run, x, f, g, gn = _start(
        oracle, x0, stop, {"method": "nag-sc", "L": L, "mu": mu}
    )
    f0 = f
    x_prev = x.copy()
    status = CONVERGED if gn <= run.threshold else None
    k = 0
    while status is None:
        status = run.budget_status(k)
        if status:
            break
        w = x + m * (x - x_prev)
        gw = g if k == 0 else oracle.gradient(w)
        x_prev = x
        x = w - (1.0 / L) * gw
        f = oracle.value(x)
        if _diverged(f, f0) or not np.all(np.isfinite(gw)):
            raise DivergenceError(
                f"strongly convex nesterov diverged at iteration {k + 1}: f={f!r}"
            )
        gn = float(np.linalg.norm(gw))
        k += 1
        run.update_best(x, f)
        run.record(k, f, gn, 1.0 / L)
        if gn <= run.threshold:
            status = CONVERGED
    return run.finish(status, x, f, gn)

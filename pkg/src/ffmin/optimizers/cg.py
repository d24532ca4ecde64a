"""Nonlinear conjugate gradients with pluggable beta formulas.

The running direction p is kept unnormalized; the line search always
receives a unit-norm copy. Restarts (p <- -g) happen every restart_period
iterations, whenever the updated direction fails the descent test
<p, -g> > 0, and once after a line-search failure; a second consecutive
line-search failure ends the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .common import (
    CONVERGED,
    LINESEARCH_FAILURE,
    NO_RELAXATION,
    LineSearcher,
    OptimizeResult,
    check_finite,
)
from .gradient import _start

VARIANTS = ("fr", "prp", "prp+", "hs", "cd", "ls", "dy")

_ALIASES = {
    "fletcher-reeves": "fr",
    "fletcherreeves": "fr",
    "polak-ribiere-polyak": "prp",
    "polakribierepolyak": "prp",
    "polak-ribiere-plus": "prp+",
    "polakribiereplus": "prp+",
    "hestenes-stiefel": "hs",
    "hestenesstiefel": "hs",
    "conjugate-descent": "cd",
    "conjugatedescent": "cd",
    "liu-storey": "ls",
    "liustorey": "ls",
    "dai-yuan": "dy",
    "daiyuan": "dy",
}


def canonical_variant(kind: str) -> str:
    k = kind.strip().lower()
    k = _ALIASES.get(k, k)
    if k not in VARIANTS:
        raise ValueError(f"unknown cg variant {kind!r}; expected one of {VARIANTS}")
    return k


@dataclass(frozen=True)
class CgVariant:
    kind: str = "prp"
    restart_period: int = 100

    def __post_init__(self):
        object.__setattr__(self, "kind", canonical_variant(self.kind))
        if self.restart_period < 1:
            raise ValueError("restart_period must be >= 1")


def cg_beta(kind, g_new, g_old, p):
    """Positive-sign beta for the update p+ = -g_new + beta * p.

    The four variants whose textbook denominators involve the previous
    step use p here; since the step is a positive multiple of p, the
    product beta * p is identical either way.
    """
    y = g_new - g_old
    if kind == "fr":
        num, den = float(g_new @ g_new), float(g_old @ g_old)
    elif kind == "prp":
        num, den = float(g_new @ y), float(g_old @ g_old)
    elif kind == "prp+":
        num, den = max(float(g_new @ y), 0.0), float(g_old @ g_old)
    elif kind == "hs":
        num, den = float(g_new @ y), float(p @ y)
    elif kind == "cd":
        num, den = float(g_new @ g_new), -float(p @ g_old)
    elif kind == "ls":
        num, den = float(g_new @ y), -float(p @ g_old)
    elif kind == "dy":
        num, den = float(g_new @ g_new), float(p @ y)
    else:
        raise ValueError(f"unknown cg variant {kind!r}")
    if den == 0.0:
        return math.nan
    return num / den


def cg(oracle, x0, variant: CgVariant, linesearch: LineSearcher, stop=None) -> OptimizeResult:
    if isinstance(variant, str):
        variant = CgVariant(kind=variant)
    run, x, f, g, gn = _start(
        oracle, x0, stop,
        {"method": "cg", "variant": variant.kind,
         "restart_period": variant.restart_period,
         "linesearch": linesearch.describe()},
    )
    status = CONVERGED if gn <= run.threshold else None
    p = -g
    since_restart = 0
    ls_failures = 0
    k = 0
    while status is None:
        status = run.budget_status(k)
        if status:
            break
        pn = float(np.linalg.norm(p))
        if pn == 0.0:
            p, pn = -g, gn
            since_restart = 0
        r = p / pn
        res = linesearch.search(oracle, x, r, f, g)
        if res.status == NO_RELAXATION:
            ls_failures += 1
            if ls_failures >= 2:
                if run.stop.stop_on_linesearch_failure:
                    status = LINESEARCH_FAILURE
                    break
                k += 1
                run.record(k, f, gn, 0.0)
                ls_failures = 0
            p = -g
            since_restart = 0
            continue
        ls_failures = 0
        x_new = x + res.h * r
        g_new = oracle.gradient(x_new)
        check_finite(res.f_at_step, g_new, f"iteration {k + 1}")
        since_restart += 1
        if since_restart >= variant.restart_period:
            p_new = -g_new
            since_restart = 0
        else:
            beta = cg_beta(variant.kind, g_new, g, p)
            p_new = -g_new + beta * p if math.isfinite(beta) else -g_new
            if not math.isfinite(beta) or float(p_new @ -g_new) <= 0.0:
                p_new = -g_new
                since_restart = 0
        x, f, g, p = x_new, res.f_at_step, g_new, p_new
        gn = float(np.linalg.norm(g))
        k += 1
        run.update_best(x, f)
        run.record(k, f, gn, res.h)
        if gn <= run.threshold:
            status = CONVERGED
    return run.finish_best(status, x, f, gn)
